mod config;
mod manifest;
mod run;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use config::{ClassKind, ExperimentConfig, FamilySpec, TaskSpec};
use manifest::{compare, write_all, Manifest};

const EXIT_MISMATCH: u8 = 1;
const EXIT_PRECONDITION: u8 = 2;
const EXIT_COMPUTATIONAL: u8 = 3;

#[derive(Parser)]
#[command(name = "gaplab", version, about = "Spectral experiments for quasi-periodic Jacobi and CMV operators")]
struct Cli {
    /// JSON experiment config; flags given on the command line override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory for artifacts and the manifest.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    #[command(flatten)]
    family: FamilyArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyName {
    Amo,
    FreeJacobi,
    Cmv,
    FreeCmv,
}

#[derive(Args)]
struct FamilyArgs {
    #[arg(long, global = true)]
    family: Option<FamilyName>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    lambda: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    alpha: Option<f64>,
}

#[derive(Args, Default)]
struct TruncationArgs {
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    /// CMV boundary coefficient angle.
    #[arg(long, allow_negative_numbers = true)]
    boundary: Option<f64>,
}

#[derive(Args, Default)]
struct GridArgs {
    #[arg(long, allow_negative_numbers = true)]
    emin: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    emax: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Pooled truncated spectrum and histogram.
    Spectrum {
        #[command(flatten)]
        trunc: TruncationArgs,
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Integrated density of states on an energy grid.
    Ids {
        #[command(flatten)]
        trunc: TruncationArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Rotation number and Lyapunov exponent sweep.
    Rotation {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        n_rot: Option<usize>,
    },
    /// UH certificates cross-checked against eigenvalue density.
    Uh {
        #[command(flatten)]
        trunc: TruncationArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Sub/critical/supercritical labels.
    Classify {
        #[arg(long = "energy", allow_negative_numbers = true)]
        energies: Vec<f64>,
    },
    /// Detected and labelled spectral gaps.
    Gaps {
        #[command(flatten)]
        trunc: TruncationArgs,
    },
    /// Gap width along a perturbation path.
    Open {
        #[command(flatten)]
        trunc: TruncationArgs,
        #[arg(long, allow_negative_numbers = true)]
        k: Option<i64>,
        #[arg(long, allow_negative_numbers = true)]
        tmax: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Local conjugacy of a bump perturbation back into its class.
    Project {
        #[arg(long, value_enum)]
        class: Option<ClassArg>,
        #[arg(long, allow_negative_numbers = true)]
        theta: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        energy: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        bump_size: Option<f64>,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Resonance tongue boundaries over a coupling sweep.
    Tongues {
        #[arg(long, allow_negative_numbers = true)]
        k: Option<i64>,
        #[arg(long, allow_negative_numbers = true)]
        dmin: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        dmax: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Rerun a manifest and byte-compare its artifacts.
    Reproduce {
        manifest: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassArg {
    Cmv,
    Jacobi,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Spectrum { .. } => "spectrum",
            Command::Ids { .. } => "ids",
            Command::Rotation { .. } => "rotation",
            Command::Uh { .. } => "uh",
            Command::Classify { .. } => "classify",
            Command::Gaps { .. } => "gaps",
            Command::Open { .. } => "open",
            Command::Project { .. } => "project",
            Command::Tongues { .. } => "tongues",
            Command::Reproduce { .. } => "reproduce",
        }
    }
}

#[derive(Serialize)]
struct ErrorJson<'a> {
    error: &'a str,
    exit_code: u8,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    key: Option<String>,
}

struct Failure {
    kind: &'static str,
    code: u8,
    message: String,
    key: Option<String>,
}

impl Failure {
    fn precondition(message: impl Into<String>) -> Self {
        Failure { kind: "invalid_input", code: EXIT_PRECONDITION, message: message.into(), key: None }
    }
}

impl From<gaplab::Error> for Failure {
    fn from(e: gaplab::Error) -> Self {
        let (kind, code) = match &e {
            gaplab::Error::InvalidInput(_) => ("invalid_input", EXIT_PRECONDITION),
            gaplab::Error::Precondition(_) => ("precondition", EXIT_PRECONDITION),
            gaplab::Error::Singular(_) => ("singular", EXIT_PRECONDITION),
            gaplab::Error::OutOfRange(_) => ("out_of_range", EXIT_PRECONDITION),
            gaplab::Error::Inconclusive(_) => ("inconclusive", EXIT_COMPUTATIONAL),
            gaplab::Error::Computational(_) => ("computational", EXIT_COMPUTATIONAL),
        };
        Failure { kind, code, message: e.to_string(), key: None }
    }
}

fn config_error(path: &Path, e: serde_json::Error) -> Failure {
    let msg = e.to_string();
    let key = msg.split_once("unknown field `").and_then(|(_, rest)| rest.split_once('`')).map(|(k, _)| k.to_string());
    Failure {
        kind: if key.is_some() { "unknown_key" } else { "invalid_config" },
        code: EXIT_PRECONDITION,
        message: format!("{}: {msg}", path.display()),
        key,
    }
}

fn default_family(cmd: &Command) -> FamilySpec {
    match cmd {
        Command::Open { .. } => FamilySpec::FreeJacobi { base: Default::default() },
        Command::Project { class: Some(ClassArg::Cmv), .. } => FamilySpec::cmv(0.5),
        _ => FamilySpec::amo(0.5),
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let name = cli.command.name();
    let mut config = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::precondition(format!("cannot read {}: {e}", path.display())))?;
            let c = ExperimentConfig::from_json(&text).map_err(|e| config_error(path, e))?;
            if c.task.name() != name {
                return Err(Failure::precondition(format!(
                    "config task is `{}` but the subcommand is `{name}`",
                    c.task.name()
                )));
            }
            c
        }
        None => ExperimentConfig {
            family: default_family(&cli.command),
            numerics: Default::default(),
            task: TaskSpec::default_for(name).expect("every task subcommand has defaults"),
            output: Default::default(),
        },
    };
    apply_family_flags(&mut config, &cli.family);
    apply_task_flags(&mut config, &cli.command);
    let mut config = config.materialize()?;
    apply_task_flags(&mut config, &cli.command);
    if let Some(dir) = &cli.out {
        config.output.dir = dir.to_string_lossy().into_owned();
    }
    Ok(config.materialize()?)
}

fn apply_family_flags(config: &mut ExperimentConfig, f: &FamilyArgs) {
    if let Some(name) = f.family {
        let base = config.family.base().clone();
        config.family = match name {
            FamilyName::Amo => FamilySpec::Amo { lambda: 0.5, base },
            FamilyName::FreeJacobi => FamilySpec::FreeJacobi { base },
            FamilyName::Cmv => {
                let mut f = FamilySpec::cmv(0.5);
                *f.base_mut() = base;
                f
            }
            FamilyName::FreeCmv => FamilySpec::FreeCmv { base },
        };
    }
    if let Some(l) = f.lambda {
        match &mut config.family {
            FamilySpec::Amo { lambda, .. } | FamilySpec::Cmv { lambda, .. } => *lambda = l,
            _ => {}
        }
    }
    if let Some(a) = f.alpha {
        config.family.base_mut().alpha = a;
    }
}

fn set<T: Copy>(dst: &mut T, src: Option<T>) {
    if let Some(v) = src {
        *dst = v;
    }
}

fn apply_trunc(numerics: &mut config::Numerics, t: &TruncationArgs) {
    set(&mut numerics.n, t.n);
    set(&mut numerics.omega_samples, t.samples);
    set(&mut numerics.boundary_angle, t.boundary);
}

fn apply_grid(grid: &mut Option<config::Grid>, g: &GridArgs) {
    if let Some(cur) = grid {
        set(&mut cur.min, g.emin);
        set(&mut cur.max, g.emax);
        set(&mut cur.points, g.points);
    }
}

fn apply_task_flags(config: &mut ExperimentConfig, cmd: &Command) {
    let ExperimentConfig { numerics, task, .. } = config;
    match (cmd, task) {
        (Command::Spectrum { trunc, bins: b }, TaskSpec::Spectrum { bins }) => {
            apply_trunc(numerics, trunc);
            set(bins, *b);
        }
        (Command::Ids { trunc, grid: g }, TaskSpec::Ids { grid }) => {
            apply_trunc(numerics, trunc);
            apply_grid(grid, g);
        }
        (Command::Rotation { grid: g, n_rot: n }, TaskSpec::Rotation { grid, n_rot, .. }) => {
            apply_grid(grid, g);
            set(n_rot, *n);
        }
        (Command::Uh { trunc, grid: g }, TaskSpec::Uh { grid, .. }) => {
            apply_trunc(numerics, trunc);
            apply_grid(grid, g);
        }
        (Command::Classify { energies: e }, TaskSpec::Classify { energies, .. }) => {
            if !e.is_empty() {
                *energies = Some(e.clone());
            }
        }
        (Command::Gaps { trunc }, TaskSpec::Gaps { .. }) => apply_trunc(numerics, trunc),
        (Command::Open { trunc, k: kk, tmax: t, steps: st }, TaskSpec::Open { k, tmax, steps, .. }) => {
            apply_trunc(numerics, trunc);
            set(k, *kk);
            set(tmax, *t);
            set(steps, *st);
        }
        (
            Command::Project { class: c, theta: th, energy: e, bump_size: b, grid: g },
            TaskSpec::Project { class, theta, energy, bump_size, grid },
        ) => {
            if let Some(c) = c {
                *class = match c {
                    ClassArg::Cmv => ClassKind::Cmv,
                    ClassArg::Jacobi => ClassKind::Jacobi,
                };
            }
            set(theta, *th);
            set(energy, *e);
            set(bump_size, *b);
            set(grid, *g);
        }
        (
            Command::Tongues { k: kk, dmin: lo, dmax: hi, steps: st },
            TaskSpec::Tongues { k, dmin, dmax, steps, bracket, .. },
        ) => {
            if lo.is_some() || hi.is_some() {
                *bracket = None;
            }
            set(k, *kk);
            set(dmin, *lo);
            set(dmax, *hi);
            set(steps, *st);
        }
        _ => {}
    }
}

fn run_task(cli: &Cli) -> Result<u8, Failure> {
    let config = load_config(cli)?;
    let workers = cli.workers.unwrap_or(1);
    let start = Instant::now();
    let out = with_workers(workers, || run::run(&config))??;
    let manifest = Manifest::new(&config, &out.artifacts, workers, start.elapsed().as_secs_f64());
    let dir = PathBuf::from(&config.output.dir);
    let path = write_all(&dir, &out.artifacts, &manifest)
        .map_err(|e| Failure { kind: "io", code: EXIT_COMPUTATIONAL, message: e.to_string(), key: None })?;
    println!("{}", out.summary);
    println!("manifest: {}", path.display());
    Ok(0)
}

fn reproduce(cli: &Cli, path: &Path) -> Result<u8, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::precondition(format!("cannot read {}: {e}", path.display())))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| config_error(path, e))?;
    let config = manifest.config.clone().materialize()?;
    let workers = cli.workers.unwrap_or(1);
    let fresh = with_workers(workers, || run::run(&config))??;
    let dir = path.parent().unwrap_or(Path::new("."));
    let report = compare(&manifest, dir, &fresh.artifacts);
    if report.identical {
        println!("identical: {} artifacts", manifest.artifacts.len());
        Ok(0)
    } else {
        eprintln!("{}", serde_json::to_string(&report).expect("report serializes"));
        Ok(EXIT_MISMATCH)
    }
}

fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    if workers == 0 {
        return Err(Failure::precondition("--workers must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Failure { kind: "io", code: EXIT_COMPUTATIONAL, message: e.to_string(), key: None })?;
    Ok(pool.install(f))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Reproduce { manifest } => reproduce(&cli, manifest),
        _ => run_task(&cli),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            let json = ErrorJson { error: f.kind, exit_code: f.code, message: f.message, key: f.key };
            eprintln!("{}", serde_json::to_string(&json).expect("error serializes"));
            ExitCode::from(f.code)
        }
    }
}
