//! Task execution. Every task returns its artifacts in memory; writing and
//! hashing happen in the manifest layer.

use std::fmt::Write as _;

use gaplab::cocycle::{classify_regime, lyapunov_exponent, rotation_number, RegimeLabel};
use gaplab::gaps::{family_gap_report, gap_opening_experiment};
use gaplab::operators::{
    histogram, ids, jacobi_cocycle_map, johnson_cross_check, OperatorFamily, SpectrumApprox, SzegoCocycle,
};
use gaplab::projection::{bump_perturbation, build_local_conjugacy, Arc, JacobiClass, SzegoClass};
use gaplab::tongues::{boundary_smoothness_probe, trace_tongue, transversality_slopes};
use gaplab::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{ClassKind, ExperimentConfig, TaskSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

pub struct RunOutput {
    pub artifacts: Vec<Artifact>,
    /// One-line summary for stdout.
    pub summary: String,
}

struct Emitter<'a> {
    hash: &'a str,
    artifacts: Vec<Artifact>,
}

impl Emitter<'_> {
    fn csv(&mut self, name: &str, header: &str, body: String) {
        let text = format!("# config_hash={}\n{header}\n{body}", self.hash);
        self.artifacts.push(Artifact { name: name.into(), bytes: text.into_bytes() });
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) {
        #[derive(Serialize)]
        struct Wrapped<'a, T> {
            config_hash: &'a str,
            #[serde(flatten)]
            value: &'a T,
        }
        let mut bytes = serde_json::to_vec_pretty(&Wrapped { config_hash: self.hash, value }).expect("artifact serializes");
        bytes.push(b'\n');
        self.artifacts.push(Artifact { name: name.into(), bytes });
    }
}

#[derive(Serialize)]
struct SpectrumJson<'a> {
    family: &'a OperatorFamily,
    #[serde(rename = "N")]
    n: usize,
    omega_samples: usize,
    boundary: gaplab::operators::Boundary,
    eigenvalues: &'a [f64],
}

fn spectrum(config: &ExperimentConfig, family: &OperatorFamily) -> Result<SpectrumApprox> {
    let nm = &config.numerics;
    family.spectrum(&family.base().point(nm.omega0), nm.n, nm.omega_samples, nm.boundary_angle)
}

pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    let hash = config.hash();
    let mut out = Emitter { hash: &hash, artifacts: Vec::new() };
    let family = config.family()?;
    let omega0 = family.base().point(config.numerics.omega0);
    let summary = match &config.task {
        TaskSpec::Spectrum { bins } => {
            let spec = spectrum(config, &family)?;
            let mut body = String::new();
            for (x, c) in histogram(&spec, *bins) {
                writeln!(body, "{x},{c}").unwrap();
            }
            out.csv("histogram.csv", "value,count", body);
            out.json(
                "spectrum.json",
                &SpectrumJson {
                    family: &family,
                    n: spec.n,
                    omega_samples: spec.omega_samples,
                    boundary: spec.boundary,
                    eigenvalues: &spec.eigenvalues,
                },
            );
            format!("{} eigenvalues", spec.eigenvalues.len())
        }
        TaskSpec::Ids { grid } => {
            let spec = spectrum(config, &family)?;
            let mut body = String::new();
            for x in grid.as_ref().expect("materialized").values() {
                writeln!(body, "{x},{}", ids(&spec, x)).unwrap();
            }
            out.csv("ids.csv", "E,ids", body);
            format!("{} eigenvalues", spec.eigenvalues.len())
        }
        TaskSpec::Rotation { grid, n_rot, burn_in, lyapunov_n } => {
            let es = grid.as_ref().expect("materialized").values();
            let samples = config.numerics.omega_samples;
            let mut body = String::new();
            for &e in &es {
                let (r, l) = match &family {
                    OperatorFamily::Jacobi(f) => {
                        let c = jacobi_cocycle_map(f, e)?;
                        (rotation_number(&c, &omega0, *n_rot, *burn_in)?, lyapunov_exponent(&c, *lyapunov_n, samples)?)
                    }
                    OperatorFamily::Cmv(f) => {
                        let c = SzegoCocycle::at_angle(f, e);
                        (rotation_number(&c, &omega0, *n_rot, *burn_in)?, lyapunov_exponent(&c, *lyapunov_n, samples)?)
                    }
                };
                writeln!(body, "{e},{},{},{l}", r.rho, r.stderr).unwrap();
            }
            out.csv("rotation.csv", "E,rho,rho_stderr,lyapunov", body);
            format!("{} energies", es.len())
        }
        TaskSpec::Uh { grid, johnson } => {
            let spec = spectrum(config, &family)?;
            let es = grid.as_ref().expect("materialized").values();
            let report = johnson_cross_check(&family, &spec, &es, johnson)?;
            let mut body = String::new();
            for r in &report.rows {
                let v = serde_json::to_value(r.verdict).expect("verdict serializes");
                writeln!(body, "{},{},{},{},{}", r.energy, v.as_str().unwrap_or(""), r.window_count, r.dense, r.agree)
                    .unwrap();
            }
            out.csv("uh.csv", "E,verdict,window_count,dense,agree", body);
            out.json("uh.json", &report);
            format!(
                "agreement {:.4}, inconclusive {:.4}, contradictions {}",
                report.agreement_rate, report.inconclusive_rate, report.contradictions
            )
        }
        TaskSpec::Classify { energies, epsilons, n } => {
            #[derive(Serialize)]
            struct Row {
                energy: f64,
                label: RegimeLabel,
            }
            #[derive(Serialize)]
            struct Labels {
                labels: Vec<Row>,
            }
            let mut rows = Vec::new();
            for &e in energies.as_ref().expect("materialized") {
                let label = match &family {
                    OperatorFamily::Jacobi(f) => classify_regime(&jacobi_cocycle_map(f, e)?, epsilons, *n),
                    OperatorFamily::Cmv(f) => classify_regime(&SzegoCocycle::at_angle(f, e), epsilons, *n),
                };
                rows.push(Row { energy: e, label });
            }
            let summary = rows.iter().map(|r| format!("{}: {:?}", r.energy, r.label.regime)).collect::<Vec<_>>().join(", ");
            out.json("classify.json", &Labels { labels: rows });
            summary
        }
        TaskSpec::Gaps { .. } => {
            let (_, report) = family_gap_report(&family, &config.gap_settings())?;
            out.json("gaps.json", &report);
            format!("{} gaps, all_labelled={}", report.gaps.len(), report.all_labelled)
        }
        TaskSpec::Open { k, tmax, steps, perturbation, .. } => {
            let ts: Vec<f64> = (0..=*steps).map(|j| tmax * j as f64 / *steps as f64).collect();
            let rows = gap_opening_experiment(&family, perturbation, *k, &ts, &config.gap_settings())?;
            let mut body = String::new();
            let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
            for r in &rows {
                let idx = r.label_index.map(|v| v.to_string()).unwrap_or_default();
                writeln!(body, "{},{},{},{idx},{}", r.t, r.width, opt(r.label_value), opt(r.residual)).unwrap();
            }
            out.csv("opening.csv", "t,width,label_value,label_index,residual", body);
            format!("final width {}", rows.last().map(|r| r.width).unwrap_or(0.0))
        }
        TaskSpec::Project { class, theta, energy, bump_size, grid } => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.numerics.seed);
            let generator: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let arc = Arc::default_for(family.base().frequency().value());
            #[derive(Serialize)]
            struct Dump<'a, T> {
                class: ClassKind,
                generator: [f64; 3],
                bump_size: f64,
                #[serde(flatten)]
                conjugacy: &'a T,
            }
            let residual = match (&family, class) {
                (OperatorFamily::Cmv(f), ClassKind::Cmv) => {
                    let a = SzegoCocycle::at_angle(f, 2.0 * theta);
                    let cls = SzegoClass { theta: *theta };
                    let b = bump_perturbation(cls, &a, arc, *bump_size, generator);
                    let lc = build_local_conjugacy(&cls, &a, &b, arc, *grid)?;
                    out.json("project.json", &Dump { class: *class, generator, bump_size: *bump_size, conjugacy: &lc });
                    lc.max_residual
                }
                (OperatorFamily::Jacobi(f), ClassKind::Jacobi) => {
                    let a = jacobi_cocycle_map(f, *energy)?;
                    let b = bump_perturbation(JacobiClass, &a, arc, *bump_size, generator);
                    let lc = build_local_conjugacy(&JacobiClass, &a, &b, arc, *grid)?;
                    out.json("project.json", &Dump { class: *class, generator, bump_size: *bump_size, conjugacy: &lc });
                    lc.max_residual
                }
                _ => return Err(Error::Precondition("projection class does not match the family".into())),
            };
            format!("max_residual={residual:e}")
        }
        TaskSpec::Tongues { k, dmin, dmax, steps, bracket, settings, slope_tol, smoothness_window } => {
            let f1 = config.family.one_parameter()?;
            let deltas: Vec<f64> = (0..=*steps).map(|j| dmin + (dmax - dmin) * j as f64 / *steps as f64).collect();
            let [lo, hi] = bracket.expect("materialized");
            let curve = trace_tongue(&f1, *k, &deltas, (lo, hi), settings)?;
            let body = curve.to_csv();
            let (header, rows) = body.split_once('\n').unwrap_or((&body, ""));
            out.csv(&format!("tongue_k{k}.csv"), header, rows.to_string());
            let step = (dmax - dmin) / *steps as f64;
            match transversality_slopes(&curve, *dmin, step, *slope_tol) {
                Ok(report) => out.json("slopes.json", &report),
                Err(e) if e.is_precondition() => {
                    #[derive(Serialize)]
                    struct Skipped {
                        skipped: String,
                    }
                    out.json("slopes.json", &Skipped { skipped: e.to_string() });
                }
                Err(e) => return Err(e),
            }
            if deltas.len() > 2 * smoothness_window {
                out.json("smoothness.json", &boundary_smoothness_probe(&curve, *smoothness_window)?);
            }
            format!("max width {}", curve.widths.iter().copied().fold(0.0, f64::max))
        }
    };
    Ok(RunOutput { artifacts: out.artifacts, summary })
}
