//! Experiment configuration. A config is one JSON document; every default is
//! filled in by [`ExperimentConfig::materialize`] before the run, so the echo
//! in the manifest is complete.

use std::f64::consts::TAU;

use gaplab::dynamics::{BaseDynamics, Frequency, TrigPoly};
use gaplab::gaps::GapSettings;
use gaplab::operators::{CmvFamily, JacobiFamily, JohnsonSettings, OperatorFamily, Verblunsky};
use gaplab::tongues::{Family1P, TongueSettings, DEFAULT_SLOPE_TOL};
use gaplab::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: FamilySpec,
    #[serde(default)]
    pub numerics: Numerics,
    pub task: TaskSpec,
    /// Not part of the config hash.
    #[serde(default)]
    pub output: Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseMap {
    TorusRotation,
    SkewShift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseSpec {
    pub map: BaseMap,
    pub alpha: f64,
}

impl Default for BaseSpec {
    fn default() -> Self {
        BaseSpec { map: BaseMap::TorusRotation, alpha: Frequency::golden().value() }
    }
}

impl BaseSpec {
    pub fn dynamics(&self) -> Result<BaseDynamics> {
        match self.map {
            BaseMap::TorusRotation => BaseDynamics::rotation(self.alpha),
            BaseMap::SkewShift => BaseDynamics::skew_shift(self.alpha),
        }
    }
}

fn half() -> f64 {
    0.5
}

fn cos1() -> TrigPoly {
    TrigPoly::cos(1, 1.0)
}

fn one() -> TrigPoly {
    TrigPoly::constant(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    /// a ≡ 1, b = 2λ cos 2πω.
    Amo {
        #[serde(default = "half")]
        lambda: f64,
        #[serde(default)]
        base: BaseSpec,
    },
    FreeJacobi {
        #[serde(default)]
        base: BaseSpec,
    },
    Jacobi {
        #[serde(default = "one")]
        a: TrigPoly,
        b: TrigPoly,
        #[serde(default)]
        base: BaseSpec,
    },
    /// v = λ e^{ih}.
    Cmv {
        #[serde(default = "half")]
        lambda: f64,
        #[serde(default = "cos1")]
        h: TrigPoly,
        #[serde(default)]
        base: BaseSpec,
    },
    FreeCmv {
        #[serde(default)]
        base: BaseSpec,
    },
}

impl FamilySpec {
    pub fn amo(lambda: f64) -> Self {
        FamilySpec::Amo { lambda, base: BaseSpec::default() }
    }

    pub fn cmv(lambda: f64) -> Self {
        FamilySpec::Cmv { lambda, h: cos1(), base: BaseSpec::default() }
    }

    pub fn base(&self) -> &BaseSpec {
        match self {
            FamilySpec::Amo { base, .. }
            | FamilySpec::FreeJacobi { base }
            | FamilySpec::Jacobi { base, .. }
            | FamilySpec::Cmv { base, .. }
            | FamilySpec::FreeCmv { base } => base,
        }
    }

    pub fn base_mut(&mut self) -> &mut BaseSpec {
        match self {
            FamilySpec::Amo { base, .. }
            | FamilySpec::FreeJacobi { base }
            | FamilySpec::Jacobi { base, .. }
            | FamilySpec::Cmv { base, .. }
            | FamilySpec::FreeCmv { base } => base,
        }
    }

    pub fn is_cmv(&self) -> bool {
        matches!(self, FamilySpec::Cmv { .. } | FamilySpec::FreeCmv { .. })
    }

    pub fn build(&self) -> Result<OperatorFamily> {
        let base = self.base().dynamics()?;
        Ok(match self {
            FamilySpec::Amo { lambda, .. } => OperatorFamily::Jacobi(JacobiFamily::almost_mathieu(*lambda, base)),
            FamilySpec::FreeJacobi { .. } => OperatorFamily::Jacobi(JacobiFamily::free(base)),
            FamilySpec::Jacobi { a, b, .. } => OperatorFamily::Jacobi(JacobiFamily::new(a.clone(), b.clone(), base)?),
            FamilySpec::Cmv { lambda, h, .. } => OperatorFamily::Cmv(CmvFamily::new(
                Verblunsky::Polar { lambda: *lambda, h: h.clone() },
                base,
            )?),
            FamilySpec::FreeCmv { .. } => OperatorFamily::Cmv(CmvFamily::free(base)),
        })
    }

    /// The one-parameter coupling swept by `tongues`: b_δ = δ·b for Jacobi
    /// kinds (the AMO coupling is δ itself), v_δ = λe^{iδh} for CMV.
    pub fn one_parameter(&self) -> Result<Family1P> {
        let base = self.base().dynamics()?;
        match self {
            FamilySpec::Amo { .. } => Ok(Family1P::almost_mathieu(base)),
            FamilySpec::Jacobi { a, b, .. } => Ok(Family1P {
                coupling: gaplab::tongues::Coupling::Jacobi { a: a.clone(), b: b.clone() },
                base,
            }),
            FamilySpec::Cmv { lambda, h, .. } => Ok(Family1P::cmv(*lambda, h.clone(), base)),
            FamilySpec::FreeJacobi { .. } | FamilySpec::FreeCmv { .. } => {
                Err(Error::Precondition("tongues need a family with a nonzero coupling direction".into()))
            }
        }
    }

    /// Crude spectral hull for default energy grids.
    fn energy_window(&self) -> (f64, f64) {
        match self {
            FamilySpec::Amo { lambda, .. } => (-2.0 - 2.0 * lambda.abs() - 0.2, 2.0 + 2.0 * lambda.abs() + 0.2),
            FamilySpec::FreeJacobi { .. } => (-2.2, 2.2),
            FamilySpec::Jacobi { a, b, .. } => {
                let (_, amax) = a.range_on_grid(1024);
                let (blo, bhi) = b.range_on_grid(1024);
                (blo - 2.0 * amax - 0.2, bhi + 2.0 * amax + 0.2)
            }
            FamilySpec::Cmv { .. } | FamilySpec::FreeCmv { .. } => (0.0, TAU),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    /// Truncation size.
    pub n: usize,
    pub omega_samples: usize,
    /// CMV boundary coefficient angle.
    pub boundary_angle: f64,
    pub omega0: f64,
    pub seed: u64,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics { n: 1000, omega_samples: 8, boundary_angle: 0.0, omega0: 0.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        (0..self.points).map(|j| self.min + (self.max - self.min) * j as f64 / (self.points - 1) as f64).collect()
    }

    fn check(&self, what: &str) -> Result<()> {
        if self.points == 0 || !(self.min <= self.max) || !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::InvalidInput(format!("{what} grid needs min ≤ max and at least one point")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassKind {
    Cmv,
    Jacobi,
}

fn bins() -> usize {
    200
}
fn rotation_n() -> usize {
    100_000
}
fn lyapunov_n() -> usize {
    2000
}
fn epsilons() -> Vec<f64> {
    vec![0.02, 0.05]
}
fn min_width() -> f64 {
    0.02
}
fn k_max() -> u32 {
    50
}
fn label_tol() -> f64 {
    5e-3
}
fn k1() -> i64 {
    1
}
fn tmax() -> f64 {
    1.0
}
fn steps() -> usize {
    20
}
fn two_cos() -> TrigPoly {
    TrigPoly::cos(1, 2.0)
}
fn theta() -> f64 {
    0.7
}
fn energy() -> f64 {
    3.0
}
fn bump() -> f64 {
    1e-3
}
fn conj_grid() -> usize {
    4096
}
fn slope_tol() -> f64 {
    DEFAULT_SLOPE_TOL
}
fn window() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskSpec {
    Spectrum {
        #[serde(default = "bins")]
        bins: usize,
    },
    Ids {
        #[serde(default)]
        grid: Option<Grid>,
    },
    Rotation {
        #[serde(default)]
        grid: Option<Grid>,
        #[serde(default = "rotation_n")]
        n_rot: usize,
        #[serde(default)]
        burn_in: usize,
        #[serde(default = "lyapunov_n")]
        lyapunov_n: usize,
    },
    Uh {
        #[serde(default)]
        grid: Option<Grid>,
        #[serde(default)]
        johnson: JohnsonSettings,
    },
    Classify {
        #[serde(default)]
        energies: Option<Vec<f64>>,
        #[serde(default = "epsilons")]
        epsilons: Vec<f64>,
        #[serde(default = "lyapunov_n")]
        n: usize,
    },
    Gaps {
        #[serde(default = "min_width")]
        min_width: f64,
        #[serde(default)]
        density_threshold: Option<f64>,
        #[serde(default = "k_max")]
        k_max: u32,
        #[serde(default = "label_tol")]
        tolerance: f64,
    },
    Open {
        #[serde(default = "k1")]
        k: i64,
        #[serde(default = "tmax")]
        tmax: f64,
        #[serde(default = "steps")]
        steps: usize,
        #[serde(default = "two_cos")]
        perturbation: TrigPoly,
        #[serde(default = "min_width")]
        min_width: f64,
        #[serde(default = "k_max")]
        k_max: u32,
        #[serde(default = "label_tol")]
        tolerance: f64,
    },
    Project {
        class: ClassKind,
        /// Class angle of 𝒮_θ; the Szegő cocycle is taken at z = e^{2iθ}.
        #[serde(default = "theta")]
        theta: f64,
        /// Jacobi class only.
        #[serde(default = "energy")]
        energy: f64,
        #[serde(default = "bump")]
        bump_size: f64,
        #[serde(default = "conj_grid")]
        grid: usize,
    },
    Tongues {
        #[serde(default = "k1")]
        k: i64,
        dmin: f64,
        dmax: f64,
        #[serde(default = "steps")]
        steps: usize,
        #[serde(default)]
        bracket: Option<[f64; 2]>,
        #[serde(default)]
        settings: TongueSettings,
        #[serde(default = "slope_tol")]
        slope_tol: f64,
        #[serde(default = "window")]
        smoothness_window: usize,
    },
}

impl TaskSpec {
    pub fn name(&self) -> &'static str {
        match self {
            TaskSpec::Spectrum { .. } => "spectrum",
            TaskSpec::Ids { .. } => "ids",
            TaskSpec::Rotation { .. } => "rotation",
            TaskSpec::Uh { .. } => "uh",
            TaskSpec::Classify { .. } => "classify",
            TaskSpec::Gaps { .. } => "gaps",
            TaskSpec::Open { .. } => "open",
            TaskSpec::Project { .. } => "project",
            TaskSpec::Tongues { .. } => "tongues",
        }
    }

    /// Defaults for a subcommand run without a config file.
    pub fn default_for(name: &str) -> Option<TaskSpec> {
        Some(match name {
            "spectrum" => TaskSpec::Spectrum { bins: bins() },
            "ids" => TaskSpec::Ids { grid: None },
            "rotation" => {
                TaskSpec::Rotation { grid: None, n_rot: rotation_n(), burn_in: 0, lyapunov_n: lyapunov_n() }
            }
            "uh" => TaskSpec::Uh { grid: None, johnson: JohnsonSettings::default() },
            "classify" => TaskSpec::Classify { energies: None, epsilons: epsilons(), n: lyapunov_n() },
            "gaps" => TaskSpec::Gaps {
                min_width: min_width(),
                density_threshold: None,
                k_max: k_max(),
                tolerance: label_tol(),
            },
            "open" => TaskSpec::Open {
                k: 1,
                tmax: tmax(),
                steps: steps(),
                perturbation: two_cos(),
                min_width: min_width(),
                k_max: k_max(),
                tolerance: label_tol(),
            },
            "project" => TaskSpec::Project {
                class: ClassKind::Jacobi,
                theta: theta(),
                energy: energy(),
                bump_size: bump(),
                grid: conj_grid(),
            },
            "tongues" => TaskSpec::Tongues {
                k: 1,
                dmin: 0.0,
                dmax: 1.0,
                steps: 50,
                bracket: None,
                settings: TongueSettings::default(),
                slope_tol: slope_tol(),
                smoothness_window: window(),
            },
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Output {
    pub dir: String,
}

impl Default for Output {
    fn default() -> Self {
        Output { dir: "gaplab-out".into() }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Fills every optional field and validates the combination.
    pub fn materialize(mut self) -> Result<Self> {
        let base = self.family.base();
        Frequency::new(base.alpha)?;
        if self.numerics.n == 0 || self.numerics.omega_samples == 0 {
            return Err(Error::InvalidInput("numerics.n and numerics.omega_samples must be positive".into()));
        }
        let (lo, hi) = self.family.energy_window();
        let cmv = self.family.is_cmv();
        let fill = |grid: &mut Option<Grid>, points: usize| -> Result<()> {
            let g = grid.get_or_insert(Grid { min: lo, max: hi, points });
            g.check("energy")
        };
        match &mut self.task {
            TaskSpec::Spectrum { bins } => {
                if *bins == 0 {
                    return Err(Error::InvalidInput("bins must be positive".into()));
                }
            }
            TaskSpec::Ids { grid } => fill(grid, 101)?,
            TaskSpec::Rotation { grid, .. } => fill(grid, 41)?,
            TaskSpec::Uh { grid, .. } => fill(grid, 201)?,
            TaskSpec::Classify { energies, .. } => {
                energies.get_or_insert_with(|| vec![if cmv { std::f64::consts::PI } else { 0.0 }]);
            }
            TaskSpec::Gaps { .. } => {}
            TaskSpec::Open { tmax, steps, .. } => {
                if *steps == 0 || !(*tmax > 0.0) {
                    return Err(Error::InvalidInput("open needs tmax > 0 and steps ≥ 1".into()));
                }
            }
            TaskSpec::Project { class, .. } => {
                if (*class == ClassKind::Cmv) != cmv {
                    return Err(Error::Precondition(format!(
                        "project --class {} needs a {} family",
                        if cmv { "jacobi" } else { "cmv" },
                        if cmv { "Jacobi" } else { "CMV" }
                    )));
                }
            }
            TaskSpec::Tongues { dmin, dmax, steps, bracket, .. } => {
                self.family.one_parameter()?;
                if *steps == 0 || !(*dmin < *dmax) {
                    return Err(Error::InvalidInput("tongues need dmin < dmax and steps ≥ 1".into()));
                }
                bracket.get_or_insert(if cmv {
                    [1e-3, TAU - 1e-3]
                } else {
                    let d = dmin.abs().max(dmax.abs());
                    let (alo, ahi) = match &self.family {
                        FamilySpec::Jacobi { a, b, .. } => {
                            let (_, amax) = a.range_on_grid(1024);
                            let (blo, bhi) = b.range_on_grid(1024);
                            (-2.0 * amax + d * blo.min(-bhi), 2.0 * amax + d * bhi.max(-blo))
                        }
                        _ => (-2.0 - 2.0 * d, 2.0 + 2.0 * d),
                    };
                    [alo - 0.1, ahi + 0.1]
                });
            }
        }
        Ok(self)
    }

    pub fn family(&self) -> Result<OperatorFamily> {
        self.family.build()
    }

    pub fn gap_settings(&self) -> GapSettings {
        let (min_width, density_threshold, k_max, tolerance) = match &self.task {
            TaskSpec::Gaps { min_width, density_threshold, k_max, tolerance } => {
                (*min_width, *density_threshold, *k_max, *tolerance)
            }
            TaskSpec::Open { min_width, k_max, tolerance, .. } => (*min_width, None, *k_max, *tolerance),
            _ => (min_width(), None, k_max(), label_tol()),
        };
        GapSettings {
            n: self.numerics.n,
            omega_samples: self.numerics.omega_samples,
            min_width,
            density_threshold,
            k_max,
            tolerance,
            boundary_angle: self.numerics.boundary_angle,
            omega0: self.numerics.omega0,
        }
    }

    /// SHA-256 of the canonical JSON of family, numerics and task.
    pub fn hash(&self) -> String {
        #[derive(Serialize)]
        struct Hashed<'a> {
            family: &'a FamilySpec,
            numerics: &'a Numerics,
            task: &'a TaskSpec,
        }
        let bytes = serde_json::to_vec(&Hashed { family: &self.family, numerics: &self.numerics, task: &self.task })
            .expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}
