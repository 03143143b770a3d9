//! Jacobi and CMV operator families, their transfer cocycles, truncated
//! spectra and the integrated density of states.

mod cmv;
mod johnson;
mod tridiag;

pub use cmv::{blaschke_phase, cmv_dense, cmv_eigenangles, unit_angle};
pub use johnson::{johnson_cross_check, window_count, JohnsonReport, JohnsonRow, JohnsonSettings};
pub use tridiag::{sturm_count, tridiagonal_eigenvalues};

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cocycle::{AnalyticCocycle, CocycleMap, Mat2, Mat2C, Mat2H};
use crate::dynamics::{BaseDynamics, TorusPoint, TrigPoly};
use crate::error::{Error, Result};
use crate::par;

const VALIDATION_GRID: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobiFamily {
    pub a: TrigPoly,
    pub b: TrigPoly,
    pub base: BaseDynamics,
}

impl JacobiFamily {
    pub fn new(a: TrigPoly, b: TrigPoly, base: BaseDynamics) -> Result<Self> {
        let (lo, _) = a.range_on_grid(VALIDATION_GRID);
        if !(lo > 0.0) {
            return Err(Error::InvalidInput(format!("off-diagonal sampling function reaches {lo} ≤ 0")));
        }
        Ok(JacobiFamily { a, b, base })
    }

    /// a ≡ 1, b ≡ 0.
    pub fn free(base: BaseDynamics) -> Self {
        JacobiFamily { a: TrigPoly::constant(1.0), b: TrigPoly::zero(), base }
    }

    /// Almost Mathieu: a ≡ 1, b = 2λ cos 2πω.
    pub fn almost_mathieu(lambda: f64, base: BaseDynamics) -> Self {
        JacobiFamily { a: TrigPoly::constant(1.0), b: TrigPoly::cos(1, 2.0 * lambda), base }
    }

    pub fn with_b(&self, b: TrigPoly) -> Self {
        JacobiFamily { a: self.a.clone(), b, base: self.base }
    }

    /// The N×N truncation along the orbit of ω: (diagonal, off-diagonal).
    pub fn truncation(&self, omega: &TorusPoint, n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut d = Vec::with_capacity(n);
        let mut e = Vec::with_capacity(n.saturating_sub(1));
        let mut x = *omega;
        for k in 0..n {
            d.push(self.b.eval_at(&x));
            if k + 1 < n {
                e.push(self.a.eval_at(&x));
            }
            x = self.base.advance(&x);
        }
        (d, e)
    }
}

/// How the Verblunsky sampling function is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Verblunsky {
    /// v = λ e^{ih}.
    Polar { lambda: f64, h: TrigPoly },
    /// v = (re + i·im) e^{i·phase}.
    Cartesian {
        re: TrigPoly,
        im: TrigPoly,
        #[serde(default = "TrigPoly::zero")]
        phase: TrigPoly,
    },
}

impl Verblunsky {
    #[inline]
    pub fn eval(&self, omega: f64) -> Complex64 {
        match self {
            Verblunsky::Polar { lambda, h } => Complex64::from_polar(*lambda, h.eval(omega)),
            Verblunsky::Cartesian { re, im, phase } => {
                let v = Complex64::new(re.eval(omega), im.eval(omega));
                if phase.is_zero() {
                    v
                } else {
                    v * Complex64::cis(phase.eval(omega))
                }
            }
        }
    }

    /// (v(ω+iε), v̄(ω+iε)) where v̄ means the holomorphic extension of the conjugate.
    pub fn eval_complex(&self, omega: f64, eps: f64) -> (Complex64, Complex64) {
        let i = Complex64::i();
        match self {
            Verblunsky::Polar { lambda, h } => {
                let hz = h.eval_complex(omega, eps);
                ((i * hz).exp() * lambda, (-i * hz).exp() * lambda)
            }
            Verblunsky::Cartesian { re, im, phase } => {
                let (r, m, p) =
                    (re.eval_complex(omega, eps), im.eval_complex(omega, eps), phase.eval_complex(omega, eps));
                ((r + i * m) * (i * p).exp(), (r - i * m) * (-i * p).exp())
            }
        }
    }

    /// v · e^{i·t·p}.
    pub fn modulated(&self, t: f64, p: &TrigPoly) -> Self {
        match self {
            Verblunsky::Polar { lambda, h } => Verblunsky::Polar { lambda: *lambda, h: h.add(&p.scale(t)) },
            Verblunsky::Cartesian { re, im, phase } => Verblunsky::Cartesian {
                re: re.clone(),
                im: im.clone(),
                phase: phase.add(&p.scale(t)),
            },
        }
    }

    /// True when v vanishes identically.
    pub fn is_zero(&self) -> bool {
        match self {
            Verblunsky::Polar { lambda, .. } => *lambda == 0.0,
            Verblunsky::Cartesian { re, im, .. } => re.is_zero() && im.is_zero(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmvFamily {
    pub v: Verblunsky,
    pub base: BaseDynamics,
}

impl CmvFamily {
    pub fn new(v: Verblunsky, base: BaseDynamics) -> Result<Self> {
        if let Verblunsky::Polar { lambda, .. } = &v {
            if !(*lambda >= 0.0 && *lambda < 1.0) {
                return Err(Error::InvalidInput(format!("λ = {lambda} outside [0,1)")));
            }
        }
        let sup = (0..VALIDATION_GRID)
            .map(|j| v.eval(j as f64 / VALIDATION_GRID as f64).norm())
            .fold(0.0, f64::max);
        if !(sup < 1.0) {
            return Err(Error::InvalidInput(format!("sup |v| = {sup} is not below 1")));
        }
        Ok(CmvFamily { v, base })
    }

    pub fn polar(lambda: f64, h: TrigPoly, base: BaseDynamics) -> Result<Self> {
        Self::new(Verblunsky::Polar { lambda, h }, base)
    }

    pub fn free(base: BaseDynamics) -> Self {
        CmvFamily { v: Verblunsky::Polar { lambda: 0.0, h: TrigPoly::zero() }, base }
    }

    /// α_j = v(T^jω), j < n.
    pub fn coefficients(&self, omega: &TorusPoint, n: usize) -> Vec<Complex64> {
        let mut x = *omega;
        (0..n)
            .map(|_| {
                let v = self.v.eval(x.x());
                x = self.base.advance(&x);
                v
            })
            .collect()
    }
}

/// Either kind of operator family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "operator", rename_all = "snake_case")]
pub enum OperatorFamily {
    Jacobi(JacobiFamily),
    Cmv(CmvFamily),
}

impl OperatorFamily {
    /// Re-runs the constructor checks (deserialization skips them).
    pub fn validated(self) -> Result<Self> {
        match self {
            OperatorFamily::Jacobi(f) => JacobiFamily::new(f.a, f.b, f.base).map(OperatorFamily::Jacobi),
            OperatorFamily::Cmv(f) => CmvFamily::new(f.v, f.base).map(OperatorFamily::Cmv),
        }
    }

    pub fn base(&self) -> &BaseDynamics {
        match self {
            OperatorFamily::Jacobi(f) => &f.base,
            OperatorFamily::Cmv(f) => &f.base,
        }
    }

    pub fn kind(&self) -> SpectrumKind {
        match self {
            OperatorFamily::Jacobi(_) => SpectrumKind::Jacobi,
            OperatorFamily::Cmv(_) => SpectrumKind::Cmv,
        }
    }

    /// b + t·p for Jacobi, v·e^{itp} for CMV.
    pub fn perturbed(&self, t: f64, p: &TrigPoly) -> Result<Self> {
        match self {
            OperatorFamily::Jacobi(f) => Ok(OperatorFamily::Jacobi(f.with_b(f.b.add(&p.scale(t))))),
            OperatorFamily::Cmv(f) => CmvFamily::new(f.v.modulated(t, p), f.base).map(OperatorFamily::Cmv),
        }
    }

    /// True for the CMV family with v ≡ 0.
    pub fn is_free_cmv(&self) -> bool {
        matches!(self, OperatorFamily::Cmv(f) if f.v.is_zero())
    }

    /// Pooled truncated spectrum; `boundary_angle` only affects CMV.
    pub fn spectrum(&self, omega0: &TorusPoint, n: usize, samples: usize, boundary_angle: f64) -> Result<SpectrumApprox> {
        match self {
            OperatorFamily::Jacobi(f) => truncated_jacobi_spectrum(f, omega0, n, samples),
            OperatorFamily::Cmv(f) => truncated_cmv_spectrum(f, omega0, n, samples, boundary_angle),
        }
    }
}

/// (1/a)[[E − b, −1], [a², 0]].
#[derive(Debug, Clone)]
pub struct JacobiCocycle {
    pub family: JacobiFamily,
    pub energy: f64,
}

impl CocycleMap for JacobiCocycle {
    type Fiber = Mat2;
    fn base(&self) -> &BaseDynamics {
        &self.family.base
    }
    #[inline]
    fn value(&self, omega: &TorusPoint) -> Mat2 {
        let a = self.family.a.eval_at(omega);
        let b = self.family.b.eval_at(omega);
        Mat2::raw((self.energy - b) / a, -1.0 / a, a, 0.0)
    }
}

impl AnalyticCocycle for JacobiCocycle {
    fn value_complex(&self, omega: f64, eps: f64) -> Mat2C {
        let a = self.family.a.eval_complex(omega, eps);
        let b = self.family.b.eval_complex(omega, eps);
        let z = Complex64::new(0.0, 0.0);
        Mat2C([(self.energy - b) / a, -a.inv(), a, z])
    }
}

pub fn jacobi_cocycle_map(f: &JacobiFamily, energy: f64) -> Result<JacobiCocycle> {
    let (lo, _) = f.a.range_on_grid(VALIDATION_GRID);
    if !(lo > 0.0) {
        return Err(Error::InvalidInput(format!("a(ω) reaches {lo} ≤ 0")));
    }
    if !energy.is_finite() {
        return Err(Error::InvalidInput("energy must be finite".into()));
    }
    Ok(JacobiCocycle { family: f.clone(), energy })
}

/// (z^{−1/2}/ρ)[[z, −v̄], [−v z, 1]] with z = e^{iθ} and z^{1/2} = e^{iθ/2}.
#[derive(Debug, Clone)]
pub struct SzegoCocycle {
    pub family: CmvFamily,
    pub theta: f64,
    half: Complex64,
}

impl SzegoCocycle {
    /// Spectral parameter e^{iθ}; the square-root branch follows θ continuously.
    pub fn at_angle(family: &CmvFamily, theta: f64) -> Self {
        SzegoCocycle { family: family.clone(), theta, half: Complex64::cis(theta / 2.0) }
    }
}

impl CocycleMap for SzegoCocycle {
    type Fiber = Mat2H;
    fn base(&self) -> &BaseDynamics {
        &self.family.base
    }
    #[inline]
    fn value(&self, omega: &TorusPoint) -> Mat2H {
        let v = self.family.v.eval(omega.x());
        let r = 1.0 / (1.0 - v.norm_sqr()).sqrt();
        Mat2H::raw(self.half * r, -v.conj() * self.half.conj() * r)
    }
}

impl AnalyticCocycle for SzegoCocycle {
    fn value_complex(&self, omega: f64, eps: f64) -> Mat2C {
        let (v, vs) = self.family.v.eval_complex(omega, eps);
        let r = (Complex64::new(1.0, 0.0) - v * vs).sqrt().inv();
        let h = self.half;
        let hc = h.conj();
        Mat2C([h * r, -vs * hc * r, -v * h * r, hc * r])
    }
}

/// Szegő cocycle at a point z of the unit circle (principal angle in [0, 2π)).
pub fn szego_cocycle_map(f: &CmvFamily, z: Complex64) -> Result<SzegoCocycle> {
    if (z.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!("|z| = {} is not 1", z.norm())));
    }
    Ok(SzegoCocycle::at_angle(f, unit_angle(z)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Boundary {
    /// Plain cut-off of the Jacobi matrix.
    Dirichlet,
    /// CMV truncation with the coefficient at the cut set to e^{i·angle}.
    DecoupledUnitary { angle: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumKind {
    Jacobi,
    Cmv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumApprox {
    pub kind: SpectrumKind,
    pub eigenvalues: Vec<f64>,
    pub n: usize,
    pub omega_samples: usize,
    pub boundary: Boundary,
}

/// Starting phase of truncation block `s`: T^{sN}ω₀.
fn block_phase(base: &BaseDynamics, omega0: &TorusPoint, s: usize, n: usize) -> Result<TorusPoint> {
    base.iterate(omega0, (s * n) as i64)
}

pub fn truncated_jacobi_spectrum(
    f: &JacobiFamily,
    omega0: &TorusPoint,
    n: usize,
    omega_samples: usize,
) -> Result<SpectrumApprox> {
    if n < 16 {
        return Err(Error::InvalidInput(format!("truncation size must be ≥ 16, got {n}")));
    }
    if omega_samples == 0 {
        return Err(Error::InvalidInput("omega_samples must be positive".into()));
    }
    let starts: Vec<TorusPoint> =
        (0..omega_samples).map(|s| block_phase(&f.base, omega0, s, n)).collect::<Result<_>>()?;
    let parts = par::map(omega_samples, |s| {
        let (d, e) = f.truncation(&starts[s], n);
        tridiagonal_eigenvalues(&d, &e)
            .map_err(|err| Error::Computational(format!("phase {s} (ω = {:?}): {err}", starts[s].coords())))
    });
    let mut eig = Vec::with_capacity(n * omega_samples);
    for p in parts {
        eig.extend(p?);
    }
    eig.sort_by(f64::total_cmp);
    Ok(SpectrumApprox { kind: SpectrumKind::Jacobi, eigenvalues: eig, n, omega_samples, boundary: Boundary::Dirichlet })
}

pub fn truncated_cmv_spectrum(
    f: &CmvFamily,
    omega0: &TorusPoint,
    n: usize,
    omega_samples: usize,
    boundary_angle: f64,
) -> Result<SpectrumApprox> {
    if n < 16 || n % 2 != 0 {
        return Err(Error::InvalidInput(format!("CMV truncation size must be even and ≥ 16, got {n}")));
    }
    if omega_samples == 0 {
        return Err(Error::InvalidInput("omega_samples must be positive".into()));
    }
    let beta = Complex64::cis(boundary_angle);
    let starts: Vec<TorusPoint> =
        (0..omega_samples).map(|s| block_phase(&f.base, omega0, s, n)).collect::<Result<_>>()?;
    let parts = par::map(omega_samples, |s| {
        let alphas = f.coefficients(&starts[s], n - 1);
        cmv_eigenangles(&alphas, beta)
            .map_err(|err| Error::Computational(format!("phase {s} (ω = {:?}): {err}", starts[s].coords())))
    });
    let mut eig = Vec::with_capacity(n * omega_samples);
    for p in parts {
        eig.extend(p?);
    }
    eig.sort_by(f64::total_cmp);
    Ok(SpectrumApprox {
        kind: SpectrumKind::Cmv,
        eigenvalues: eig,
        n,
        omega_samples,
        boundary: Boundary::DecoupledUnitary { angle: boundary_angle },
    })
}

/// Fraction of pooled eigenvalues (or angles measured from 0) ≤ x.
pub fn ids(spec: &SpectrumApprox, x: f64) -> f64 {
    if spec.eigenvalues.is_empty() {
        return 0.0;
    }
    spec.eigenvalues.partition_point(|&e| e <= x) as f64 / spec.eigenvalues.len() as f64
}

/// Counts of pooled eigenvalues in `bins` equal bins over the convex hull
/// (Jacobi) or [0, 2π) (CMV); returns (bin centre, count).
pub fn histogram(spec: &SpectrumApprox, bins: usize) -> Vec<(f64, usize)> {
    let bins = bins.max(1);
    let (lo, hi) = match spec.kind {
        SpectrumKind::Cmv => (0.0, TAU),
        SpectrumKind::Jacobi => match (spec.eigenvalues.first(), spec.eigenvalues.last()) {
            (Some(&a), Some(&b)) if b > a => (a, b),
            (Some(&a), _) => (a - 0.5, a + 0.5),
            _ => (0.0, 1.0),
        },
    };
    let w = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &e in &spec.eigenvalues {
        let j = (((e - lo) / w) as usize).min(bins - 1);
        counts[j] += 1;
    }
    counts.into_iter().enumerate().map(|(j, c)| (lo + (j as f64 + 0.5) * w, c)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdsTable {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl IdsTable {
    pub fn from_spectrum(spec: &SpectrumApprox, grid: Vec<f64>) -> Self {
        let values = grid.iter().map(|&x| ids(spec, x)).collect();
        IdsTable { grid, values }
    }

    /// `points` equally spaced evaluation points spanning the hull (Jacobi)
    /// or [0, 2π] (CMV).
    pub fn uniform(spec: &SpectrumApprox, points: usize) -> Self {
        let points = points.max(2);
        let (lo, hi) = match spec.kind {
            SpectrumKind::Cmv => (0.0, TAU),
            SpectrumKind::Jacobi => (
                spec.eigenvalues.first().copied().unwrap_or(0.0),
                spec.eigenvalues.last().copied().unwrap_or(0.0),
            ),
        };
        let grid = (0..points).map(|j| lo + (hi - lo) * j as f64 / (points - 1) as f64).collect();
        Self::from_spectrum(spec, grid)
    }

    /// Linear interpolation, clamped to the end values.
    pub fn value_at(&self, x: f64) -> f64 {
        let g = &self.grid;
        if g.is_empty() {
            return 0.0;
        }
        if x <= g[0] {
            return self.values[0];
        }
        if x >= g[g.len() - 1] {
            return self.values[g.len() - 1];
        }
        let j = g.partition_point(|&v| v <= x);
        let (x0, x1) = (g[j - 1], g[j]);
        let t = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
        self.values[j - 1] * (1.0 - t) + self.values[j] * t
    }
}
