//! Resonance tongues of one-parameter families: boundary tracing by
//! rotation-number bisection, widths, transversality slopes and the
//! Fourier-coefficient opening criterion for CMV couplings.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cocycle::{classify_regime, rotation_number, Regime};
use crate::dynamics::{frac, BaseDynamics, TrigPoly};
use crate::error::{Error, Result};
use crate::operators::{
    ids, jacobi_cocycle_map, CmvFamily, JacobiFamily, OperatorFamily, SpectrumApprox, SzegoCocycle,
};
use crate::par;

/// b_δ = δ·b with a fixed (Jacobi), or v_δ = λe^{iδh} (CMV).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "coupling", rename_all = "snake_case", deny_unknown_fields)]
pub enum Coupling {
    Jacobi { a: TrigPoly, b: TrigPoly },
    Cmv { lambda: f64, h: TrigPoly },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Family1P {
    #[serde(flatten)]
    pub coupling: Coupling,
    pub base: BaseDynamics,
}

impl Family1P {
    /// Almost Mathieu coupling: a ≡ 1, b_δ = 2δ cos 2πω.
    pub fn almost_mathieu(base: BaseDynamics) -> Self {
        Family1P { coupling: Coupling::Jacobi { a: TrigPoly::constant(1.0), b: TrigPoly::cos(1, 2.0) }, base }
    }

    pub fn cmv(lambda: f64, h: TrigPoly, base: BaseDynamics) -> Self {
        Family1P { coupling: Coupling::Cmv { lambda, h }, base }
    }

    pub fn at(&self, delta: f64) -> Result<OperatorFamily> {
        match &self.coupling {
            Coupling::Jacobi { a, b } => {
                JacobiFamily::new(a.clone(), b.scale(delta), self.base).map(OperatorFamily::Jacobi)
            }
            Coupling::Cmv { lambda, h } => {
                CmvFamily::polar(*lambda, h.scale(delta), self.base).map(OperatorFamily::Cmv)
            }
        }
    }

    fn is_cmv(&self) -> bool {
        matches!(self.coupling, Coupling::Cmv { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TongueSettings {
    /// Bisection stops once the bracket is shorter than this.
    pub tol: f64,
    /// Dead zone around frac(kα) counted as inside the tongue.
    pub rho_tol: f64,
    pub n_rot: usize,
    /// Longest run, as a multiple of `n_rot`, used near the tongue edges.
    pub max_refine: usize,
    pub burn_in: usize,
    /// Truncation size for the eigenvalue-counting fallback.
    pub fallback_n: usize,
    pub fallback_samples: usize,
    pub regime_n: usize,
    pub regime_eps: Vec<f64>,
}

impl Default for TongueSettings {
    fn default() -> Self {
        TongueSettings {
            tol: 1e-6,
            rho_tol: 2e-7,
            n_rot: 200_000,
            max_refine: 16,
            burn_in: 0,
            fallback_n: 2000,
            fallback_samples: 4,
            regime_n: 2000,
            regime_eps: vec![0.02, 0.05],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TongueCurve {
    pub k: i64,
    /// frac(kα).
    pub label: f64,
    pub delta_grid: Vec<f64>,
    pub e_minus: Vec<f64>,
    pub e_plus: Vec<f64>,
    pub widths: Vec<f64>,
    pub regimes: Vec<Regime>,
    /// Evaluations that fell back to eigenvalue counting, per δ.
    pub fallbacks: Vec<usize>,
    pub tol: f64,
}

impl TongueCurve {
    /// "delta,E_minus,E_plus,width,regime" rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("delta,E_minus,E_plus,width,regime\n");
        for j in 0..self.delta_grid.len() {
            s.push_str(&format!(
                "{},{},{},{},{:?}\n",
                self.delta_grid[j], self.e_minus[j], self.e_plus[j], self.widths[j], self.regimes[j]
            ));
        }
        s
    }
}

/// Position of a spectral parameter relative to the tongue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Left,
    Inside,
    Right,
}

struct Column<'a> {
    family: OperatorFamily,
    label: f64,
    settings: &'a TongueSettings,
    fallback: std::cell::OnceCell<Result<SpectrumApprox>>,
    fallbacks: std::cell::Cell<usize>,
}

impl Column<'_> {
    fn estimate(&self, e: f64, n: usize) -> Result<crate::cocycle::RotationEstimate> {
        let w0 = self.family.base().point(0.0);
        let b = self.settings.burn_in;
        match &self.family {
            OperatorFamily::Jacobi(f) => rotation_number(&jacobi_cocycle_map(f, e)?, &w0, n, b),
            OperatorFamily::Cmv(f) => rotation_number(&SzegoCocycle::at_angle(f, e), &w0, n, b),
        }
    }

    fn oriented(&self, two_rho: f64) -> f64 {
        if self.family.is_cmv() {
            two_rho - self.label
        } else {
            self.label - two_rho
        }
    }

    /// 2ρ from eigenvalue counting, oriented.
    fn counted(&self, e: f64) -> Result<f64> {
        self.fallbacks.set(self.fallbacks.get() + 1);
        let s = self.settings;
        let w0 = self.family.base().point(0.0);
        let spec = self
            .fallback
            .get_or_init(|| self.family.spectrum(&w0, s.fallback_n, s.fallback_samples, 0.0))
            .as_ref()
            .map_err(Clone::clone)?;
        let k = ids(spec, e);
        Ok(self.oriented(if self.family.is_cmv() { k } else { 1.0 - k }))
    }

    /// Oriented 2ρ − frac(kα) and its error estimate. The run length grows
    /// fourfold while the sign is ambiguous, comparing consecutive lengths.
    fn signed(&self, e: f64) -> Result<(f64, f64)> {
        let s = self.settings;
        let first = self.estimate(e, (s.n_rot / 4).max(1000))?;
        let main = self.estimate(e, s.n_rot)?;
        if !main.is_converged() {
            let tol = s.rho_tol.max(2.0 / s.fallback_n as f64);
            return Ok((self.counted(e)?, tol));
        }
        let mut d = self.oriented(2.0 * main.lifted);
        let mut err = (d - self.oriented(2.0 * first.lifted)).abs();
        let mut n = s.n_rot;
        while d.abs() <= 3.0 * err + s.rho_tol && err > 0.5 * s.rho_tol && n < s.n_rot * s.max_refine {
            n *= 4;
            let next = self.oriented(2.0 * self.estimate(e, n)?.lifted);
            err = (next - d).abs();
            d = next;
        }
        Ok((d, s.rho_tol.max(err)))
    }

    fn side(&self, e: f64) -> Result<Side> {
        let (d, tol) = self.signed(e)?;
        Ok(if d < -tol {
            Side::Left
        } else if d > tol {
            Side::Right
        } else {
            Side::Inside
        })
    }

    /// Boundary between `is_low` (at lo) and its negation (at hi).
    fn bisect(&self, mut lo: f64, mut hi: f64, is_low: impl Fn(Side) -> bool) -> Result<f64> {
        while hi - lo >= self.settings.tol {
            let mid = 0.5 * (lo + hi);
            if is_low(self.side(mid)?) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

impl OperatorFamily {
    fn is_cmv(&self) -> bool {
        matches!(self, OperatorFamily::Cmv(_))
    }
}

struct ColumnResult {
    e_minus: f64,
    e_plus: f64,
    regime: Regime,
    fallbacks: usize,
}

fn trace_column(f: &Family1P, label: f64, delta: f64, bracket: (f64, f64), settings: &TongueSettings) -> Result<ColumnResult> {
    let col = Column {
        family: f.at(delta)?,
        label,
        settings,
        fallback: std::cell::OnceCell::new(),
        fallbacks: std::cell::Cell::new(0),
    };
    let (lo, hi) = bracket;
    // five-point monotonicity probe
    let mut prev = f64::NEG_INFINITY;
    let mut sides = Vec::with_capacity(5);
    for j in 0..5 {
        let e = lo + (hi - lo) * j as f64 / 4.0;
        let (d, tol) = col.signed(e)?;
        if d < prev - 2.0 * tol - 1e-6 {
            return Err(Error::Precondition(format!(
                "rotation number is not monotone across the bracket at δ = {delta} (E = {e})"
            )));
        }
        prev = prev.max(d);
        sides.push(if d < -tol { Side::Left } else if d > tol { Side::Right } else { Side::Inside });
    }
    if sides[0] != Side::Left || sides[4] != Side::Right {
        return Err(Error::Precondition(format!(
            "bracket [{lo}, {hi}] does not straddle the tongue at δ = {delta}"
        )));
    }
    let mut e_minus = col.bisect(lo, hi, |s| s == Side::Left)?;
    let mut e_plus = col.bisect(lo, hi, |s| s != Side::Right)?;
    if e_minus > e_plus {
        let m = 0.5 * (e_minus + e_plus);
        e_minus = m;
        e_plus = m;
    }
    // the interior of an open tongue is a spectral gap, so the regime is read at the edges
    let regime_at = |e: f64| -> Result<Regime> {
        Ok(match &col.family {
            OperatorFamily::Jacobi(fam) => {
                classify_regime(&jacobi_cocycle_map(fam, e)?, &settings.regime_eps, settings.regime_n)
            }
            OperatorFamily::Cmv(fam) => {
                classify_regime(&SzegoCocycle::at_angle(fam, e), &settings.regime_eps, settings.regime_n)
            }
        }
        .regime)
    };
    let rank = |r: Regime| match r {
        Regime::Subcritical => 0,
        Regime::Critical => 1,
        Regime::Supercritical => 2,
    };
    let (r1, r2) = (regime_at(e_minus)?, regime_at(e_plus)?);
    let regime = if rank(r1) >= rank(r2) { r1 } else { r2 };
    Ok(ColumnResult { e_minus, e_plus, regime, fallbacks: col.fallbacks.get() })
}

/// Traces E_k^±(δ): the edges of {E : 2ρ(E) = frac(kα)} inside `bracket`
/// (energies for Jacobi, angles in (0, 2π) for CMV).
pub fn trace_tongue(
    f: &Family1P,
    k: i64,
    delta_grid: &[f64],
    bracket: (f64, f64),
    settings: &TongueSettings,
) -> Result<TongueCurve> {
    if delta_grid.is_empty() || delta_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidInput("delta grid must be non-empty and strictly increasing".into()));
    }
    if !(bracket.0 < bracket.1) {
        return Err(Error::InvalidInput(format!("empty bracket {bracket:?}")));
    }
    if !(settings.tol > 0.0 && settings.rho_tol >= 0.0) {
        return Err(Error::InvalidInput("tolerances must be positive".into()));
    }
    if f.is_cmv() && k == 0 {
        return Err(Error::InvalidInput("the k = 0 CMV tongue wraps through z = 1".into()));
    }
    let label = frac(k as f64 * f.base.frequency().value());
    let cols = par::map(delta_grid.len(), |j| {
        trace_column(f, label, delta_grid[j], bracket, settings)
            .map_err(|e| match e {
                Error::Inconclusive(m) => Error::Inconclusive(format!("δ = {}: {m}", delta_grid[j])),
                other => other,
            })
    });
    let mut curve = TongueCurve {
        k,
        label,
        delta_grid: delta_grid.to_vec(),
        e_minus: Vec::new(),
        e_plus: Vec::new(),
        widths: Vec::new(),
        regimes: Vec::new(),
        fallbacks: Vec::new(),
        tol: settings.tol,
    };
    for c in cols {
        let c = c?;
        curve.e_minus.push(c.e_minus);
        curve.e_plus.push(c.e_plus);
        curve.widths.push(c.e_plus - c.e_minus);
        curve.regimes.push(c.regime);
        curve.fallbacks.push(c.fallbacks);
    }
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DifferenceScheme {
    Central,
    /// At the left end of the grid.
    Forward,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeReport {
    pub k: i64,
    pub delta0: f64,
    pub step: f64,
    pub scheme: DifferenceScheme,
    pub slope_plus: f64,
    pub slope_minus: f64,
    pub slope_tol: f64,
    pub transversal: bool,
}

pub const DEFAULT_SLOPE_TOL: f64 = 1e-3;

fn grid_index(grid: &[f64], x: f64) -> Option<usize> {
    grid.iter().position(|g| (g - x).abs() <= 1e-12 * (1.0 + x.abs()))
}

/// Finite-difference slopes of E_k^± at δ₀, read off the traced grid.
pub fn transversality_slopes(curve: &TongueCurve, delta0: f64, step: f64, slope_tol: f64) -> Result<SlopeReport> {
    if !(step > 0.0) {
        return Err(Error::InvalidInput("step must be positive".into()));
    }
    if 2.0 * curve.tol / step > slope_tol {
        return Err(Error::Precondition(format!(
            "bisection tol {} cannot resolve slopes to {slope_tol} at step {step}; trace with a smaller tol",
            curve.tol
        )));
    }
    let g = &curve.delta_grid;
    let at = |x: f64| {
        grid_index(g, x).ok_or_else(|| {
            Error::Precondition(format!("δ = {x} is not on the traced grid; re-trace with it included"))
        })
    };
    let i0 = at(delta0)?;
    let (lo, hi, scheme) = if i0 == 0 {
        (i0, at(delta0 + step)?, DifferenceScheme::Forward)
    } else {
        (at(delta0 - step)?, at(delta0 + step)?, DifferenceScheme::Central)
    };
    let span = g[hi] - g[lo];
    let slope_plus = (curve.e_plus[hi] - curve.e_plus[lo]) / span;
    let slope_minus = (curve.e_minus[hi] - curve.e_minus[lo]) / span;
    Ok(SlopeReport {
        k: curve.k,
        delta0,
        step,
        scheme,
        slope_plus,
        slope_minus,
        slope_tol,
        transversal: (slope_plus - slope_minus).abs() > slope_tol,
    })
}

/// ĥ_k and whether it predicts a linear opening of the k-th tongue.
pub fn opening_criterion_cmv(h: &TrigPoly, k: i64) -> (Complex64, bool) {
    let c = h.coefficient(k);
    (c, c.norm() > 1e-12)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothnessReport {
    pub window: usize,
    pub threshold: f64,
    pub max_residual: f64,
    /// (first index, residual) of windows whose cubic fit misses by more than the threshold.
    pub flagged: Vec<(usize, f64)>,
    /// Windows skipped because some point is not Subcritical.
    pub skipped: usize,
}

fn cubic_fit_residual(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let c = x.iter().sum::<f64>() / n as f64;
    let s = x.iter().map(|v| (v - c).abs()).fold(0.0, f64::max).max(1e-300);
    let t: Vec<f64> = x.iter().map(|v| (v - c) / s).collect();
    let mut m = [[0.0; 5]; 4];
    for (ti, yi) in t.iter().zip(y) {
        let p = [1.0, *ti, ti * ti, ti * ti * ti];
        for a in 0..4 {
            for b in 0..4 {
                m[a][b] += p[a] * p[b];
            }
            m[a][4] += p[a] * yi;
        }
    }
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap_or(col);
        m.swap(col, piv);
        if m[col][col].abs() < 1e-300 {
            return 0.0;
        }
        for r in 0..4 {
            if r != col {
                let f = m[r][col] / m[col][col];
                for q in col..5 {
                    m[r][q] -= f * m[col][q];
                }
            }
        }
    }
    let coef: Vec<f64> = (0..4).map(|a| m[a][4] / m[a][a]).collect();
    t.iter()
        .zip(y)
        .map(|(ti, yi)| (coef[0] + coef[1] * ti + coef[2] * ti * ti + coef[3] * ti * ti * ti - yi).abs())
        .fold(0.0, f64::max)
}

/// Cubic fits of E_k^± on sliding windows of 2·window+1 points.
pub fn boundary_smoothness_probe(curve: &TongueCurve, window: usize) -> Result<SmoothnessReport> {
    let len = 2 * window + 1;
    if window < 2 {
        return Err(Error::InvalidInput("window must be at least 2 (five points per cubic fit)".into()));
    }
    if curve.delta_grid.len() < len {
        return Err(Error::InvalidInput(format!("curve has {} points, need {len}", curve.delta_grid.len())));
    }
    let threshold = 10.0 * curve.tol;
    let mut report = SmoothnessReport { window, threshold, max_residual: 0.0, flagged: Vec::new(), skipped: 0 };
    for start in 0..=curve.delta_grid.len() - len {
        let r = start..start + len;
        if curve.regimes[r.clone()].iter().any(|g| *g != Regime::Subcritical) {
            report.skipped += 1;
            continue;
        }
        let x = &curve.delta_grid[r.clone()];
        let res = cubic_fit_residual(x, &curve.e_minus[r.clone()]).max(cubic_fit_residual(x, &curve.e_plus[r]));
        report.max_residual = report.max_residual.max(res);
        if res > threshold {
            report.flagged.push((start, res));
        }
    }
    Ok(report)
}
