use serde::Serialize;

use super::{line_distance, CocycleMap, Fiber, Mat2};
use crate::dynamics::TorusPoint;
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "UH")]
    Uh,
    #[serde(rename = "NotUH")]
    NotUh,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct UhLevel {
    pub n: usize,
    /// min over the grid of (1/n) log‖Aⁿ(ω)‖.
    pub min_log_rate: f64,
    /// Fraction of grid points whose cone maps strictly inside the target cone.
    pub cone_fraction: f64,
    /// min over the grid of (1/n) log of the least expansion on the cone.
    pub min_expansion_rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct UhEvidence {
    pub levels: Vec<UhLevel>,
    /// Grid phase (first coordinate) with the slowest growth at the last level.
    pub slowest_phase: Option<f64>,
    /// log‖Aⁿ‖ at the slowest phase for the last two levels.
    pub slowest_log_norms: Vec<f64>,
    /// Whether some grid phase with bounded growth had an elliptic iterate (|tr| < 2).
    pub elliptic_seen: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct UhCertificate {
    pub verdict: Verdict,
    pub n_star: usize,
    pub growth_rate: f64,
    pub min_norm_ratio: f64,
    pub grid: usize,
    pub n_max: usize,
    pub evidence: UhEvidence,
}

/// Required expansion of the cone over n* steps.
const MIN_EXPANSION: f64 = 2.0;
/// log‖Aⁿ‖ below this at two consecutive levels counts as bounded growth.
const BOUNDED_LOG_NORM: f64 = 12.0;

struct PointData {
    log_norm: f64,
    cone_ok: bool,
    expansion_log: f64,
    trace_abs_log: f64,
}

fn eval_point<C: CocycleMap>(c: &C, omega: &TorusPoint, n: usize) -> PointData {
    let base = c.base();
    let mut x = *omega;
    for _ in 0..n {
        x = base.retreat(&x);
    }
    // three consecutive blocks: Aⁿ(T⁻ⁿω), Aⁿ(ω), Aⁿ(Tⁿω)
    let mut mats = [Mat2::IDENTITY; 3];
    let mut logs = [0.0f64; 3];
    for k in 0..3 {
        let mut m = Mat2::IDENTITY;
        let mut ls = 0.0;
        for _ in 0..n {
            m = c.value(&x).to_real() * m;
            let nr = m.norm();
            if nr > 1e100 {
                m = m.scale(1.0 / nr);
                ls += nr.ln();
            }
            x = base.advance(&x);
        }
        mats[k] = m;
        logs[k] = ls;
    }
    let [m0, m1, m2] = mats;
    let u = m0.top_left_direction();
    let s = m1.bottom_right_direction();
    let ux = m1.top_left_direction();
    let sx = m2.bottom_right_direction();
    let beta = 0.5 * line_distance(u, s);
    let beta_x = 0.5 * line_distance(ux, sx);
    let image = |a: f64| {
        let w = m1.apply([a.cos(), a.sin()]);
        w[1].atan2(w[0])
    };
    let stretch = |a: f64| {
        let w = m1.apply([a.cos(), a.sin()]);
        w[0].hypot(w[1])
    };
    let probes = [u - beta, u, u + beta];
    let imgs = probes.map(image);
    let between = (line_distance(imgs[0], imgs[1]) + line_distance(imgs[1], imgs[2])
        - line_distance(imgs[0], imgs[2]))
    .abs()
        < 1e-9;
    let cone_ok = beta > 0.0
        && beta_x > 0.0
        && between
        && imgs.iter().all(|&a| line_distance(a, ux) < beta_x);
    let mut least = probes.iter().map(|&a| stretch(a)).fold(f64::INFINITY, f64::min);
    let weak = m1.bottom_right_direction();
    if line_distance(weak, u) <= beta {
        least = least.min(stretch(weak));
    }
    let log_norm = m1.norm().ln() + logs[1];
    PointData {
        log_norm,
        cone_ok,
        expansion_log: least.ln() + logs[1],
        trace_abs_log: m1.trace().abs().ln() + logs[1],
    }
}

/// Grid-based cone-field test for uniform hyperbolicity.
///
/// For n = 16, 32, … ≤ n_max the cone at ω is centred on the unstable
/// direction of Aⁿ(T⁻ⁿω) with half-width half the angle to the stable
/// direction of Aⁿ(ω). The verdict is UH at the first n where every grid
/// cone maps strictly into the cone at Tⁿω with expansion ≥ 2. NotUH needs
/// bounded growth at the slowest grid phase over the last two levels and an
/// elliptic iterate at some phase with bounded growth; anything else is
/// Inconclusive.
pub fn certify_uniform_hyperbolicity<C: CocycleMap>(
    c: &C,
    grid: usize,
    n_max: usize,
) -> UhCertificate {
    let base = *c.base();
    let grid = grid.max(1);
    let mut ns = Vec::new();
    let mut n = 16usize.min(n_max.max(1));
    loop {
        ns.push(n);
        if n >= n_max {
            break;
        }
        n = (2 * n).min(n_max);
    }
    let mut levels = Vec::new();
    let mut history: Vec<Vec<PointData>> = Vec::new();
    for &n in &ns {
        let data = par::map(grid, |j| eval_point(c, &base.grid_point(j, grid), n));
        let nf = n as f64;
        let min_log_rate = data.iter().map(|d| d.log_norm / nf).fold(f64::INFINITY, f64::min);
        let cone_fraction = data.iter().filter(|d| d.cone_ok).count() as f64 / grid as f64;
        let min_exp = data.iter().map(|d| d.expansion_log).fold(f64::INFINITY, f64::min);
        levels.push(UhLevel {
            n,
            min_log_rate,
            cone_fraction,
            min_expansion_rate: min_exp / nf,
        });
        if cone_fraction == 1.0 && min_exp > MIN_EXPANSION.ln() {
            // λ from the expansion gained between n and 2n, which cancels the constant c
            let doubled = par::map(grid, |j| eval_point(c, &base.grid_point(j, grid), 2 * n));
            let rate = data
                .iter()
                .zip(&doubled)
                .map(|(d1, d2)| (d2.expansion_log - d1.expansion_log) / nf)
                .fold(f64::INFINITY, f64::min);
            let rate = if rate > 0.0 { rate.min(min_log_rate) } else { min_exp / nf };
            return UhCertificate {
                verdict: Verdict::Uh,
                n_star: n,
                growth_rate: rate.exp(),
                min_norm_ratio: min_log_rate.exp(),
                grid,
                n_max,
                evidence: UhEvidence {
                    levels,
                    slowest_phase: None,
                    slowest_log_norms: Vec::new(),
                    elliptic_seen: false,
                },
            };
        }
        history.push(data);
    }
    let last = history.last().expect("at least one level");
    let (j_slow, _) = last
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (j, d)| if d.log_norm < acc.1 { (j, d.log_norm) } else { acc });
    let tail: Vec<f64> = history.iter().rev().take(2).map(|h| h[j_slow].log_norm).collect();
    let bounded_at = |j: usize| history.len() >= 2 && history.iter().rev().take(2).all(|h| h[j].log_norm < BOUNDED_LOG_NORM);
    let elliptic_seen = (0..grid)
        .filter(|&j| bounded_at(j))
        .any(|j| history.iter().any(|h| h[j].trace_abs_log < 2f64.ln()));
    let bounded = bounded_at(j_slow);
    let verdict = if bounded && elliptic_seen { Verdict::NotUh } else { Verdict::Inconclusive };
    let lvl = levels.last().expect("at least one level");
    UhCertificate {
        verdict,
        n_star: lvl.n,
        growth_rate: lvl.min_expansion_rate.exp(),
        min_norm_ratio: lvl.min_log_rate.exp(),
        grid,
        n_max,
        evidence: UhEvidence {
            levels,
            slowest_phase: Some(base.grid_point(j_slow, grid).x()),
            slowest_log_norms: tail,
            elliptic_seen,
        },
    }
}
