use serde::Serialize;

use super::{CocycleMap, Mat2C};
use crate::par;

/// Cocycles whose sampling data extend holomorphically to a strip.
pub trait AnalyticCocycle: CocycleMap {
    /// A(ω + iε) for the first coordinate ω.
    fn value_complex(&self, omega: f64, eps: f64) -> Mat2C;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegimeLabel {
    pub regime: Regime,
    pub lyapunov_on_circle: f64,
    pub lyapunov_strip: Vec<(f64, f64)>,
    pub threshold: f64,
    pub n: usize,
}

const PHASES: usize = 4;

/// L(ε): average of (1/n) log‖Aⁿ(ω + iε)‖ over a few phases.
pub fn complex_lyapunov<C: AnalyticCocycle>(c: &C, eps: f64, n: usize, phases: usize) -> f64 {
    let alpha = c.base().frequency().value();
    let phases = phases.max(1);
    let rates = par::map(phases, |j| {
        let mut w = j as f64 / phases as f64;
        let mut m = Mat2C::identity();
        let mut ls = 0.0;
        for _ in 0..n {
            m = c.value_complex(w, eps) * m;
            let nr = m.norm();
            if nr > 1e100 || nr < 1e-100 {
                m = m.scale(1.0 / nr);
                ls += nr.ln();
            }
            w = crate::dynamics::frac(w + alpha);
        }
        (m.norm().ln() + ls) / n as f64
    });
    rates.iter().sum::<f64>() / phases as f64
}

/// Sub/critical/supercritical label from L(0) and L(ε) on the given strip
/// widths, with threshold 10/n.
pub fn classify_regime<C: AnalyticCocycle>(c: &C, epsilons: &[f64], n: usize) -> RegimeLabel {
    let n = n.max(1);
    let threshold = 10.0 / n as f64;
    let l0 = complex_lyapunov(c, 0.0, n, PHASES);
    let strip: Vec<(f64, f64)> =
        epsilons.iter().map(|&e| (e, complex_lyapunov(c, e, n, PHASES))).collect();
    let regime = if l0 > threshold {
        Regime::Supercritical
    } else if strip.iter().all(|&(_, l)| l <= threshold) {
        Regime::Subcritical
    } else {
        Regime::Critical
    };
    RegimeLabel { regime, lyapunov_on_circle: l0, lyapunov_strip: strip, threshold, n }
}
