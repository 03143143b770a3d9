use std::f64::consts::TAU;

use serde::Serialize;

use super::{CocycleMap, Fiber};
use crate::dynamics::TorusPoint;
use crate::error::{Error, Result};

const BLOCKS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Convergence {
    Converged,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct RotationEstimate {
    /// Rotation number in turns, reduced to [0, 1).
    pub rho: f64,
    /// Unreduced mean increment of the lift.
    pub lifted: f64,
    pub stderr: f64,
    pub first_half: f64,
    pub second_half: f64,
    pub n: usize,
    pub burn_in: usize,
    pub status: Convergence,
}

impl RotationEstimate {
    pub fn is_converged(&self) -> bool {
        self.status == Convergence::Converged
    }
}

#[inline]
fn bump(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        (-1.0 / (t * (1.0 - t))).exp()
    }
}

#[derive(Default, Clone, Copy)]
struct Acc {
    num: f64,
    den: f64,
}

impl Acc {
    #[inline]
    fn add(&mut self, w: f64, x: f64) {
        self.num += w * x;
        self.den += w;
    }
    fn mean(&self) -> f64 {
        self.num / self.den
    }
}

/// Fibered rotation number in turns.
///
/// The vector u_k is pushed along the orbit; each step's angle increment is
/// pinned to within half a turn of the polar rotation angle of A(T^kω), which
/// fixes the integer ambiguity of the lift. Increments are combined with a
/// smooth bump weight (weighted Birkhoff average). Blocks of the run give the
/// standard error; the two halves are compared to flag non-convergence.
pub fn rotation_number<C: CocycleMap>(
    c: &C,
    omega0: &TorusPoint,
    n: usize,
    burn_in: usize,
) -> Result<RotationEstimate> {
    if !c.homotopic_to_constant() {
        return Err(Error::Precondition("cocycle is not homotopic to a constant".into()));
    }
    if n < 1000 {
        return Err(Error::InvalidInput(format!("rotation_number needs n ≥ 1000, got {n}")));
    }
    let base = *c.base();
    if omega0.dim() != base.dimension() {
        return Err(Error::InvalidInput("phase dimension does not match base".into()));
    }
    let mut x = *omega0;
    let mut u = [1.0f64, 0.0];
    let advance = |x: &mut TorusPoint, u: &mut [f64; 2]| -> f64 {
        let a = c.value(x).to_real();
        let w = a.apply(*u);
        let anchor = a.polar_angle() / TAU;
        let raw = (u[0] * w[1] - u[1] * w[0]).atan2(u[0] * w[0] + u[1] * w[1]) / TAU;
        let d = raw - anchor;
        let inc = anchor + (d - d.round());
        let r = w[0].hypot(w[1]);
        *u = [w[0] / r, w[1] / r];
        *x = base.advance(x);
        inc
    };
    for _ in 0..burn_in {
        advance(&mut x, &mut u);
    }
    let block_len = n / BLOCKS;
    let half = n / 2;
    let mut total = Acc::default();
    let mut halves = [Acc::default(); 2];
    let mut blocks = [Acc::default(); BLOCKS];
    for j in 0..n {
        let inc = advance(&mut x, &mut u);
        total.add(bump((j as f64 + 0.5) / n as f64), inc);
        let (h, jh) = if j < half { (0, j) } else { (1, j - half) };
        let hl = if h == 0 { half } else { n - half };
        halves[h].add(bump((jh as f64 + 0.5) / hl as f64), inc);
        let b = (j / block_len).min(BLOCKS - 1);
        let jb = j - b * block_len;
        let bl = if b == BLOCKS - 1 { n - b * block_len } else { block_len };
        blocks[b].add(bump((jb as f64 + 0.5) / bl as f64), inc);
    }
    let lifted = total.mean();
    let means: Vec<f64> = blocks.iter().map(Acc::mean).collect();
    let bm = means.iter().sum::<f64>() / BLOCKS as f64;
    let var = means.iter().map(|m| (m - bm).powi(2)).sum::<f64>() / (BLOCKS - 1) as f64;
    let stderr = (var / BLOCKS as f64).sqrt();
    let (h1, h2) = (halves[0].mean(), halves[1].mean());
    let status = if (h1 - h2).abs() > 5.0 * stderr + 4.0 / n as f64 {
        Convergence::Inconclusive
    } else {
        Convergence::Converged
    };
    Ok(RotationEstimate {
        rho: crate::dynamics::frac(lifted),
        lifted,
        stderr,
        first_half: h1,
        second_half: h2,
        n,
        burn_in,
        status,
    })
}
