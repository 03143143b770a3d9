//! Browser bindings: IDS curves, rotation/Lyapunov sweeps and the range
//! cloud of the CMV triple product. Results are flat `Float64Array`s.

use gaplab::cocycle::{lyapunov_exponent, rotation_number};
use gaplab::dynamics::{BaseDynamics, Frequency, TrigPoly};
use gaplab::operators::{jacobi_cocycle_map, CmvFamily, IdsTable, JacobiFamily, OperatorFamily, SzegoCocycle};
use gaplab::projection::{g_range_probe, SzegoClassElem};
use wasm_bindgen::prelude::*;

pub mod compute {
    use super::*;
    use gaplab::Result;

    fn base(alpha: f64) -> Result<BaseDynamics> {
        BaseDynamics::rotation(alpha)
    }

    fn family(cmv: bool, lambda: f64, alpha: f64) -> Result<OperatorFamily> {
        let base = base(alpha)?;
        Ok(if cmv {
            OperatorFamily::Cmv(CmvFamily::polar(lambda, TrigPoly::cos(1, 1.0), base)?)
        } else {
            OperatorFamily::Jacobi(JacobiFamily::almost_mathieu(lambda, base))
        })
    }

    /// Interleaved (x, k(x)) pairs over the spectral hull or [0, 2π].
    pub fn ids_curve(cmv: bool, lambda: f64, alpha: f64, n: usize, samples: usize, points: usize) -> Result<Vec<f64>> {
        let f = family(cmv, lambda, alpha)?;
        let spec = f.spectrum(&f.base().point(0.0), n, samples, 0.0)?;
        let t = IdsTable::uniform(&spec, points);
        Ok(t.grid.iter().zip(&t.values).flat_map(|(x, k)| [*x, *k]).collect())
    }

    /// Pooled eigenvalues (or eigenangles), sorted.
    pub fn spectrum(cmv: bool, lambda: f64, alpha: f64, n: usize, samples: usize) -> Result<Vec<f64>> {
        let f = family(cmv, lambda, alpha)?;
        Ok(f.spectrum(&f.base().point(0.0), n, samples, 0.0)?.eigenvalues)
    }

    /// Triples (E, 2ρ, L) for the almost Mathieu cocycle, or (θ, 2ρ, L) for
    /// the CMV cocycle.
    pub fn rotation_sweep(
        cmv: bool,
        lambda: f64,
        alpha: f64,
        lo: f64,
        hi: f64,
        points: usize,
        n_rot: usize,
    ) -> Result<Vec<f64>> {
        let f = family(cmv, lambda, alpha)?;
        let omega = f.base().point(0.0);
        let points = points.max(2);
        let mut out = Vec::with_capacity(3 * points);
        for j in 0..points {
            let x = lo + (hi - lo) * j as f64 / (points - 1) as f64;
            let (r, l) = match &f {
                OperatorFamily::Jacobi(jf) => {
                    let c = jacobi_cocycle_map(jf, x)?;
                    (rotation_number(&c, &omega, n_rot, 0)?.rho, lyapunov_exponent(&c, 1000, 2)?)
                }
                OperatorFamily::Cmv(cf) => {
                    let c = SzegoCocycle::at_angle(cf, x);
                    (rotation_number(&c, &omega, n_rot, 0)?.rho, lyapunov_exponent(&c, 1000, 2)?)
                }
            };
            out.extend([x, 2.0 * r, l]);
        }
        Ok(out)
    }

    /// Interleaved (re, im) of g over a grid of (φ₁, φ₃), followed by the
    /// rescaled λ and a 0/1 hole flag.
    pub fn range_cloud(theta: f64, phi: f64, v: f64, v2: f64, grid: usize) -> Result<Vec<f64>> {
        let c = SzegoClassElem::new(theta, phi, v)?;
        let p = g_range_probe(&c, v2, grid)?;
        let mut out: Vec<f64> = p.cloud.iter().flat_map(|z| *z).collect();
        out.push(p.lambda);
        out.push(if p.holes.hole { 1.0 } else { 0.0 });
        Ok(out)
    }

    pub fn golden() -> f64 {
        Frequency::golden().value()
    }
}

fn js(e: gaplab::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn golden_mean() -> f64 {
    compute::golden()
}

#[wasm_bindgen]
pub fn ids_curve(cmv: bool, lambda: f64, alpha: f64, n: usize, samples: usize, points: usize) -> Result<Vec<f64>, JsError> {
    compute::ids_curve(cmv, lambda, alpha, n, samples, points).map_err(js)
}

#[wasm_bindgen]
pub fn spectrum(cmv: bool, lambda: f64, alpha: f64, n: usize, samples: usize) -> Result<Vec<f64>, JsError> {
    compute::spectrum(cmv, lambda, alpha, n, samples).map_err(js)
}

#[wasm_bindgen]
pub fn rotation_sweep(
    cmv: bool,
    lambda: f64,
    alpha: f64,
    lo: f64,
    hi: f64,
    points: usize,
    n_rot: usize,
) -> Result<Vec<f64>, JsError> {
    compute::rotation_sweep(cmv, lambda, alpha, lo, hi, points, n_rot).map_err(js)
}

#[wasm_bindgen]
pub fn range_cloud(theta: f64, phi: f64, v: f64, v2: f64, grid: usize) -> Result<Vec<f64>, JsError> {
    compute::range_cloud(theta, phi, v, v2, grid).map_err(js)
}
