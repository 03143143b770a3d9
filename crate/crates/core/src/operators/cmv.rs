//! Finite unitary CMV matrices with a unimodular last coefficient.
//!
//! The eigenvalues of the N×N truncation with coefficients α₀…α_{N−2} and
//! |α_{N−1}| = 1 are the zeros of the paraorthogonal polynomial
//! zΦ_{N−1}(z) − ᾱ_{N−1}Φ*_{N−1}(z). On the circle these are the solutions of
//! Λ(θ) ≡ arg ᾱ_{N−1} (mod 2π), where Λ is the continuous argument of the
//! Blaschke product zΦ_{N−1}/Φ*_{N−1}. Λ increases by 2πN over a turn and is
//! evaluated by a Szegő-recursion sweep in O(N).

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};

const PHASE_OFFSET: f64 = 1e-6;

/// Λ(θ) and Λ'(θ).
pub fn blaschke_phase(alphas: &[Complex64], theta: f64) -> (f64, f64) {
    let n_total = alphas.len() as f64 + 1.0;
    let mut psi = 0.0f64;
    let mut dpsi = 0.0f64;
    for (n, a) in alphas.iter().enumerate() {
        let k = n as f64 - 1.0;
        let chi = k * theta - 2.0 * psi;
        let dchi = k - 2.0 * dpsi;
        let w = a.conj() * Complex64::cis(chi);
        let one_minus = Complex64::new(1.0, 0.0) - w;
        psi += theta + one_minus.im.atan2(one_minus.re);
        dpsi += 1.0 - dchi * (w / one_minus).re;
    }
    ((2.0 - n_total) * theta + 2.0 * psi, (2.0 - n_total) + 2.0 * dpsi)
}

/// Eigenangles in [0, 2π), ascending, of the CMV truncation with interior
/// coefficients `alphas` (length N−1) and unimodular last coefficient `beta`.
pub fn cmv_eigenangles(alphas: &[Complex64], beta: Complex64) -> Result<Vec<f64>> {
    if let Some((j, a)) = alphas.iter().enumerate().find(|(_, a)| !(a.norm() < 1.0)) {
        return Err(Error::InvalidInput(format!("Verblunsky coefficient {j} = {a} is not in the disc")));
    }
    if (beta.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!("boundary coefficient {beta} is not unimodular")));
    }
    // block unitarity of Θ(α) = [[ᾱ, ρ], [ρ, −α]]
    let defect = alphas
        .iter()
        .map(|a| {
            let rho = (1.0 - a.norm_sqr()).sqrt();
            (a.norm_sqr() + rho * rho - 1.0).abs()
        })
        .fold(0.0, f64::max);
    if defect > 1e-8 {
        return Err(Error::Computational(format!("non-unitary CMV block, defect {defect:e}")));
    }
    let n = alphas.len() + 1;
    let target0 = -beta.arg();
    let grid = 4 * n;
    let h = TAU / grid as f64;
    // Real coefficients make θ = 0 an unstable point of the phase recursion;
    // start the sweep just past it.
    let start = PHASE_OFFSET;
    let table: Vec<f64> =
        (0..=grid).map(|j| blaschke_phase(alphas, start + j as f64 * h).0).collect();
    let l0 = table[0];
    let span = table[grid] - l0;
    if (span - TAU * n as f64).abs() > 1e-6 * n as f64 || table.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Computational(format!(
            "CMV phase winds by {:.6} turns, expected {n}",
            span / TAU
        )));
    }
    let m0 = ((l0 - target0) / TAU).ceil();
    let mut out = Vec::with_capacity(n);
    for m in 0..n {
        let t = target0 + TAU * (m0 + m as f64);
        let j = table.partition_point(|&v| v < t).clamp(1, grid);
        let (mut lo, mut hi) = (start + (j - 1) as f64 * h, start + j as f64 * h);
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let (f, df) = blaschke_phase(alphas, x);
            let g = f - t;
            if g.abs() < 1e-13 {
                break;
            }
            if g < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            if hi - lo < 1e-15 {
                x = 0.5 * (lo + hi);
                break;
            }
            let newton = x - g / df;
            x = if df.is_finite() && df > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        let a = x.rem_euclid(TAU);
        out.push(if TAU - a < 1e-13 { 0.0 } else { a });
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Dense N×N CMV matrix (row-major) for coefficients α₀…α_{N−1}, the last
/// one unimodular. C = LM with L = Θ₀ ⊕ Θ₂ ⊕ ⋯ and M = 1 ⊕ Θ₁ ⊕ Θ₃ ⊕ ⋯.
pub fn cmv_dense(alphas: &[Complex64]) -> Vec<Complex64> {
    let n = alphas.len();
    let zero = Complex64::new(0.0, 0.0);
    let theta = |a: Complex64| {
        let rho = Complex64::new((1.0 - a.norm_sqr()).max(0.0).sqrt(), 0.0);
        [a.conj(), rho, rho, -a]
    };
    let mut l = vec![zero; n * n];
    let mut m = vec![zero; n * n];
    let place = |mat: &mut Vec<Complex64>, j: usize, a: Complex64| {
        let t = theta(a);
        mat[j * n + j] = t[0];
        if j + 1 < n {
            mat[j * n + j + 1] = t[1];
            mat[(j + 1) * n + j] = t[2];
            mat[(j + 1) * n + j + 1] = t[3];
        }
    };
    let mut j = 0;
    while j < n {
        place(&mut l, j, alphas[j]);
        j += 2;
    }
    m[0] = Complex64::new(1.0, 0.0);
    let mut j = 1;
    while j < n {
        place(&mut m, j, alphas[j]);
        j += 2;
    }
    let mut c = vec![zero; n * n];
    for i in 0..n {
        for k in 0..n {
            let lik = l[i * n + k];
            if lik == zero {
                continue;
            }
            for j in 0..n {
                c[i * n + j] += lik * m[k * n + j];
            }
        }
    }
    c
}

/// Eigenangle of a unit complex number in [0, 2π).
pub fn unit_angle(z: Complex64) -> f64 {
    let a = z.arg().rem_euclid(TAU);
    if a >= TAU {
        0.0
    } else {
        a
    }
}
