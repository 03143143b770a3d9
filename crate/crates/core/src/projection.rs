//! Projection lemmas as executable algebra: triple and quadruple
//! factorizations in the Szegő class 𝒮_θ and the Jacobi class 𝒥, their
//! inverses, the range region of the upper-left entry, and the local
//! conjugacy Φ, Ψ that pulls a perturbed cocycle back into the class.

use std::collections::VecDeque;
use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::Serialize;

use crate::cocycle::{exp_traceless, CocycleMap, Fiber, FnCocycle, Mat2, Mat2H};
use crate::dynamics::{dist_to_int, frac, BaseDynamics, TorusPoint};
use crate::error::{Error, Result};
use crate::par;

/// Entrywise distance from S³ inside which the CMV triple inverse is attempted.
pub const CMV_NEIGHBOURHOOD: f64 = 0.05;
const NEWTON_STEPS: usize = 100;
const NEWTON_TOL: f64 = 1e-9;

/// (1/√(1−v²))[[e^{iθ}, ve^{−iφ}], [ve^{iφ}, e^{−iθ}]].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SzegoClassElem {
    pub theta: f64,
    pub phi: f64,
    pub v: f64,
}

impl SzegoClassElem {
    pub fn new(theta: f64, phi: f64, v: f64) -> Result<Self> {
        if !(theta.is_finite() && phi.is_finite()) || !(0.0..1.0).contains(&v) {
            return Err(Error::InvalidInput(format!("class element needs finite angles and v in [0,1), got v = {v}")));
        }
        Ok(SzegoClassElem { theta, phi, v })
    }

    pub fn matrix(&self) -> Mat2H {
        let s = 1.0 / (1.0 - self.v * self.v).sqrt();
        Mat2H::raw(Complex64::cis(self.theta) * s, Complex64::cis(-self.phi) * (self.v * s))
    }

    /// Reads (θ, φ, v) off an SU(1,1) matrix; φ = 0 when v = 0.
    pub fn from_matrix(m: &Mat2H) -> Self {
        let v = m.b.norm() / m.a.norm();
        let phi = if m.b.norm() > 0.0 { -m.b.arg() } else { 0.0 };
        SzegoClassElem { theta: m.a.arg(), phi, v }
    }

    /// Distance of `m` from 𝒮_θ: argument error of the upper-left entry plus
    /// the SU(1,1) defect.
    pub fn class_defect(m: &Mat2H, theta: f64) -> f64 {
        let d = (m.a.arg() - theta).rem_euclid(TAU);
        d.min(TAU - d) + (m.det() - 1.0).abs()
    }
}

/// (1/a)[[t, −1], [a², 0]].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JacobiClassElem {
    pub a: f64,
    pub t: f64,
}

impl JacobiClassElem {
    pub fn new(a: f64, t: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite() && t.is_finite()) {
            return Err(Error::InvalidInput(format!("Jacobi class needs a > 0 and finite t, got a = {a}, t = {t}")));
        }
        Ok(JacobiClassElem { a, t })
    }

    pub fn matrix(&self) -> Mat2 {
        Mat2::raw(self.t / self.a, -1.0 / self.a, self.a, 0.0)
    }

    pub fn from_matrix(m: &Mat2) -> Result<Self> {
        JacobiClassElem::new(m.m21, m.m11 * m.m21)
    }

    /// Deviation of `m` from the shape (1/a)[[t, −1], [a², 0]].
    pub fn class_defect(m: &Mat2) -> f64 {
        if m.m21 <= 0.0 {
            return f64::INFINITY;
        }
        m.m22.abs() + (m.m12 + 1.0 / m.m21).abs()
    }
}

/// Free parameters of A₁ = (φ₁, v), A₂ = (φ, v₂), A₃ = (φ₃, v) in 𝒮_θ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CmvTripleParams {
    pub phi1: f64,
    pub v2: f64,
    pub phi3: f64,
}

/// Free parameters of A_j = (1/a_j)[[t_j, −1], [a_j², 0]].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JacobiTripleParams {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
}

fn check_cmv(p: &CmvTripleParams, consts: &SzegoClassElem) -> Result<()> {
    SzegoClassElem::new(consts.theta, consts.phi, consts.v)?;
    SzegoClassElem::new(consts.theta, p.phi1, p.v2)?;
    SzegoClassElem::new(consts.theta, p.phi3, consts.v)?;
    Ok(())
}

fn cmv_factors(p: &CmvTripleParams, consts: &SzegoClassElem) -> [Mat2H; 3] {
    let t = consts.theta;
    [
        SzegoClassElem { theta: t, phi: p.phi1, v: consts.v }.matrix(),
        SzegoClassElem { theta: t, phi: consts.phi, v: p.v2 }.matrix(),
        SzegoClassElem { theta: t, phi: p.phi3, v: consts.v }.matrix(),
    ]
}

/// A₃A₂A₁ by direct multiplication.
pub fn cmv_triple_product(p: &CmvTripleParams, consts: &SzegoClassElem) -> Result<Mat2H> {
    check_cmv(p, consts)?;
    let [a1, a2, a3] = cmv_factors(p, consts);
    Ok(a3 * a2 * a1)
}

/// A₃A₂A₁ from the expanded entries.
pub fn cmv_triple_closed_form(p: &CmvTripleParams, consts: &SzegoClassElem) -> Result<Mat2H> {
    check_cmv(p, consts)?;
    let (t, f, v, v2) = (consts.theta, consts.phi, consts.v, p.v2);
    let (f1, f3) = (p.phi1, p.phi3);
    let e = Complex64::cis;
    let a = e(3.0 * t) + e(t + f1 - f) * (v * v2) + e(t + f - f3) * (v * v2) + e(f1 - f3 - t) * (v * v);
    let b = e(2.0 * t - f1) * v + e(-f) * v2 + e(-f3 - 2.0 * t) * v + e(f - f1 - f3) * (v * v * v2);
    let s = 1.0 / ((1.0 - v * v) * (1.0 - v2 * v2).sqrt());
    Ok(Mat2H::raw(a * s, b * s))
}

fn solve3(m: [[f64; 3]; 3], r: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    let scale = m.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max).powi(3);
    if !(d.abs() > 1e-14 * scale) {
        return None;
    }
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut mk = m;
        for i in 0..3 {
            mk[i][k] = r[i];
        }
        *o = det(&mk) / d;
    }
    Some(out)
}

fn szego_jacobian(theta: f64, target_a: Complex64, x: &[f64; 3], va: f64, fb: f64, vc: f64) -> [[f64; 3]; 3] {
    let m1 = SzegoClassElem { theta, phi: x[0], v: va }.matrix();
    let m2 = SzegoClassElem { theta, phi: fb, v: x[1] }.matrix();
    let m3 = SzegoClassElem { theta, phi: x[2], v: vc }.matrix();
    let r1 = 1.0 / (1.0 - va * va).sqrt();
    let r2 = 1.0 / (1.0 - x[1] * x[1]).sqrt();
    let r3 = 1.0 / (1.0 - vc * vc).sqrt();
    let i = Complex64::i();
    let zero = Complex64::new(0.0, 0.0);
    let d1 = Mat2H::raw(zero, -i * Complex64::cis(-x[0]) * (va * r1));
    let d2 = Mat2H::raw(Complex64::cis(theta) * (x[1] * r2 * r2 * r2), Complex64::cis(-fb) * (r2 * r2 * r2));
    let d3 = Mat2H::raw(zero, -i * Complex64::cis(-x[2]) * (vc * r3));
    let cols = [m3 * m2 * d1, m3 * d2 * m1, d3 * m2 * m1];
    let mut jac = [[0.0; 3]; 3];
    for (k, dp) in cols.iter().enumerate() {
        jac[0][k] = dp.b.re;
        jac[1][k] = dp.b.im;
        jac[2][k] = (dp.a * target_a.conj()).im / target_a.norm();
    }
    jac
}

/// Frobenius condition number of the triple map at `p`; infinite on the fold.
pub fn cmv_triple_condition(p: &CmvTripleParams, consts: &SzegoClassElem) -> Result<f64> {
    let target = cmv_triple_product(p, consts)?;
    let j = szego_jacobian(consts.theta, target.a, &[p.phi1, p.v2, p.phi3], consts.v, consts.phi, consts.v);
    let frob = |m: &[[f64; 3]; 3]| m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    let mut inv = [[0.0; 3]; 3];
    for k in 0..3 {
        let mut e = [0.0; 3];
        e[k] = 1.0;
        let Some(col) = solve3(j, e) else { return Ok(f64::INFINITY) };
        for i in 0..3 {
            inv[i][k] = col[i];
        }
    }
    Ok(frob(&j) * frob(&inv))
}

/// Solves A₃A₂A₁ = target where A₁ keeps the modulus of `seeds[0]`, A₂ the
/// phase of `seeds[1]` and A₃ the modulus of `seeds[2]`; the other three
/// parameters are found by damped Newton iteration from the seeds, with a
/// Levenberg–Marquardt fallback near the fold.
fn szego_triple_solve(theta: f64, target: &Mat2H, seeds: &[SzegoClassElem; 3]) -> Result<(CmvTripleParams, f64)> {
    let (va, fb, vc) = (seeds[0].v, seeds[1].phi, seeds[2].v);
    let product = |x: &[f64; 3]| {
        let a1 = SzegoClassElem { theta, phi: x[0], v: va }.matrix();
        let a2 = SzegoClassElem { theta, phi: fb, v: x[1] }.matrix();
        let a3 = SzegoClassElem { theta, phi: x[2], v: vc }.matrix();
        a3 * a2 * a1
    };
    let residual = |x: &[f64; 3]| {
        let p = product(x);
        let db = p.b - target.b;
        [db.re, db.im, (p.a * target.a.conj()).im / target.a.norm()]
    };
    let size = |r: &[f64; 3]| r.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let admissible = |y: &[f64; 3]| (0.0..1.0).contains(&y[1]);
    let done = |x: &[f64; 3]| product(x).max_abs_diff(target) < 1e-14;

    let newton = |mut x: [f64; 3]| {
        let mut res = residual(&x);
        for _ in 0..NEWTON_STEPS {
            if done(&x) {
                break;
            }
            let jac = szego_jacobian(theta, target.a, &x, va, fb, vc);
            let Some(dx) = solve3(jac, res.map(|r| -r)) else { break };
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let y = [x[0] + step * dx[0], x[1] + step * dx[1], x[2] + step * dx[2]];
                if admissible(&y) {
                    let r = residual(&y);
                    if size(&r) <= size(&res) {
                        x = y;
                        res = r;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        x
    };

    let marquardt = |mut x: [f64; 3]| {
        let mut res = residual(&x);
        let mut mu = 1e-3;
        for _ in 0..20 * NEWTON_STEPS {
            if done(&x) || mu > 1e12 {
                break;
            }
            let j = szego_jacobian(theta, target.a, &x, va, fb, vc);
            let mut jtj = [[0.0; 3]; 3];
            let mut jtr = [0.0; 3];
            for a in 0..3 {
                for b in 0..3 {
                    jtj[a][b] = (0..3).map(|k| j[k][a] * j[k][b]).sum();
                }
                jtr[a] = -(0..3).map(|k| j[k][a] * res[k]).sum::<f64>();
            }
            let mut lhs = jtj;
            for a in 0..3 {
                lhs[a][a] += mu * (1.0 + jtj[a][a]);
            }
            let Some(dx) = solve3(lhs, jtr) else {
                mu *= 10.0;
                continue;
            };
            let y = [x[0] + dx[0], x[1] + dx[1], x[2] + dx[2]];
            let norm2 = |r: &[f64; 3]| r.iter().map(|v| v * v).sum::<f64>();
            if admissible(&y) && norm2(&residual(&y)) < norm2(&res) {
                x = y;
                res = residual(&x);
                mu = (mu / 3.0).max(1e-15);
            } else {
                mu *= 4.0;
            }
        }
        x
    };

    let seed = [seeds[0].phi, seeds[1].v, seeds[2].phi];
    let mut best = newton(seed);
    let err = |x: &[f64; 3]| product(x).max_abs_diff(target);
    if err(&best) >= NEWTON_TOL {
        let mut starts = vec![seed];
        for d in [0.02, -0.02] {
            starts.push([seed[0] + d, seed[1], seed[2] - d]);
            starts.push([seed[0] + d, seed[1], seed[2] + d]);
        }
        for s in starts {
            let x = newton(marquardt(s));
            if err(&x) < err(&best) {
                best = x;
            }
            if err(&best) < NEWTON_TOL {
                break;
            }
        }
    }
    let e = err(&best);
    if e < NEWTON_TOL {
        Ok((CmvTripleParams { phi1: best[0], v2: best[1], phi3: best[2] }, e))
    } else {
        Err(Error::OutOfRange(format!("triple inverse did not converge (residual {e:.3e})")))
    }
}

/// Parameters (φ₁, v₂, φ₃) with A₃A₂A₁ = B, for B near S³.
/// Near the fold of the triple map (see `cmv_triple_condition`; it contains
/// cos θ = 0) a preimage of B is returned but not necessarily the nearest one.
pub fn cmv_triple_inverse(b: &Mat2H, consts: &SzegoClassElem) -> Result<CmvTripleParams> {
    SzegoClassElem::new(consts.theta, consts.phi, consts.v)?;
    let s = consts.matrix();
    let cube = s * s * s;
    let dist = b.max_abs_diff(&cube);
    if !(dist <= CMV_NEIGHBOURHOOD) {
        return Err(Error::OutOfRange(format!("B is {dist:.3e} from S³, outside the {CMV_NEIGHBOURHOOD} neighbourhood")));
    }
    if (b.det() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidInput(format!("B is not in SU(1,1): |a|²−|b|² = {}", b.det())));
    }
    szego_triple_solve(consts.theta, b, &[*consts; 3]).map(|(p, _)| p)
}

fn check_a(a: &[f64]) -> Result<()> {
    if a.iter().all(|x| *x > 0.0 && x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("off-diagonal constants must be positive, got {a:?}")))
    }
}

/// A₃A₂A₁ for A_j = (1/a_j)[[t_j, −1], [a_j², 0]].
pub fn jacobi_triple_product(t: &JacobiTripleParams, a: [f64; 3]) -> Result<Mat2> {
    check_a(&a)?;
    let m = |a: f64, t: f64| JacobiClassElem { a, t }.matrix();
    Ok(m(a[2], t.t3) * m(a[1], t.t2) * m(a[0], t.t1))
}

/// Closed-form (t₁, t₂, t₃) with A₃A₂A₁ = B = [[p, q], [r, s]], s ≠ 0.
pub fn jacobi_triple_inverse(b: &Mat2, a: [f64; 3]) -> Result<JacobiTripleParams> {
    check_a(&a)?;
    if (b.det() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidInput(format!("det B = {} is not 1", b.det())));
    }
    let (q, r, s) = (b.m12, b.m21, b.m22);
    if s.abs() <= 1e-10 {
        return Err(Error::Singular(format!("lower-right entry {s:e} vanishes")));
    }
    let [a1, a2, a3] = a;
    Ok(JacobiTripleParams {
        t1: -(r + a1 * a3 / a2) / s,
        t2: -a1 * a2 * s / a3,
        t3: (a3 * a3 * q - a2 * a3 / a1) / s,
    })
}

/// A₄A₃A₂A₁ = Â⁴ with A_i = (1/a_i)[[E_i, −1], [a_i², 0]].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadFactorization {
    pub e: [f64; 4],
    /// E₃ = scale · phi.
    pub phi: f64,
    pub scale: f64,
    /// Every admissible phi; each gives a valid factorization.
    pub phi_roots: Vec<f64>,
}

pub fn jacobi_quad_product(e: [f64; 4], a: [f64; 4]) -> Result<Mat2> {
    check_a(&a)?;
    let m = |a: f64, t: f64| JacobiClassElem { a, t }.matrix();
    Ok(m(a[3], e[3]) * m(a[2], e[2]) * m(a[1], e[1]) * m(a[0], e[0]))
}

/// Factorizes Â⁴ near the identity. The system leaves E₂E₃ = N fixed and
/// one degree of freedom open; the balanced choice |E₂| = |E₃| = √|N| is
/// returned, with both signs listed in `phi_roots`.
pub fn jacobi_quad_factorize(bhat4: &Mat2, a: [f64; 4]) -> Result<QuadFactorization> {
    check_a(&a)?;
    let d = bhat4.sub(&Mat2::IDENTITY);
    let dist = d.norm();
    if !(dist < 0.01) {
        return Err(Error::Precondition(format!("‖Â⁴ − I‖ = {dist:.3e} is not below 0.01")));
    }
    if (bhat4.det() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidInput(format!("det Â⁴ = {} is not 1", bhat4.det())));
    }
    let (q, r, s) = (d.m12, d.m21, d.m22);
    let [a1, a2, a3, a4] = a;
    let n = a2 * a2 - a1 * a2 * a3 * (1.0 + s) / a4;
    let scale = dist.sqrt();
    let build = |e3: f64| {
        let e2 = if e3 == 0.0 { 0.0 } else { n / e3 };
        let e1 = -(r + a1 * a4 / (a2 * a3) * e3) / (s + 1.0);
        let e4 = (a4 * a4 * q - a3 * a4 / (a1 * a2) * e2) / (s + 1.0);
        [e1, e2, e3, e4]
    };
    let e3 = n.abs().sqrt();
    if n != 0.0 && e3 == 0.0 {
        return Err(Error::OutOfRange("E₃ underflows".into()));
    }
    let phi = if scale > 0.0 { e3 / scale } else { 0.0 };
    if phi > 1.0 {
        return Err(Error::OutOfRange(format!("φ = {phi:.3e} leaves the bracket [−1, 1]")));
    }
    let phi_roots = if phi > 0.0 { vec![phi, -phi] } else { vec![0.0] };
    Ok(QuadFactorization { e: build(e3), phi, scale, phi_roots })
}

/// r(φ₁) = √(1 + λ² + 2λ cos φ₁).
pub fn radius(lambda: f64, phi1: f64) -> f64 {
    (1.0 + lambda * lambda + 2.0 * lambda * phi1.cos()).max(0.0).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadiusCheck {
    pub lambda: f64,
    pub points: usize,
    /// min over the grid of r(φ₁) + r(φ₁+π) − 2.
    pub min_excess: f64,
    /// Grid angles with excess below 1e-10.
    pub equality_angles: Vec<f64>,
    /// max |r(φ₁)² + r(φ₁+π)² − 2(1+λ²)|.
    pub identity_error: f64,
}

pub fn radius_check(lambda: f64, points: usize) -> RadiusCheck {
    let mut min_excess = f64::INFINITY;
    let mut equality_angles = Vec::new();
    let mut identity_error = 0.0f64;
    for j in 0..points {
        let f = TAU * j as f64 / points as f64;
        let (r0, r1) = (radius(lambda, f), radius(lambda, f + PI));
        let excess = r0 + r1 - 2.0;
        min_excess = min_excess.min(excess);
        if excess < 1e-10 {
            equality_angles.push(f);
        }
        identity_error = identity_error.max((r0 * r0 + r1 * r1 - 2.0 * (1.0 + lambda * lambda)).abs());
    }
    RadiusCheck { lambda, points, min_excess, equality_angles, identity_error }
}

/// Raster scan of Ran(e^{ix} + e^{iy} + λe^{i(x+y)}).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoleScan {
    pub lambda: f64,
    pub grid: usize,
    pub range_pixels: usize,
    /// Complement pixels not reachable from the border.
    pub hole_pixels: usize,
    /// Largest enclosed component, in pixels.
    pub largest_hole: usize,
    pub hole: bool,
}

/// Enclosed components smaller than this are raster artefacts.
const MIN_HOLE_PIXELS: usize = 4;

pub fn range_hole_scan(lambda: f64, grid: usize) -> HoleScan {
    let reach = 2.0 + lambda.abs();
    let half = reach * (1.0 + 4.0 / grid as f64);
    let px = 2.0 * half / grid as f64;
    // samples closer than px/2 in the image
    let m = ((TAU * 2.0 * (1.0 + lambda.abs())) / px).ceil() as usize;
    let table: Vec<Complex64> = (0..m).map(|j| Complex64::cis(TAU * j as f64 / m as f64)).collect();
    let mut filled = vec![false; grid * grid];
    let cell = |z: Complex64| {
        let i = ((z.re + half) / px).floor().clamp(0.0, (grid - 1) as f64) as usize;
        let j = ((z.im + half) / px).floor().clamp(0.0, (grid - 1) as f64) as usize;
        j * grid + i
    };
    for (jx, ex) in table.iter().enumerate() {
        for (jy, ey) in table.iter().enumerate() {
            let z = ex + ey + table[(jx + jy) % m] * lambda;
            filled[cell(z)] = true;
        }
    }
    let range_pixels = filled.iter().filter(|f| **f).count();
    let mut outside = vec![false; grid * grid];
    let mut queue = VecDeque::new();
    for k in 0..grid {
        for idx in [k, (grid - 1) * grid + k, k * grid, k * grid + grid - 1] {
            if !filled[idx] && !outside[idx] {
                outside[idx] = true;
                queue.push_back(idx);
            }
        }
    }
    flood(&filled, &mut outside, &mut queue, grid);
    let mut hole_pixels = 0;
    let mut largest_hole = 0;
    let mut seen = outside.clone();
    for idx in 0..grid * grid {
        if !filled[idx] && !seen[idx] {
            let before = seen.iter().filter(|s| **s).count();
            seen[idx] = true;
            queue.push_back(idx);
            flood(&filled, &mut seen, &mut queue, grid);
            let size = seen.iter().filter(|s| **s).count() - before;
            hole_pixels += size;
            largest_hole = largest_hole.max(size);
        }
    }
    HoleScan { lambda, grid, range_pixels, hole_pixels, largest_hole, hole: largest_hole >= MIN_HOLE_PIXELS }
}

fn flood(filled: &[bool], seen: &mut [bool], queue: &mut VecDeque<usize>, grid: usize) {
    while let Some(idx) = queue.pop_front() {
        let (i, j) = (idx % grid, idx / grid);
        let mut push = |n: usize| {
            if !filled[n] && !seen[n] {
                seen[n] = true;
                queue.push_back(n);
            }
        };
        if i > 0 {
            push(idx - 1);
        }
        if i + 1 < grid {
            push(idx + 1);
        }
        if j > 0 {
            push(idx - grid);
        }
        if j + 1 < grid {
            push(idx + grid);
        }
    }
}

/// Range diagnostics for the upper-left entry of A₃A₂A₁.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GRangeProbe {
    pub consts: SzegoClassElem,
    pub v2: f64,
    /// Ran(g) = v·v₂·e^{3iθ}·Ran(e^{ix} + e^{iy} + λe^{i(x+y)}).
    pub lambda: f64,
    /// g over a `cloud_side`² grid of (φ₁, φ₃), as (re, im).
    pub cloud_side: usize,
    pub cloud: Vec<[f64; 2]>,
    /// (φ₁, r(φ₁)) on `grid` angles.
    pub radius_table: Vec<[f64; 2]>,
    pub radius: RadiusCheck,
    pub holes: HoleScan,
}

/// g(φ₁, φ₃) = vv₂e^{i(θ+φ₁−φ)} + vv₂e^{i(θ+φ−φ₃)} + v²e^{i(φ₁−φ₃−θ)}.
pub fn g_value(consts: &SzegoClassElem, v2: f64, phi1: f64, phi3: f64) -> Complex64 {
    let (t, f, v) = (consts.theta, consts.phi, consts.v);
    let e = Complex64::cis;
    e(t + phi1 - f) * (v * v2) + e(t + f - phi3) * (v * v2) + e(phi1 - phi3 - t) * (v * v)
}

pub fn g_range_probe(consts: &SzegoClassElem, v2: f64, grid: usize) -> Result<GRangeProbe> {
    SzegoClassElem::new(consts.theta, consts.phi, consts.v)?;
    SzegoClassElem::new(consts.theta, 0.0, v2)?;
    if grid < 256 {
        return Err(Error::InvalidInput(format!("grid must be at least 256, got {grid}")));
    }
    if v2 == 0.0 {
        return Err(Error::InvalidInput("v2 = 0 collapses the rescaling".into()));
    }
    let lambda = consts.v / v2;
    let side = grid.min(256);
    let mut cloud = Vec::with_capacity(side * side);
    for j1 in 0..side {
        for j3 in 0..side {
            let z = g_value(consts, v2, TAU * j1 as f64 / side as f64, TAU * j3 as f64 / side as f64);
            cloud.push([z.re, z.im]);
        }
    }
    let radius_table =
        (0..grid).map(|j| TAU * j as f64 / grid as f64).map(|f| [f, radius(lambda, f)]).collect();
    Ok(GRangeProbe {
        consts: *consts,
        v2,
        lambda,
        cloud_side: side,
        cloud,
        radius_table,
        radius: radius_check(lambda, grid),
        holes: range_hole_scan(lambda, grid),
    })
}

/// Half-open arc [start, start + length) on 𝕋, in the first coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Arc {
    pub start: f64,
    pub length: f64,
}

impl Arc {
    pub fn new(start: f64, length: f64) -> Result<Self> {
        if !(length > 0.0 && length < 1.0 && start.is_finite()) {
            return Err(Error::InvalidInput(format!("arc length must lie in (0,1), got {length}")));
        }
        Ok(Arc { start: frac(start), length })
    }

    /// [0, min(‖α‖, ‖2α‖)/3).
    pub fn default_for(alpha: f64) -> Self {
        Arc { start: 0.0, length: dist_to_int(alpha).min(dist_to_int(2.0 * alpha)) / 3.0 }
    }

    pub fn contains(&self, x: f64) -> bool {
        frac(x - self.start) < self.length
    }

    /// sin² bump vanishing at both ends, zero outside.
    pub fn bump(&self, x: f64) -> f64 {
        let u = frac(x - self.start);
        if u < self.length {
            (PI * u / self.length).sin().powi(2)
        } else {
            0.0
        }
    }

    /// K ∩ T(K) = ∅ and K ∩ T²(K) = ∅ for the rotation by α.
    pub fn check_disjoint(&self, alpha: f64) -> Result<()> {
        for (n, shift) in [(1, alpha), (2, 2.0 * alpha)] {
            if dist_to_int(shift) <= self.length {
                return Err(Error::InvalidInput(format!(
                    "arc of length {} meets its image under T^{n} (shift {:.4})",
                    self.length,
                    dist_to_int(shift)
                )));
            }
        }
        Ok(())
    }
}

/// A class of matrices closed under the triple inverse.
pub trait ProjectionClass: Sync {
    type M: Fiber + Serialize;

    /// (A₁, A₂, A₃) in the class with A₃A₂A₁ = target, continuing from `seeds`.
    fn solve_triple(&self, target: &Self::M, seeds: &[Self::M; 3]) -> Result<[Self::M; 3]>;
    fn class_defect(&self, m: &Self::M) -> f64;
    fn distance(&self, a: &Self::M, b: &Self::M) -> f64;
    fn lerp(&self, a: &Self::M, b: &Self::M, t: f64) -> Self::M;
    /// exp(s·X) for the unit generator X with coordinates `g`.
    fn exp_generator(&self, g: [f64; 3], s: f64) -> Self::M;
}

/// 𝒮_θ.
#[derive(Debug, Clone, Copy)]
pub struct SzegoClass {
    pub theta: f64,
}

/// 𝒥, solved by the closed-form triple inverse.
#[derive(Debug, Clone, Copy)]
pub struct JacobiClass;

impl ProjectionClass for SzegoClass {
    type M = Mat2H;

    fn solve_triple(&self, target: &Mat2H, seeds: &[Mat2H; 3]) -> Result<[Mat2H; 3]> {
        let s = seeds.map(|m| SzegoClassElem::from_matrix(&m));
        let start = seeds[2] * seeds[1] * seeds[0];
        let dist = target.max_abs_diff(&start);
        if !(dist <= CMV_NEIGHBOURHOOD) {
            return Err(Error::OutOfRange(format!("target is {dist:.3e} from the seed product")));
        }
        let (p, _) = szego_triple_solve(self.theta, target, &s)?;
        let t = self.theta;
        Ok([
            SzegoClassElem { theta: t, phi: p.phi1, v: s[0].v }.matrix(),
            SzegoClassElem { theta: t, phi: s[1].phi, v: p.v2 }.matrix(),
            SzegoClassElem { theta: t, phi: p.phi3, v: s[2].v }.matrix(),
        ])
    }

    fn class_defect(&self, m: &Mat2H) -> f64 {
        SzegoClassElem::class_defect(m, self.theta)
    }

    fn distance(&self, a: &Mat2H, b: &Mat2H) -> f64 {
        a.max_abs_diff(b)
    }

    fn lerp(&self, a: &Mat2H, b: &Mat2H, t: f64) -> Mat2H {
        Mat2H::raw(a.a + (b.a - a.a) * t, a.b + (b.b - a.b) * t)
    }

    fn exp_generator(&self, g: [f64; 3], s: f64) -> Mat2H {
        // X = [[ix, w], [w̄, −ix]], X² = (|w|² − x²)·I
        let x = s * g[0];
        let w = Complex64::new(g[1], g[2]) * s;
        let d = w.norm_sqr() - x * x;
        let (c, k) = if d > 0.0 {
            let r = d.sqrt();
            (r.cosh(), r.sinh() / r)
        } else if d < 0.0 {
            let r = (-d).sqrt();
            (r.cos(), r.sin() / r)
        } else {
            (1.0, 1.0)
        };
        Mat2H::raw(Complex64::new(c, k * x), w * k)
    }
}

impl ProjectionClass for JacobiClass {
    type M = Mat2;

    fn solve_triple(&self, target: &Mat2, seeds: &[Mat2; 3]) -> Result<[Mat2; 3]> {
        let a = seeds.map(|m| m.m21);
        let t = jacobi_triple_inverse(target, a)?;
        Ok([
            JacobiClassElem { a: a[0], t: t.t1 }.matrix(),
            JacobiClassElem { a: a[1], t: t.t2 }.matrix(),
            JacobiClassElem { a: a[2], t: t.t3 }.matrix(),
        ])
    }

    fn class_defect(&self, m: &Mat2) -> f64 {
        JacobiClassElem::class_defect(m)
    }

    fn distance(&self, a: &Mat2, b: &Mat2) -> f64 {
        a.sub(b).max_abs()
    }

    fn lerp(&self, a: &Mat2, b: &Mat2, t: f64) -> Mat2 {
        a.add(&b.sub(a).scale(t))
    }

    fn exp_generator(&self, g: [f64; 3], s: f64) -> Mat2 {
        exp_traceless(s * g[0], s * g[1], s * g[2])
    }
}

/// B(ω) = A(ω)·exp(size·β(ω)·X) with β the sin² bump on `support`.
pub fn bump_perturbation<P, C>(
    class: P,
    a: C,
    support: Arc,
    size: f64,
    generator: [f64; 3],
) -> FnCocycle<P::M, impl Fn(&TorusPoint) -> P::M + Sync>
where
    P: ProjectionClass,
    C: CocycleMap<Fiber = P::M>,
{
    let base = *a.base();
    let norm = generator.iter().map(|g| g * g).sum::<f64>().sqrt();
    let g = if norm > 0.0 { generator.map(|x| x / norm) } else { generator };
    FnCocycle::new(base, move |w: &TorusPoint| {
        let beta = support.bump(w.x());
        let m = a.value(w);
        if beta == 0.0 {
            m
        } else {
            m.compose(&class.exp_generator(g, size * beta))
        }
    })
}

/// Φ (class-valued) and Ψ (conjugacy) on a uniform grid of the first coordinate.
#[derive(Debug, Clone, Serialize)]
pub struct LocalConjugacy<M> {
    pub arc: Arc,
    pub grid: Vec<f64>,
    pub phi: Vec<M>,
    pub psi: Vec<M>,
    /// max ‖Ψ(Tω)B(ω)Ψ(ω)⁻¹ − Φ(ω)‖ over the grid.
    pub max_residual: f64,
    pub max_class_defect: f64,
    /// max over cell midpoints of the error of linear interpolation in the tables.
    pub interpolation_error: f64,
}

impl<M: Copy> LocalConjugacy<M> {
    /// Linear interpolation of a table in the first coordinate.
    pub fn interpolate<P: ProjectionClass<M = M>>(&self, class: &P, table: &[M], x: f64) -> M {
        let n = self.grid.len();
        let u = frac(x) * n as f64;
        let j = (u.floor() as usize).min(n - 1);
        class.lerp(&table[j], &table[(j + 1) % n], u - j as f64)
    }
}

struct Pointwise<'a, P: ProjectionClass, A, B> {
    class: &'a P,
    a: &'a A,
    b: &'a B,
    base: BaseDynamics,
    arc: Arc,
}

impl<P, A, B> Pointwise<'_, P, A, B>
where
    P: ProjectionClass,
    A: CocycleMap<Fiber = P::M>,
    B: CocycleMap<Fiber = P::M>,
{
    fn inside(&self, w: &TorusPoint) -> bool {
        self.arc.contains(w.x())
    }

    /// (Φ(T⁻¹c), Φ(c), Φ(Tc)) for c ∈ K.
    fn triple(&self, c: &TorusPoint) -> Result<[P::M; 3]> {
        let (prev, next) = (self.base.retreat(c), self.base.advance(c));
        let target = self.b.value(&next).compose(&self.b.value(c)).compose(&self.b.value(&prev));
        let seeds = [self.a.value(&prev), self.a.value(c), self.a.value(&next)];
        self.class
            .solve_triple(&target, &seeds)
            .map_err(|e| Error::OutOfRange(format!("triple inverse failed at ω = {:.6}: {e}", c.x())))
    }

    fn phi(&self, w: &TorusPoint) -> Result<P::M> {
        if self.inside(w) {
            return Ok(self.triple(w)?[1]);
        }
        let next = self.base.advance(w);
        if self.inside(&next) {
            return Ok(self.triple(&next)?[0]);
        }
        let prev = self.base.retreat(w);
        if self.inside(&prev) {
            return Ok(self.triple(&prev)?[2]);
        }
        Ok(self.a.value(w))
    }

    fn psi(&self, w: &TorusPoint) -> Result<P::M> {
        if self.inside(w) {
            let prev = self.base.retreat(w);
            return Ok(self.triple(w)?[0].compose(&self.b.value(&prev).inverse()));
        }
        let c = self.base.retreat(w);
        if self.inside(&c) {
            let t = self.triple(&c)?;
            let prev = self.base.retreat(&c);
            return Ok(t[1]
                .compose(&t[0])
                .compose(&self.b.value(&prev).inverse())
                .compose(&self.b.value(&c).inverse()));
        }
        Ok(P::M::identity())
    }
}

/// Builds Φ and Ψ for B equal to A off K, on `grid` points of 𝕋.
pub fn build_local_conjugacy<P, A, B>(class: &P, a: &A, b: &B, arc: Arc, grid: usize) -> Result<LocalConjugacy<P::M>>
where
    P: ProjectionClass,
    A: CocycleMap<Fiber = P::M>,
    B: CocycleMap<Fiber = P::M>,
{
    let base = *a.base();
    if grid < 2 {
        return Err(Error::InvalidInput("grid needs at least two points".into()));
    }
    arc.check_disjoint(base.frequency().value())?;
    let pw = Pointwise { class, a, b, base, arc };
    let xs: Vec<f64> = (0..grid).map(|j| j as f64 / grid as f64).collect();
    let pt = |x: f64| base.point(x);
    for &x in &xs {
        let w = pt(x);
        if !arc.contains(x) {
            let (ma, mb) = (a.value(&w), b.value(&w));
            if class.distance(&ma, &mb) > 1e-15 * (1.0 + ma.norm()) {
                return Err(Error::InvalidInput(format!("B differs from A outside K at ω = {x:.6}")));
            }
        }
    }
    let rows = par::map(grid, |j| -> Result<(P::M, P::M, f64, f64)> {
        let w = pt(xs[j]);
        let phi = pw.phi(&w)?;
        let psi = pw.psi(&w)?;
        let lhs = pw.psi(&base.advance(&w))?.compose(&b.value(&w)).compose(&psi.inverse());
        let res = class.distance(&lhs, &phi) / (1.0 + phi.norm());
        Ok((phi, psi, res, class.class_defect(&phi)))
    });
    let mut phi = Vec::with_capacity(grid);
    let mut psi = Vec::with_capacity(grid);
    let (mut max_residual, mut max_class_defect) = (0.0f64, 0.0f64);
    for r in rows {
        let (f, s, res, def) = r?;
        phi.push(f);
        psi.push(s);
        max_residual = max_residual.max(res);
        max_class_defect = max_class_defect.max(def);
    }
    let mut out = LocalConjugacy { arc, grid: xs, phi, psi, max_residual, max_class_defect, interpolation_error: 0.0 };
    let mids = par::map(grid, |j| -> Result<f64> {
        let x = (j as f64 + 0.5) / grid as f64;
        let w = pt(x);
        let e1 = class.distance(&out.interpolate(class, &out.phi, x), &pw.phi(&w)?);
        let e2 = class.distance(&out.interpolate(class, &out.psi, x), &pw.psi(&w)?);
        Ok(e1.max(e2))
    });
    for m in mids {
        out.interpolation_error = out.interpolation_error.max(m?);
    }
    Ok(out)
}
