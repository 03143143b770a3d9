use std::f64::consts::PI;
use std::ops::Mul;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DET_TOL: f64 = 1e-10;

/// Real 2×2 matrix; constructed values of the cocycle layer have unit determinant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub m11: f64,
    pub m12: f64,
    pub m21: f64,
    pub m22: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 { m11: 1.0, m12: 0.0, m21: 0.0, m22: 1.0 };

    /// Checked constructor: |det − 1| < 1e-10.
    pub fn new(m11: f64, m12: f64, m21: f64, m22: f64) -> Result<Self> {
        let m = Mat2 { m11, m12, m21, m22 };
        if (m.det() - 1.0).abs() < DET_TOL {
            Ok(m)
        } else {
            Err(Error::InvalidInput(format!("determinant {} is not 1", m.det())))
        }
    }

    #[inline]
    pub const fn raw(m11: f64, m12: f64, m21: f64, m22: f64) -> Self {
        Mat2 { m11, m12, m21, m22 }
    }

    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Mat2::raw(c, -s, s, c)
    }

    pub fn diag(a: f64, d: f64) -> Self {
        Mat2::raw(a, 0.0, 0.0, d)
    }

    #[inline]
    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m21
    }

    #[inline]
    pub fn trace(&self) -> f64 {
        self.m11 + self.m22
    }

    #[inline]
    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.m11 * v[0] + self.m12 * v[1], self.m21 * v[0] + self.m22 * v[1]]
    }

    /// Inverse (adjugate over determinant).
    #[inline]
    pub fn inverse(&self) -> Self {
        let d = self.det();
        Mat2::raw(self.m22 / d, -self.m12 / d, -self.m21 / d, self.m11 / d)
    }

    pub fn transpose(&self) -> Self {
        Mat2::raw(self.m11, self.m21, self.m12, self.m22)
    }

    #[inline]
    pub fn scale(&self, s: f64) -> Self {
        Mat2::raw(self.m11 * s, self.m12 * s, self.m21 * s, self.m22 * s)
    }

    pub fn sub(&self, o: &Mat2) -> Self {
        Mat2::raw(self.m11 - o.m11, self.m12 - o.m12, self.m21 - o.m21, self.m22 - o.m22)
    }

    pub fn add(&self, o: &Mat2) -> Self {
        Mat2::raw(self.m11 + o.m11, self.m12 + o.m12, self.m21 + o.m21, self.m22 + o.m22)
    }

    #[inline]
    pub fn frobenius_sq(&self) -> f64 {
        self.m11 * self.m11 + self.m12 * self.m12 + self.m21 * self.m21 + self.m22 * self.m22
    }

    /// Largest entry in absolute value.
    pub fn max_abs(&self) -> f64 {
        self.m11.abs().max(self.m12.abs()).max(self.m21.abs()).max(self.m22.abs())
    }

    /// Singular values (σ₁ ≥ σ₂).
    #[inline]
    pub fn singular_values(&self) -> (f64, f64) {
        let m = self.max_abs();
        if m == 0.0 || !m.is_finite() {
            return (m, m);
        }
        let u = self.scale(1.0 / m);
        let f = u.frobenius_sq();
        let d = u.det().abs();
        let disc = ((f - 2.0 * d) * (f + 2.0 * d)).max(0.0).sqrt();
        let s1 = ((f + disc) / 2.0).sqrt();
        let s2 = if s1 > 0.0 { d / s1 } else { 0.0 };
        (m * s1, m * s2)
    }

    /// Operator 2-norm.
    #[inline]
    pub fn norm(&self) -> f64 {
        self.singular_values().0
    }

    /// Angle in [0, π) of the most expanded input direction.
    pub fn top_right_direction(&self) -> f64 {
        let p = self.m11 * self.m11 + self.m21 * self.m21;
        let q = self.m11 * self.m12 + self.m21 * self.m22;
        let r = self.m12 * self.m12 + self.m22 * self.m22;
        line_angle(0.5 * (2.0 * q).atan2(p - r))
    }

    /// Angle in [0, π) of the most contracted input direction.
    pub fn bottom_right_direction(&self) -> f64 {
        line_angle(self.top_right_direction() + PI / 2.0)
    }

    /// Angle in [0, π) of the image of the most expanded direction.
    pub fn top_left_direction(&self) -> f64 {
        self.transpose().top_right_direction()
    }

    /// Rotation angle of the polar factor, in (−π, π].
    #[inline]
    pub fn polar_angle(&self) -> f64 {
        (self.m21 - self.m12).atan2(self.m11 + self.m22)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    #[inline]
    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::raw(
            self.m11 * o.m11 + self.m12 * o.m21,
            self.m11 * o.m12 + self.m12 * o.m22,
            self.m21 * o.m11 + self.m22 * o.m21,
            self.m21 * o.m12 + self.m22 * o.m22,
        )
    }
}

/// Reduce an angle to the projective line [0, π).
#[inline]
pub fn line_angle(a: f64) -> f64 {
    let r = a.rem_euclid(PI);
    if r >= PI {
        0.0
    } else {
        r
    }
}

/// Distance between two lines given by angles, in [0, π/2].
#[inline]
pub fn line_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

/// Element [[a, b], [b̄, ā]] of SU(1,1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2H {
    pub a: Complex64,
    pub b: Complex64,
}

impl Mat2H {
    pub const IDENTITY: Mat2H =
        Mat2H { a: Complex64 { re: 1.0, im: 0.0 }, b: Complex64 { re: 0.0, im: 0.0 } };

    /// Checked constructor: ||a|² − |b|² − 1| < 1e-10.
    pub fn new(a: Complex64, b: Complex64) -> Result<Self> {
        let m = Mat2H { a, b };
        if (m.det() - 1.0).abs() < DET_TOL {
            Ok(m)
        } else {
            Err(Error::InvalidInput(format!("|a|²−|b|² = {} is not 1", m.det())))
        }
    }

    #[inline]
    pub const fn raw(a: Complex64, b: Complex64) -> Self {
        Mat2H { a, b }
    }

    /// |a|² − |b|².
    #[inline]
    pub fn det(&self) -> f64 {
        self.a.norm_sqr() - self.b.norm_sqr()
    }

    #[inline]
    pub fn inverse(&self) -> Self {
        let d = self.det();
        Mat2H { a: self.a.conj() / d, b: -self.b / d }
    }

    #[inline]
    pub fn scale(&self, s: f64) -> Self {
        Mat2H { a: self.a * s, b: self.b * s }
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.a.norm() + self.b.norm()
    }

    pub fn to_complex(&self) -> Mat2C {
        Mat2C([self.a, self.b, self.b.conj(), self.a.conj()])
    }

    /// Orientation-preserving real form: the conjugate of `su11_to_sl2r(self)`
    /// by diag(1, −1). diag(e^{iφ}, e^{−iφ}) maps to the counterclockwise
    /// rotation by φ.
    #[inline]
    pub fn projective(&self) -> Mat2 {
        let (ar, ai, br, bi) = (self.a.re, self.a.im, self.b.re, self.b.im);
        Mat2::raw(ar + br, bi - ai, ai + bi, ar - br)
    }

    pub fn max_abs_diff(&self, o: &Mat2H) -> f64 {
        (self.a - o.a).norm().max((self.b - o.b).norm())
    }
}

impl Mul for Mat2H {
    type Output = Mat2H;
    #[inline]
    fn mul(self, o: Mat2H) -> Mat2H {
        Mat2H { a: self.a * o.a + self.b * o.b.conj(), b: self.a * o.b + self.b * o.a.conj() }
    }
}

/// General complex 2×2 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2C(pub [Complex64; 4]);

impl Mat2C {
    pub fn identity() -> Self {
        let o = Complex64::new(1.0, 0.0);
        let z = Complex64::new(0.0, 0.0);
        Mat2C([o, z, z, o])
    }

    pub fn from_real(m: &Mat2) -> Self {
        Mat2C([m.m11.into(), m.m12.into(), m.m21.into(), m.m22.into()])
    }

    #[inline]
    pub fn det(&self) -> Complex64 {
        self.0[0] * self.0[3] - self.0[1] * self.0[2]
    }

    pub fn inverse(&self) -> Self {
        let d = self.det();
        let [a, b, c, e] = self.0;
        Mat2C([e / d, -b / d, -c / d, a / d])
    }

    #[inline]
    pub fn scale(&self, s: f64) -> Self {
        let [a, b, c, d] = self.0;
        Mat2C([a * s, b * s, c * s, d * s])
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        let m = self.0.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if m == 0.0 || !m.is_finite() {
            return m;
        }
        let u = self.scale(1.0 / m);
        let f: f64 = u.0.iter().map(|z| z.norm_sqr()).sum();
        let d = u.det().norm();
        let disc = ((f - 2.0 * d) * (f + 2.0 * d)).max(0.0).sqrt();
        m * ((f + disc) / 2.0).sqrt()
    }

    pub fn max_abs_imag(&self) -> f64 {
        self.0.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }
}

impl Mul for Mat2C {
    type Output = Mat2C;
    #[inline]
    fn mul(self, o: Mat2C) -> Mat2C {
        let [a, b, c, d] = self.0;
        let [e, f, g, h] = o.0;
        Mat2C([a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h])
    }
}

fn cayley() -> (Mat2C, Mat2C) {
    let s = Complex64::new(1.0, 1.0).inv();
    let i = Complex64::i();
    let one = Complex64::new(1.0, 0.0);
    let m = Mat2C([s, -i * s, s, i * s]);
    let m_inv = Mat2C([i * s, i * s, -one * s, one * s]);
    (m, m_inv)
}

/// M⁻¹ m M with M = (1/(1+i))[[1, −i], [1, i]].
pub fn su11_to_sl2r(m: &Mat2H) -> Result<Mat2> {
    if (m.det() - 1.0).abs() >= DET_TOL {
        return Err(Error::InvalidInput(format!("not in SU(1,1): |a|²−|b|² = {}", m.det())));
    }
    let (cm, cm_inv) = cayley();
    let r = cm_inv * m.to_complex() * cm;
    let scale = m.norm().max(1.0);
    if r.max_abs_imag() > 1e-10 * scale {
        return Err(Error::InvalidInput("conjugate is not real".into()));
    }
    let [p, q, s, t] = r.0;
    Mat2::new(p.re, q.re, s.re, t.re)
}

/// M m M⁻¹, the inverse of [`su11_to_sl2r`].
pub fn sl2r_to_su11(m: &Mat2) -> Result<Mat2H> {
    let (cm, cm_inv) = cayley();
    let r = cm * Mat2C::from_real(m) * cm_inv;
    let [a, b, c, d] = r.0;
    let scale = m.max_abs().max(1.0);
    if (c - b.conj()).norm() > 1e-10 * scale || (d - a.conj()).norm() > 1e-10 * scale {
        return Err(Error::InvalidInput("conjugate lacks SU(1,1) structure".into()));
    }
    Mat2H::new(a, b)
}

/// exp of the traceless matrix [[x, y], [z, −x]].
pub fn exp_traceless(x: f64, y: f64, z: f64) -> Mat2 {
    let d = x * x + y * z;
    let (c, s) = if d > 0.0 {
        let r = d.sqrt();
        (r.cosh(), if r > 0.0 { r.sinh() / r } else { 1.0 })
    } else if d < 0.0 {
        let r = (-d).sqrt();
        (r.cos(), r.sin() / r)
    } else {
        (1.0, 1.0)
    };
    Mat2::raw(c + s * x, s * y, s * z, c - s * x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_directions() {
        let m = Mat2::diag(3.0, 1.0 / 3.0);
        assert!(line_distance(m.top_right_direction(), 0.0) < 1e-14);
        assert!(line_distance(m.bottom_right_direction(), PI / 2.0) < 1e-14);
        let (s1, s2) = m.singular_values();
        assert!((s1 - 3.0).abs() < 1e-14 && (s2 - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn exp_traceless_matches_series() {
        for &(x, y, z) in &[(0.3, 0.1, -0.2), (0.0, 1.0, -1.0), (0.2, 0.5, 0.4), (0.0, 0.0, 0.0)] {
            let a = Mat2::raw(x, y, z, -x);
            let mut term = Mat2::IDENTITY;
            let mut sum = Mat2::IDENTITY;
            for k in 1..40 {
                term = (term * a).scale(1.0 / k as f64);
                sum = sum.add(&term);
            }
            let e = exp_traceless(x, y, z);
            assert!(e.sub(&sum).max_abs() < 1e-13);
            assert!((e.det() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn projective_matches_flipped_conjugation() {
        let a = Complex64::new(1.1, 0.5);
        let b = Complex64::new(0.3, -0.2);
        let s = (a.norm_sqr() - b.norm_sqr()).sqrt();
        let m = Mat2H::new(a / s, b / s).unwrap();
        let r = su11_to_sl2r(&m).unwrap();
        let p = m.projective();
        assert!((p.m11 - r.m11).abs() < 1e-14 && (p.m22 - r.m22).abs() < 1e-14);
        assert!((p.m12 + r.m12).abs() < 1e-14 && (p.m21 + r.m21).abs() < 1e-14);
    }
}
