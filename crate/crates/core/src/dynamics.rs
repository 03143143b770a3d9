//! Base dynamics on the torus and trigonometric-polynomial sampling functions.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// `x - floor(x)`, with the rounding edge case `1.0` folded back to `0.0`.
#[inline]
pub fn frac(x: f64) -> f64 {
    let y = x - x.floor();
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}

/// Distance from `x` to the nearest integer.
#[inline]
pub fn dist_to_int(x: f64) -> f64 {
    let y = frac(x);
    y.min(1.0 - y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Frequency(f64);

impl Frequency {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_finite() && alpha > 0.0 && alpha < 1.0 {
            Ok(Frequency(alpha))
        } else {
            Err(Error::InvalidInput(format!("frequency must lie in (0,1), got {alpha}")))
        }
    }

    /// The golden-mean frequency (√5 − 1)/2.
    pub fn golden() -> Self {
        Frequency((5f64.sqrt() - 1.0) / 2.0)
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// min over 1 ≤ n ≤ n_max of ‖nα‖.
    pub fn diophantine_margin(self, n_max: u32) -> f64 {
        (1..=n_max.max(1))
            .map(|n| dist_to_int(n as f64 * self.0))
            .fold(f64::INFINITY, f64::min)
    }
}

impl TryFrom<f64> for Frequency {
    type Error = Error;
    fn try_from(alpha: f64) -> Result<Self> {
        Frequency::new(alpha)
    }
}

impl From<Frequency> for f64 {
    fn from(f: Frequency) -> f64 {
        f.0
    }
}

/// A point of 𝕋 or 𝕋², coordinates in [0,1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusPoint {
    c: [f64; 2],
    dim: u8,
}

impl TorusPoint {
    pub fn one(x: f64) -> Self {
        TorusPoint { c: [frac(x), 0.0], dim: 1 }
    }

    pub fn two(x: f64, y: f64) -> Self {
        TorusPoint { c: [frac(x), frac(y)], dim: 2 }
    }

    pub fn from_coords(coords: &[f64]) -> Result<Self> {
        match *coords {
            [x] => Ok(Self::one(x)),
            [x, y] => Ok(Self::two(x, y)),
            _ => Err(Error::InvalidInput(format!(
                "torus points have 1 or 2 coordinates, got {}",
                coords.len()
            ))),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[f64] {
        &self.c[..self.dim as usize]
    }

    /// First coordinate; the input to 1-d sampling functions on either base.
    #[inline]
    pub fn x(&self) -> f64 {
        self.c[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "alpha", rename_all = "snake_case")]
pub enum BaseDynamics {
    TorusRotation(Frequency),
    SkewShift(Frequency),
}

impl BaseDynamics {
    pub fn rotation(alpha: f64) -> Result<Self> {
        Ok(BaseDynamics::TorusRotation(Frequency::new(alpha)?))
    }

    pub fn skew_shift(alpha: f64) -> Result<Self> {
        Ok(BaseDynamics::SkewShift(Frequency::new(alpha)?))
    }

    pub fn dimension(&self) -> usize {
        match self {
            BaseDynamics::TorusRotation(_) => 1,
            BaseDynamics::SkewShift(_) => 2,
        }
    }

    pub fn frequency(&self) -> Frequency {
        match *self {
            BaseDynamics::TorusRotation(f) | BaseDynamics::SkewShift(f) => f,
        }
    }

    /// Point of the right dimension with first coordinate `x` (second coordinate 0).
    pub fn point(&self, x: f64) -> TorusPoint {
        match self {
            BaseDynamics::TorusRotation(_) => TorusPoint::one(x),
            BaseDynamics::SkewShift(_) => TorusPoint::two(x, 0.0),
        }
    }

    /// Grid point `j` of `n`: `j/n` on 𝕋, a Kronecker sequence on 𝕋².
    pub fn grid_point(&self, j: usize, n: usize) -> TorusPoint {
        let x = j as f64 / n as f64;
        match self {
            BaseDynamics::TorusRotation(_) => TorusPoint::one(x),
            BaseDynamics::SkewShift(_) => {
                TorusPoint::two(x, j as f64 * Frequency::golden().value())
            }
        }
    }

    fn check(&self, omega: &TorusPoint) -> Result<()> {
        if omega.dim() == self.dimension() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "point of dimension {} on a base of dimension {}",
                omega.dim(),
                self.dimension()
            )))
        }
    }

    pub fn step(&self, omega: &TorusPoint) -> Result<TorusPoint> {
        self.check(omega)?;
        Ok(self.advance(omega))
    }

    pub fn inverse_step(&self, omega: &TorusPoint) -> Result<TorusPoint> {
        self.check(omega)?;
        Ok(self.retreat(omega))
    }

    /// `step` without the dimension check.
    #[inline]
    pub fn advance(&self, omega: &TorusPoint) -> TorusPoint {
        match *self {
            BaseDynamics::TorusRotation(f) => TorusPoint::one(omega.c[0] + f.0),
            BaseDynamics::SkewShift(f) => {
                TorusPoint::two(omega.c[0] + f.0, omega.c[0] + omega.c[1])
            }
        }
    }

    /// `inverse_step` without the dimension check.
    #[inline]
    pub fn retreat(&self, omega: &TorusPoint) -> TorusPoint {
        match *self {
            BaseDynamics::TorusRotation(f) => TorusPoint::one(omega.c[0] - f.0),
            BaseDynamics::SkewShift(f) => {
                let x = frac(omega.c[0] - f.0);
                TorusPoint::two(x, omega.c[1] - x)
            }
        }
    }

    /// Tⁿω for any integer n.
    pub fn iterate(&self, omega: &TorusPoint, n: i64) -> Result<TorusPoint> {
        self.check(omega)?;
        let mut p = *omega;
        if let BaseDynamics::TorusRotation(f) = *self {
            // closed form avoids accumulating n roundings
            return Ok(TorusPoint::one(p.c[0] + frac(n as f64 * f.0)));
        }
        for _ in 0..n.unsigned_abs() {
            p = if n > 0 { self.advance(&p) } else { self.retreat(&p) };
        }
        Ok(p)
    }

    pub fn orbit(&self, omega0: &TorusPoint, n: usize) -> Result<Vec<TorusPoint>> {
        self.check(omega0)?;
        let mut out = Vec::with_capacity(n);
        let mut p = *omega0;
        for _ in 0..n {
            out.push(p);
            p = self.advance(&p);
        }
        Ok(out)
    }
}

/// Real trigonometric polynomial Σ_{|k|≤d} ĥ_k e^{2πikω} with ĥ_{−k} = conj(ĥ_k).
///
/// Only the coefficients with k ≥ 0 are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly {
    pos: Vec<Complex64>,
}

const REALITY_TOL: f64 = 1e-12;

impl TrigPoly {
    pub fn zero() -> Self {
        TrigPoly { pos: vec![Complex64::new(0.0, 0.0)] }
    }

    pub fn constant(c: f64) -> Self {
        TrigPoly { pos: vec![Complex64::new(c, 0.0)] }
    }

    /// `amp · cos 2πkω`.
    pub fn cos(k: usize, amp: f64) -> Self {
        let mut p = vec![Complex64::new(0.0, 0.0); k + 1];
        p[k] += Complex64::new(if k == 0 { amp } else { amp / 2.0 }, 0.0);
        TrigPoly { pos: p }
    }

    /// `amp · sin 2πkω`.
    pub fn sin(k: usize, amp: f64) -> Self {
        let mut p = vec![Complex64::new(0.0, 0.0); k + 1];
        if k > 0 {
            p[k] = Complex64::new(0.0, -amp / 2.0);
        }
        TrigPoly { pos: p }
    }

    /// Builds from `(k, ĥ_k)` pairs over positive and negative k, checking reality.
    pub fn from_pairs(pairs: &[(i64, Complex64)]) -> Result<Self> {
        let degree = pairs.iter().map(|(k, _)| k.unsigned_abs() as usize).max().unwrap_or(0);
        let mut full = vec![Complex64::new(0.0, 0.0); 2 * degree + 1];
        for &(k, c) in pairs {
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::InvalidInput(format!("non-finite coefficient at k={k}")));
            }
            full[(k + degree as i64) as usize] += c;
        }
        let d = degree as i64;
        for k in 0..=d {
            let plus = full[(k + d) as usize];
            let minus = full[(d - k) as usize];
            if (plus - minus.conj()).norm() > REALITY_TOL {
                return Err(Error::InvalidInput(format!(
                    "reality violated at k={k}: c_k={plus}, c_-k={minus}"
                )));
            }
        }
        let pos = (0..=d)
            .map(|k| {
                let plus = full[(k + d) as usize];
                let minus = full[(d - k) as usize];
                if k == 0 {
                    Complex64::new(plus.re, 0.0)
                } else {
                    (plus + minus.conj()) / 2.0
                }
            })
            .collect();
        Ok(TrigPoly { pos })
    }

    /// Builds from the k ≥ 0 half; ĥ₀ must be real.
    pub fn from_nonnegative(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Ok(Self::zero());
        }
        if coeffs[0].im.abs() > REALITY_TOL {
            return Err(Error::InvalidInput("constant coefficient must be real".into()));
        }
        let mut pos = coeffs;
        pos[0].im = 0.0;
        Ok(TrigPoly { pos })
    }

    pub fn degree(&self) -> usize {
        self.pos.len() - 1
    }

    pub fn coefficient(&self, k: i64) -> Complex64 {
        match self.pos.get(k.unsigned_abs() as usize) {
            Some(&c) if k >= 0 => c,
            Some(&c) => c.conj(),
            None => Complex64::new(0.0, 0.0),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.pos.iter().all(|c| c.norm() == 0.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        TrigPoly { pos: self.pos.iter().map(|c| c * s).collect() }
    }

    pub fn add(&self, other: &TrigPoly) -> Self {
        let n = self.pos.len().max(other.pos.len());
        let get = |v: &Vec<Complex64>, k: usize| v.get(k).copied().unwrap_or_default();
        TrigPoly { pos: (0..n).map(|k| get(&self.pos, k) + get(&other.pos, k)).collect() }
    }

    #[inline]
    pub fn eval(&self, omega: f64) -> f64 {
        let mut acc = self.pos[0].re;
        if self.pos.len() > 1 {
            let z = Complex64::cis(TAU * omega);
            let mut zk = z;
            for c in &self.pos[1..] {
                acc += 2.0 * (c * zk).re;
                zk *= z;
            }
        }
        acc
    }

    #[inline]
    pub fn eval_at(&self, omega: &TorusPoint) -> f64 {
        self.eval(omega.x())
    }

    /// Holomorphic extension evaluated at ω + iε.
    pub fn eval_complex(&self, omega: f64, eps: f64) -> Complex64 {
        let mut acc = Complex64::new(self.pos[0].re, 0.0);
        for (k, c) in self.pos.iter().enumerate().skip(1) {
            let kf = k as f64;
            let rot = Complex64::cis(TAU * kf * omega);
            let damp = (-TAU * kf * eps).exp();
            acc += c * rot * damp + c.conj() * rot.conj() / damp;
        }
        acc
    }

    /// (min, max) over an n-point grid of 𝕋.
    pub fn range_on_grid(&self, n: usize) -> (f64, f64) {
        (0..n).map(|j| self.eval(j as f64 / n as f64)).fold(
            (f64::INFINITY, f64::NEG_INFINITY),
            |(lo, hi), v| (lo.min(v), hi.max(v)),
        )
    }
}

/// Ĥ_k of a TrigPoly.
pub fn fourier_coefficient(p: &TrigPoly, k: i64) -> Complex64 {
    p.coefficient(k)
}

pub fn eval_trigpoly(p: &TrigPoly, omega: &TorusPoint) -> f64 {
    p.eval_at(omega)
}

pub fn step(base: &BaseDynamics, omega: &TorusPoint) -> Result<TorusPoint> {
    base.step(omega)
}

pub fn orbit(base: &BaseDynamics, omega0: &TorusPoint, n: usize) -> Result<Vec<TorusPoint>> {
    base.orbit(omega0, n)
}

#[derive(Serialize, Deserialize)]
struct TrigPolyJson {
    degree: usize,
    coeffs: Vec<(i64, f64, f64)>,
}

impl Serialize for TrigPoly {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let d = self.degree() as i64;
        let coeffs = (-d..=d)
            .map(|k| {
                let c = self.coefficient(k);
                (k, c.re, c.im)
            })
            .collect();
        TrigPolyJson { degree: self.degree(), coeffs }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for TrigPoly {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = TrigPolyJson::deserialize(d)?;
        if let Some((k, _, _)) = raw.coeffs.iter().find(|(k, _, _)| k.unsigned_abs() as usize > raw.degree) {
            return Err(D::Error::custom(format!("coefficient index {k} exceeds degree {}", raw.degree)));
        }
        let mut pairs: Vec<(i64, Complex64)> =
            raw.coeffs.iter().map(|&(k, re, im)| (k, Complex64::new(re, im))).collect();
        pairs.push((raw.degree as i64, Complex64::new(0.0, 0.0)));
        TrigPoly::from_pairs(&pairs).map_err(D::Error::custom)
    }
}
