//! Cocycles over the base dynamics: fiber algebra, products, rotation number,
//! Lyapunov exponent, uniform-hyperbolicity certificates and regimes.

mod matrix;
mod regime;
mod rotation;
mod uh;

pub use matrix::{
    exp_traceless, line_angle, line_distance, sl2r_to_su11, su11_to_sl2r, Mat2, Mat2C, Mat2H,
};
pub use regime::{classify_regime, complex_lyapunov, AnalyticCocycle, Regime, RegimeLabel};
pub use rotation::{rotation_number, Convergence, RotationEstimate};
pub use uh::{certify_uniform_hyperbolicity, UhCertificate, UhEvidence, Verdict};

use crate::dynamics::{BaseDynamics, TorusPoint};
use crate::error::{Error, Result};
use crate::par;

/// Matrix group a cocycle takes values in.
pub trait Fiber: Copy + Send + Sync + std::fmt::Debug {
    fn identity() -> Self;
    fn compose(&self, rhs: &Self) -> Self;
    fn inverse(&self) -> Self;
    fn norm(&self) -> f64;
    fn scaled(&self, s: f64) -> Self;
    /// |det − 1|, or the analogous structural defect.
    fn defect(&self) -> f64;
    /// Orientation-preserving action on ℝ².
    fn to_real(&self) -> Mat2;
}

impl Fiber for Mat2 {
    fn identity() -> Self {
        Mat2::IDENTITY
    }
    #[inline]
    fn compose(&self, rhs: &Self) -> Self {
        *self * *rhs
    }
    #[inline]
    fn inverse(&self) -> Self {
        Mat2::inverse(self)
    }
    #[inline]
    fn norm(&self) -> f64 {
        Mat2::norm(self)
    }
    #[inline]
    fn scaled(&self, s: f64) -> Self {
        self.scale(s)
    }
    fn defect(&self) -> f64 {
        (self.det() - 1.0).abs()
    }
    #[inline]
    fn to_real(&self) -> Mat2 {
        *self
    }
}

impl Fiber for Mat2H {
    fn identity() -> Self {
        Mat2H::IDENTITY
    }
    #[inline]
    fn compose(&self, rhs: &Self) -> Self {
        *self * *rhs
    }
    #[inline]
    fn inverse(&self) -> Self {
        Mat2H::inverse(self)
    }
    #[inline]
    fn norm(&self) -> f64 {
        Mat2H::norm(self)
    }
    #[inline]
    fn scaled(&self, s: f64) -> Self {
        self.scale(s)
    }
    fn defect(&self) -> f64 {
        (self.det() - 1.0).abs()
    }
    #[inline]
    fn to_real(&self) -> Mat2 {
        self.projective()
    }
}

/// A map ω ↦ A(ω) over a base.
pub trait CocycleMap: Sync {
    type Fiber: Fiber;
    fn base(&self) -> &BaseDynamics;
    fn value(&self, omega: &TorusPoint) -> Self::Fiber;
    fn homotopic_to_constant(&self) -> bool {
        true
    }
}

impl<C: CocycleMap> CocycleMap for &C {
    type Fiber = C::Fiber;
    fn base(&self) -> &BaseDynamics {
        (*self).base()
    }
    fn value(&self, omega: &TorusPoint) -> Self::Fiber {
        (*self).value(omega)
    }
    fn homotopic_to_constant(&self) -> bool {
        (*self).homotopic_to_constant()
    }
}

/// ω-independent cocycle.
#[derive(Debug, Clone, Copy)]
pub struct ConstantCocycle<F> {
    pub base: BaseDynamics,
    pub value: F,
}

impl<F: Fiber> CocycleMap for ConstantCocycle<F> {
    type Fiber = F;
    fn base(&self) -> &BaseDynamics {
        &self.base
    }
    fn value(&self, _: &TorusPoint) -> F {
        self.value
    }
}

/// Cocycle from a closure.
pub struct FnCocycle<F, G> {
    pub base: BaseDynamics,
    pub f: G,
    pub homotopic: bool,
    _fiber: std::marker::PhantomData<fn() -> F>,
}

impl<F, G> FnCocycle<F, G>
where
    F: Fiber,
    G: Fn(&TorusPoint) -> F + Sync,
{
    pub fn new(base: BaseDynamics, f: G) -> Self {
        FnCocycle { base, f, homotopic: true, _fiber: std::marker::PhantomData }
    }
}

impl<F, G> CocycleMap for FnCocycle<F, G>
where
    F: Fiber,
    G: Fn(&TorusPoint) -> F + Sync,
{
    type Fiber = F;
    fn base(&self) -> &BaseDynamics {
        &self.base
    }
    fn value(&self, omega: &TorusPoint) -> F {
        (self.f)(omega)
    }
    fn homotopic_to_constant(&self) -> bool {
        self.homotopic
    }
}

/// Product `exp(log_scale) · matrix`.
#[derive(Debug, Clone, Copy)]
pub struct Product<F> {
    pub matrix: F,
    pub log_scale: f64,
}

impl<F: Fiber> Product<F> {
    pub fn identity() -> Self {
        Product { matrix: F::identity(), log_scale: 0.0 }
    }

    /// log of the operator norm of the full product.
    pub fn log_norm(&self) -> f64 {
        self.matrix.norm().ln() + self.log_scale
    }

    /// The product with the scale folded back in; may overflow.
    pub fn value(&self) -> F {
        self.matrix.scaled(self.log_scale.exp())
    }

    /// `lhs · self`, renormalizing once the norm passes 1e150.
    #[inline]
    pub fn push_left(&mut self, lhs: &F) {
        self.matrix = lhs.compose(&self.matrix);
        let n = self.matrix.norm();
        if n > RENORM {
            self.matrix = self.matrix.scaled(1.0 / n);
            self.log_scale += n.ln();
        }
    }
}

const RENORM: f64 = 1e150;

/// Aⁿ(ω): A(Tⁿ⁻¹ω)⋯A(ω) for n > 0, identity for n = 0, and
/// A(Tⁿω)⁻¹⋯A(T⁻¹ω)⁻¹ for n < 0.
pub fn iterate<C: CocycleMap>(c: &C, omega: &TorusPoint, n: i64) -> Result<Product<C::Fiber>> {
    let base = c.base();
    if omega.dim() != base.dimension() {
        return Err(Error::InvalidInput(format!(
            "point of dimension {} on a base of dimension {}",
            omega.dim(),
            base.dimension()
        )));
    }
    let mut p = Product::identity();
    let mut x = *omega;
    if n >= 0 {
        for _ in 0..n {
            p.push_left(&c.value(&x));
            x = base.advance(&x);
        }
    } else {
        for _ in 0..n.unsigned_abs() {
            x = base.retreat(&x);
            p.push_left(&c.value(&x).inverse());
        }
    }
    Ok(p)
}

/// (1/n) log‖Aⁿ(ω)‖ averaged over `omega_samples` grid phases.
pub fn lyapunov_exponent<C: CocycleMap>(c: &C, n: usize, omega_samples: usize) -> Result<f64> {
    if n < 1000 {
        return Err(Error::InvalidInput(format!("lyapunov_exponent needs n ≥ 1000, got {n}")));
    }
    if omega_samples == 0 {
        return Err(Error::InvalidInput("omega_samples must be positive".into()));
    }
    let base = *c.base();
    let rates = par::map(omega_samples, |j| {
        let mut x = base.grid_point(j, omega_samples);
        let mut p = Product::<C::Fiber>::identity();
        for _ in 0..n {
            p.push_left(&c.value(&x));
            x = base.advance(&x);
        }
        p.log_norm() / n as f64
    });
    Ok(rates.iter().sum::<f64>() / omega_samples as f64)
}
