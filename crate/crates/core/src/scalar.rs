//! Scalar abstraction shared by every numerical module.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Boltzmann constant, J/K (exact SI value).
pub const BOLTZMANN: f64 = 1.380649e-23;

/// Floating-point scalar the laboratory can run on (`f32` or `f64`).
///
/// Everything the linear algebra needs comes from [`RealField`]; conversions
/// to and from literals go through `num-traits`.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Default {
    /// Relative residual accepted from the stationary Lyapunov solver.
    const LYAPUNOV_TOLERANCE: f64;
    /// Short type name, recorded in manifests.
    const NAME: &'static str;
    /// Smallest positive normal value.
    const TINY: f64;

    /// Converts an `f64` literal into this scalar.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal must be representable")
    }

    #[inline]
    fn count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("count must be representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Boltzmann constant in this scalar type.
    #[inline]
    fn boltzmann() -> Self {
        Self::lit(BOLTZMANN)
    }

    #[inline]
    fn tiny() -> Self {
        Self::lit(Self::TINY)
    }

    #[inline]
    fn epsilon() -> Self {
        Self::default_epsilon()
    }

    #[inline]
    fn is_finite_value(self) -> bool {
        self.as_f64().is_finite()
    }
}

impl Real for f64 {
    const LYAPUNOV_TOLERANCE: f64 = 1e-10;
    const NAME: &'static str = "f64";
    const TINY: f64 = f64::MIN_POSITIVE;
}

impl Real for f32 {
    const LYAPUNOV_TOLERANCE: f64 = 1e-4;
    const NAME: &'static str = "f32";
    const TINY: f64 = f32::MIN_POSITIVE as f64;
}

/// A scalar estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Estimate<T> {
    pub value: T,
    pub std_error: T,
}

impl<T: Real> Estimate<T> {
    pub fn new(value: T, std_error: T) -> Self {
        Self { value, std_error }
    }

    pub fn exact(value: T) -> Self {
        Self { value, std_error: T::zero() }
    }

    /// Symmetric confidence interval of `k` standard errors.
    pub fn interval(&self, k: T) -> (T, T) {
        (self.value - k * self.std_error, self.value + k * self.std_error)
    }

    /// Number of joint standard errors separating two estimates
    /// (errors combined in quadrature). Infinite if both errors vanish and
    /// the values differ.
    pub fn z_score(&self, other: &Self) -> T {
        let diff = (self.value - other.value).abs();
        let joint = (self.std_error * self.std_error + other.std_error * other.std_error).sqrt();
        if joint > T::zero() {
            diff / joint
        } else if diff == T::zero() {
            T::zero()
        } else {
            T::lit(f64::INFINITY)
        }
    }

    /// Difference against an exact reference value in standard errors.
    pub fn z_against(&self, reference: T) -> T {
        self.z_score(&Self::exact(reference))
    }

    pub fn scale(&self, factor: T) -> Self {
        Self::new(self.value * factor, self.std_error * factor.abs())
    }
}
