//! Scalar abstraction for the closed-form math layer.

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar the closed-form layer is generic over: `f32` or `f64`.
pub trait Scalar: Float + FromPrimitive + std::fmt::Debug + Send + Sync + 'static {
    fn pi() -> Self {
        Self::from_f64(std::f64::consts::PI).unwrap()
    }

    fn ln_2() -> Self {
        Self::from_f64(std::f64::consts::LN_2).unwrap()
    }

    /// Torus period (the side length 4).
    fn period() -> Self {
        Self::from_f64(4.0).unwrap()
    }

    fn half() -> Self {
        Self::from_f64(0.5).unwrap()
    }

    fn two() -> Self {
        Self::from_f64(2.0).unwrap()
    }

    /// Lossy conversion used when embedding values in error messages.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
