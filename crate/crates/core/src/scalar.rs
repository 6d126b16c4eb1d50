//! Scalar abstraction shared by the geometric kernels.
//!
//! The Lie-bundle, ambient and mesh layers are written once against [`Real`]
//! and instantiated for `f32` and `f64`. The solver layers (variational
//! functionals, kernel certification, continuation) pin `f64`: their
//! certification thresholds sit a few decades above double-precision
//! round-off and have no meaningful single-precision counterpart.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating point scalar usable by the generic kernels.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive {
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
