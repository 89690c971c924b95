//! Scalar abstraction shared by the numerical modules.

use std::fmt;

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point type the estimator can run on.
///
/// Linear algebra goes through nalgebra, so the bound is `RealField`; the
/// `num-traits` conversions cover literals and reporting.
pub trait Scalar: RealField + Copy + FromPrimitive + ToPrimitive + fmt::Display + fmt::LowerExp + Send + Sync + 'static {
    /// Converts an `f64` literal. Panics only if the target type cannot
    /// represent finite `f64` values at all, which never happens for
    /// `f32`/`f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
