//! Scalar abstraction for the integrator: plain `f64` or double-double.

use std::fmt::Debug;

use num_traits::{Float, NumAssign};
use twofloat::TwoFloat;

pub trait Real: Float + NumAssign + Send + Sync + Debug + 'static {
    fn of(x: f64) -> Self;
    fn f64(self) -> f64;
    /// Reciprocal correct to the working precision.
    fn inv(self) -> Self;
}

impl Real for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }
    #[inline]
    fn f64(self) -> f64 {
        self
    }
    #[inline]
    fn inv(self) -> Self {
        1.0 / self
    }
}

impl Real for TwoFloat {
    #[inline]
    fn of(x: f64) -> Self {
        TwoFloat::from(x)
    }
    #[inline]
    fn f64(self) -> f64 {
        self.hi() + self.lo()
    }
    /// One Newton step from the `f64` reciprocal. The crate's own
    /// double-double division rounds its residual to `f64` and is not used.
    #[inline]
    fn inv(self) -> Self {
        let t = TwoFloat::from(self.hi().recip());
        let r = TwoFloat::from(1.0) - self * t;
        t + r * t
    }
}

/// Exact ratio of two integers in the working precision.
#[inline]
pub(crate) fn ratio<R: Real>(num: f64, den: f64) -> R {
    R::of(num) * R::of(den).inv()
}
