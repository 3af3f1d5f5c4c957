use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar used by every grid, solver and functional in the crate.
///
/// Implemented for `f32` and `f64`. Tolerances quoted in the docs are for `f64`;
/// the `f32` instantiation is useful for quick previews but will not meet them.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + rustdct::DctNum
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Positive part `max(x, 0)`.
#[inline]
pub fn pos<T: Real>(x: T) -> T {
    x.max(T::zero())
}

/// Negative part `max(-x, 0)`.
#[inline]
pub fn neg<T: Real>(x: T) -> T {
    (-x).max(T::zero())
}
