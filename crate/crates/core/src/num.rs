//! Scalar abstraction for the numeric kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point scalar the whole pipeline is generic over.
///
/// `f32` and `f64` both satisfy it; the test suites and the CLI run on `f64`
/// because the advertised tolerances need the extra mantissa.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` constant into the working scalar.
///
/// Panics only if the target type cannot represent ordinary finite constants,
/// which no `Real` implementation in this crate does.
#[inline]
pub fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("finite constant must convert")
}

/// Converts a small non-negative integer into the working scalar.
#[inline]
pub fn real_usize<T: Real>(x: usize) -> T {
    T::from_usize(x).expect("small integer must convert")
}
