//! Scalar abstraction for the numeric pipeline.
//!
//! All per-pixel and closed-form math is generic over [`Scalar`], which is
//! satisfied by `f32` and `f64`. Concrete aliases for the common double
//! precision instantiation live at the crate root.

use num_traits::{Float, FloatConst, NumAssign};
use rustfft::FftNum;

/// Floating-point scalar usable throughout the pipeline.
///
/// `FftNum` brings `FromPrimitive + Send + Sync + Debug + 'static`, which the
/// frequency-domain convolution path needs anyway.
pub trait Scalar: Float + FloatConst + NumAssign + FftNum {}

impl<T> Scalar for T where T: Float + FloatConst + NumAssign + FftNum {}

/// Shorthand for embedding an `f64` literal into the working scalar type.
#[inline]
pub(crate) fn lit<T: Scalar>(v: f64) -> T {
    T::from_f64(v).expect("literal representable in scalar type")
}
