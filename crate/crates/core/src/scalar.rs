//! Scalar abstraction shared by the geometry, filter and solver modules.

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use std::fmt::{Debug, Display, LowerExp};

/// Floating-point type the positioning math is written against.
///
/// Implemented for `f32` and `f64`. The simulator and the file formats are
/// `f64`-only; everything below them is generic.
pub trait Scalar:
    'static + Copy + Send + Sync + Float + FloatConst + NumAssign + FromPrimitive + Default + Debug + Display + LowerExp
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Shorthand for `T::lit(v)`.
#[inline]
pub(crate) fn c<T: Scalar>(v: f64) -> T {
    T::lit(v)
}
