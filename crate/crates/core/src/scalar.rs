//! Scalar abstraction: the numeric core is generic over the floating-point
//! type through this trait, so the same kernels run at f32 or f64.

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

pub trait Scalar:
    Float
    + FloatConst
    + NumAssign
    + FromPrimitive
    + Default
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Lift an f64 literal into the generic scalar type.
#[inline]
pub fn cst<F: Scalar>(x: f64) -> F {
    F::from_f64(x).expect("literal not representable in scalar type")
}

/// `f64` view of a generic scalar, for diagnostics and reports.
#[inline]
pub fn to_f64<F: Scalar>(x: F) -> f64 {
    x.to_f64().expect("scalar not representable as f64")
}
