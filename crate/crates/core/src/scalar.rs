//! Scalar abstraction: every numeric routine in this crate is generic over a
//! floating-point type implementing [`Real`].

use std::fmt::{Debug, Display};

/// Floating-point scalar (f32 or f64).
pub trait Real:
    num_traits::Float + num_traits::FromPrimitive + num_traits::ToPrimitive + Debug + Display + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Lift an f64 constant into the working scalar type.
#[inline]
pub fn cst<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("constant representable in scalar type")
}

/// Lift a usize into the working scalar type.
#[inline]
pub fn cst_usize<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("count representable in scalar type")
}
