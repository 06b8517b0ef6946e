//! Scalar abstraction for all numerical kernels.

use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar the library is generic over: `f32` or `f64`.
///
/// Combines the field operations and elementary functions of
/// [`nalgebra::RealField`] with the `num-traits` primitive conversions used
/// for tolerances and reporting.
pub trait Scalar: nalgebra::RealField + FromPrimitive + ToPrimitive + Copy {}

impl<T> Scalar for T where T: nalgebra::RealField + FromPrimitive + ToPrimitive + Copy {}

/// Converts an `f64` constant (tolerance, coefficient) into the working scalar.
#[inline]
pub fn cast<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 constant must convert to the working scalar")
}

/// Converts a scalar back to `f64` for diagnostics and serialized output.
#[inline]
pub fn to_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().expect("scalar must convert to f64")
}
