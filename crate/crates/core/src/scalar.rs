//! Scalar abstraction shared by the numerical modules.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use nalgebra::{ComplexField, RealField};
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar usable by every algorithm in this crate.
///
/// Implemented for `f32` and `f64`. Complex-valued data uses `Complex<T>`.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Display + Debug + FromStr + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        nalgebra::convert(x)
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).unwrap_or_else(Self::max_value_or_nan)
    }

    #[doc(hidden)]
    fn max_value_or_nan() -> Self {
        Self::max_value().unwrap_or_else(Self::zero)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Entry type of a state-space model: a real scalar or a complex number over one.
pub trait Entry: ComplexField<RealField: Real> + Copy + Send + Sync + 'static {
    const IS_COMPLEX: bool;

    fn into_complex(self) -> Complex<Self::RealField>;
    /// Drops the imaginary part when `Self` is real.
    fn from_complex_lossy(z: Complex<Self::RealField>) -> Self;
}

impl<T: Real> Entry for T {
    const IS_COMPLEX: bool = false;

    #[inline]
    fn into_complex(self) -> Complex<T> {
        Complex::new(self, T::zero())
    }

    #[inline]
    fn from_complex_lossy(z: Complex<T>) -> Self {
        z.re
    }
}

impl<T: Real> Entry for Complex<T> {
    const IS_COMPLEX: bool = true;

    #[inline]
    fn into_complex(self) -> Complex<T> {
        self
    }

    #[inline]
    fn from_complex_lossy(z: Complex<T>) -> Self {
        z
    }
}
