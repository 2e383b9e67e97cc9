//! Scalar abstraction shared by every numerical type in the crate.

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};

/// Real floating point scalar the discretization is generic over.
///
/// Implemented for `f32` and `f64`. All tolerances in the crate are stated
/// for `f64`; `f32` instantiations compile and run but only meet the looser
/// accuracy their precision allows.
pub trait Scalar:
    RealField + Copy + FromPrimitive + ToPrimitive + rustfft::FftNum + Default + Display + Debug
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).expect("finite scalar")
    }

    #[inline]
    fn uz(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize representable")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Complex number over a [`Scalar`].
pub type C<S> = Complex<S>;

#[inline]
pub(crate) fn cplx<S: Scalar>(re: S, im: S) -> C<S> {
    Complex::new(re, im)
}

#[inline]
pub(crate) fn czero<S: Scalar>() -> C<S> {
    Complex::new(S::zero(), S::zero())
}

#[inline]
pub(crate) fn creal<S: Scalar>(re: S) -> C<S> {
    Complex::new(re, S::zero())
}

/// Modulus without going through `num_traits::Float`.
#[inline]
pub(crate) fn cabs<S: Scalar>(z: C<S>) -> S {
    z.norm_sqr().sqrt()
}

/// Integer power of a complex number by repeated squaring.
pub(crate) fn cpowi<S: Scalar>(z: C<S>, mut e: usize) -> C<S> {
    let mut base = z;
    let mut acc = creal(S::one());
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base = base * base;
        e >>= 1;
    }
    acc
}
