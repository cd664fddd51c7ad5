//! Double-double complex helpers for the accumulated transfer matrices.

use num_complex::{Complex, Complex64};
use twofloat::TwoFloat;

pub(crate) type DdComplex = Complex<TwoFloat>;

pub(crate) fn lift(z: Complex64) -> DdComplex {
    Complex::new(TwoFloat::from(z.re), TwoFloat::from(z.im))
}

pub(crate) fn lower(z: DdComplex) -> Complex64 {
    Complex64::new(f64::from(z.re), f64::from(z.im))
}

pub(crate) fn dd(x: f64) -> TwoFloat {
    TwoFloat::from(x)
}

pub(crate) fn zero() -> DdComplex {
    Complex::new(dd(0.0), dd(0.0))
}
