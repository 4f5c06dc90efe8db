use std::fmt::{Debug, Display};
use std::ops::{Div, Mul};

use num_complex::{Complex64, ComplexFloat};

/// Field the integrators run over: `f64` for time stepping, `Complex64` for
/// stability probing. `ComplexFloat` already supplies arithmetic, `exp`,
/// modulus and finiteness checks; the extra bounds give scalar/f64 mixing.
pub trait Scalar:
    ComplexFloat<Real = f64>
    + From<f64>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Modulus as an `f64` (plain absolute value in the real case).
    fn modulus(self) -> f64 {
        ComplexFloat::abs(self)
    }

    /// Lift a real constant into the field; disambiguates `From<f64>` from
    /// the blanket `NumCast::from`.
    fn from_f64(x: f64) -> Self {
        <Self as From<f64>>::from(x)
    }
}

impl Scalar for f64 {}
impl Scalar for Complex64 {}
