//! Coefficient fields used by the symbolic and numeric paths.
//!
//! Symbolic code (orders, ties, homogenization) runs over exact complex
//! rationals [`QComplex`]; numeric code over [`Complex64`]. Both implement
//! [`Scalar`], so polynomial containers are generic over the two.

use std::fmt::Debug;
use std::ops::Neg;

use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{Num, ToPrimitive, Zero};

/// Exact complex rational.
pub type QComplex = Complex<BigRational>;

pub trait Scalar: Clone + Debug + PartialEq + Num + Neg<Output = Self> + Send + Sync + 'static {
    fn to_c64(&self) -> Complex64;

    /// Exact image of a float value. `None` for non-finite input.
    fn from_c64(z: Complex64) -> Option<Self>;

    fn modulus(&self) -> f64 {
        self.to_c64().norm()
    }
}

impl Scalar for Complex64 {
    fn to_c64(&self) -> Complex64 {
        *self
    }

    fn from_c64(z: Complex64) -> Option<Self> {
        (z.re.is_finite() && z.im.is_finite()).then_some(z)
    }
}

impl Scalar for QComplex {
    fn to_c64(&self) -> Complex64 {
        Complex64::new(rat_to_f64(&self.re), rat_to_f64(&self.im))
    }

    fn from_c64(z: Complex64) -> Option<Self> {
        Some(Complex::new(
            BigRational::from_float(z.re)?,
            BigRational::from_float(z.im)?,
        ))
    }
}

/// Nearest float to a rational, robust to huge numerators and denominators.
pub fn rat_to_f64(q: &BigRational) -> f64 {
    if q.is_zero() {
        return 0.0;
    }
    if let Some(v) = q.to_f64() {
        if v.is_finite() && v != 0.0 {
            return v;
        }
    }
    // Shift both parts down to 64 significant bits before dividing.
    let n = q.numer();
    let d = q.denom();
    let nb = n.bits() as i64;
    let db = d.bits() as i64;
    let ns = (nb - 64).max(0);
    let ds = (db - 64).max(0);
    let nf = (n >> ns as usize).to_f64().unwrap_or(f64::NAN);
    let df = (d >> ds as usize).to_f64().unwrap_or(f64::NAN);
    nf / df * 2f64.powi((ns - ds).clamp(-2000, 2000) as i32)
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn qc(re: BigRational, im: BigRational) -> QComplex {
    Complex::new(re, im)
}

/// Exact complex integer `re + i·im`.
pub fn qint(re: i64, im: i64) -> QComplex {
    Complex::new(rat(re, 1), rat(im, 1))
}
