//! Double-double arithmetic for evaluating expanded iterate polynomials,
//! whose coefficients cancel heavily at moderate arguments.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use num_rational::BigRational;

use crate::scalar::{rat_to_f64, QComplex};

/// Unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn new(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    pub fn from_rational(q: &BigRational) -> Self {
        let hi = rat_to_f64(q);
        if !hi.is_finite() {
            return Self::new(hi);
        }
        let rest = q - BigRational::from_float(hi).expect("finite");
        let (hi, lo) = quick_two_sum(hi, rat_to_f64(&rest));
        Self { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Self::ZERO;
        }
        let x = self.hi.sqrt();
        // one Newton step: x + (self − x²)/(2x)
        let r = self - Dd::new(x) * Dd::new(x);
        let (hi, lo) = quick_two_sum(x, r.hi / (2.0 * x));
        Self { hi, lo }
    }

    /// Natural log, accurate to about 1e−30 relative for positive input.
    pub fn ln(self) -> f64 {
        // ln(hi + lo) = ln hi + log1p(lo/hi)
        self.hi.ln() + (self.lo / self.hi).ln_1p()
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, b: Dd) -> Dd {
        let p = self.hi * b.hi;
        let e = self.hi.mul_add(b.hi, -p);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

/// Complex double-double.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DdC {
    pub re: Dd,
    pub im: Dd,
}

impl DdC {
    pub const ZERO: DdC = DdC { re: Dd::ZERO, im: Dd::ZERO };
    pub const ONE: DdC = DdC { re: Dd::ONE, im: Dd::ZERO };

    pub fn from_c64(z: Complex64) -> Self {
        Self { re: Dd::new(z.re), im: Dd::new(z.im) }
    }

    pub fn from_q(q: &QComplex) -> Self {
        Self { re: Dd::from_rational(&q.re), im: Dd::from_rational(&q.im) }
    }

    pub fn to_c64(self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn norm_sqr(self) -> Dd {
        self.re * self.re + self.im * self.im
    }

    pub fn norm(self) -> Dd {
        self.norm_sqr().sqrt()
    }

    pub fn inv(self) -> Self {
        // 1/z = conj z/|z|², with the quotient refined by one residual step
        let n = self.norm_sqr();
        let q = 1.0 / n.to_f64();
        let approx = Dd::new(q);
        let corr = approx * (Dd::ONE - n * approx);
        let s = approx + corr;
        DdC { re: self.re * s, im: -(self.im * s) }
    }

    pub fn powi(self, n: i64) -> Self {
        let mut base = if n < 0 { self.inv() } else { self };
        let mut e = n.unsigned_abs();
        let mut acc = DdC::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }
}

impl Add for DdC {
    type Output = DdC;
    fn add(self, b: DdC) -> DdC {
        DdC { re: self.re + b.re, im: self.im + b.im }
    }
}

impl Sub for DdC {
    type Output = DdC;
    fn sub(self, b: DdC) -> DdC {
        DdC { re: self.re - b.re, im: self.im - b.im }
    }
}

impl Mul for DdC {
    type Output = DdC;
    fn mul(self, b: DdC) -> DdC {
        DdC { re: self.re * b.re - self.im * b.im, im: self.re * b.im + self.im * b.re }
    }
}
