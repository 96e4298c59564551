//! Finite Laurent polynomials in `t`, truncated Laurent series, and the
//! t-adic and hybrid norms on them.
//!
//! A [`LaurentPoly`] is an element of `ℂ[t, t⁻¹]`. It stands in for the
//! meromorphic coefficients `a(t)`, `a_i(t)` of a family (poles only at the
//! origin) and, read as a formal object, for the same element of `ℂ((t))`.
//! A [`TruncatedSeries`] is an element of `ℂ((t))` known only below a
//! precision exponent.
//!
//! Both containers are canonical: no stored coefficient is exactly zero.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// t-adic order. The zero polynomial has order `Infinity`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Order {
    Finite(i64),
    Infinity,
}

impl Order {
    pub fn finite(self) -> Option<i64> {
        match self {
            Order::Finite(k) => Some(k),
            Order::Infinity => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Order::Infinity)
    }
}

impl Add for Order {
    type Output = Order;

    fn add(self, rhs: Order) -> Order {
        match (self, rhs) {
            (Order::Finite(a), Order::Finite(b)) => Order::Finite(a + b),
            _ => Order::Infinity,
        }
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Order::Finite(k) => write!(f, "{k}"),
            Order::Infinity => f.write_str("+inf"),
        }
    }
}

/// Base `r` of the t-adic absolute value `|f|_r = r^{ord f}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridNormParams {
    r: f64,
}

impl HybridNormParams {
    pub fn new(r: f64) -> Result<Self> {
        if r > 0.0 && r < 1.0 {
            Ok(Self { r })
        } else {
            Err(Error::ParameterTooLarge(format!("base r = {r} must lie in (0, 1)")))
        }
    }

    pub fn r(&self) -> f64 {
        self.r
    }
}

impl Default for HybridNormParams {
    fn default() -> Self {
        Self { r: 0.5 }
    }
}

#[derive(Clone, PartialEq)]
pub struct LaurentPoly<S> {
    terms: BTreeMap<i64, S>,
}

impl<S: Scalar> LaurentPoly<S> {
    pub fn zero() -> Self {
        Self { terms: BTreeMap::new() }
    }

    pub fn one() -> Self {
        Self::constant(S::one())
    }

    pub fn constant(c: S) -> Self {
        Self::monomial(0, c)
    }

    /// `c · t^exp`.
    pub fn monomial(exp: i64, c: S) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(exp, c);
        }
        Self { terms }
    }

    /// The coordinate `t`.
    pub fn t() -> Self {
        Self::monomial(1, S::one())
    }

    /// Builds a polynomial from `(exponent, coefficient)` pairs; repeated
    /// exponents are summed and zero results dropped.
    pub fn from_terms<I: IntoIterator<Item = (i64, S)>>(terms: I) -> Self {
        let mut map: BTreeMap<i64, S> = BTreeMap::new();
        for (e, c) in terms {
            let entry = map.entry(e).or_insert_with(S::zero);
            *entry = entry.clone() + c;
        }
        map.retain(|_, c| !c.is_zero());
        Self { terms: map }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, &S)> + '_ {
        self.terms.iter().map(|(e, c)| (*e, c))
    }

    pub fn coeff(&self, exp: i64) -> S {
        self.terms.get(&exp).cloned().unwrap_or_else(S::zero)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn ord(&self) -> Order {
        self.terms.keys().next().map_or(Order::Infinity, |&k| Order::Finite(k))
    }

    pub fn max_exponent(&self) -> Option<i64> {
        self.terms.keys().next_back().copied()
    }

    /// Leading (lowest-order) coefficient.
    pub fn leading(&self) -> Option<(i64, &S)> {
        self.terms.iter().next().map(|(e, c)| (*e, c))
    }

    pub fn is_monomial(&self) -> bool {
        self.terms.len() == 1
    }

    /// True when the polynomial has no negative exponents (holomorphic at 0).
    pub fn is_integral(&self) -> bool {
        self.ord() >= Order::Finite(0)
    }

    /// Multiplication by `t^k`.
    pub fn shift(&self, k: i64) -> Self {
        Self { terms: self.terms.iter().map(|(e, c)| (e + k, c.clone())).collect() }
    }

    pub fn scale(&self, s: &S) -> Self {
        Self::from_terms(self.terms.iter().map(|(e, c)| (*e, c.clone() * s.clone())))
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = Self::one();
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                acc = &acc * &base;
            }
            n >>= 1;
            if n > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Substitution `t ↦ t^k` for `k ≥ 1`.
    pub fn substitute_power(&self, k: i64) -> Self {
        assert!(k >= 1);
        Self { terms: self.terms.iter().map(|(e, c)| (e * k, c.clone())).collect() }
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> LaurentPoly<T> {
        LaurentPoly::from_terms(self.terms.iter().map(|(e, c)| (*e, f(c))))
    }

    pub fn to_c64(&self) -> LaurentPoly<Complex64> {
        self.map(|c| c.to_c64())
    }

    /// Value at `t0`. Fails only when `t0 = 0` meets a pole.
    pub fn eval(&self, t0: Complex64) -> Result<Complex64> {
        if t0 == Complex64::new(0.0, 0.0) {
            if self.ord() < Order::Finite(0) {
                return Err(Error::ZeroParameter);
            }
            return Ok(self.coeff(0).to_c64());
        }
        Ok(self
            .terms
            .iter()
            .map(|(e, c)| c.to_c64() * t0.powi(*e as i32))
            .sum())
    }

    /// Exact evaluation at a nonzero value of the coefficient field.
    pub fn eval_exact(&self, t0: &S) -> Result<S> {
        if t0.is_zero() {
            if self.ord() < Order::Finite(0) {
                return Err(Error::ZeroParameter);
            }
            return Ok(self.coeff(0));
        }
        let inv = S::one() / t0.clone();
        let mut acc = S::zero();
        for (e, c) in &self.terms {
            let base = if *e < 0 { inv.clone() } else { t0.clone() };
            let mut p = S::one();
            for _ in 0..e.unsigned_abs() {
                p = p * base.clone();
            }
            acc = acc + c.clone() * p;
        }
        Ok(acc)
    }

    /// `|f|_r = r^{ord f}`, and 0 for the zero polynomial.
    pub fn t_adic_norm(&self, p: HybridNormParams) -> f64 {
        match self.ord() {
            Order::Finite(k) => p.r().powi(k as i32),
            Order::Infinity => 0.0,
        }
    }

    /// Norm of the ring `A_r`: `Σ |a_i|_hyb rⁱ` with `|x|_hyb = max(|x|, 1)`.
    pub fn hybrid_norm(&self, p: HybridNormParams) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c.modulus().max(1.0) * p.r().powi(*e as i32))
            .sum()
    }

    pub fn inverse_series(&self, prec: usize) -> Result<TruncatedSeries<S>> {
        invert_series(self, prec)
    }
}

impl<S: Scalar> Default for LaurentPoly<S> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<S: Scalar> fmt::Debug for LaurentPoly<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            let z = c.to_c64();
            write!(f, "({}{:+}i)t^{}", z.re, z.im, e)?;
        }
        Ok(())
    }
}

impl<S: Scalar> Add for &LaurentPoly<S> {
    type Output = LaurentPoly<S>;

    fn add(self, rhs: Self) -> LaurentPoly<S> {
        LaurentPoly::from_terms(
            self.terms
                .iter()
                .chain(rhs.terms.iter())
                .map(|(e, c)| (*e, c.clone())),
        )
    }
}

impl<S: Scalar> Sub for &LaurentPoly<S> {
    type Output = LaurentPoly<S>;

    fn sub(self, rhs: Self) -> LaurentPoly<S> {
        LaurentPoly::from_terms(
            self.terms
                .iter()
                .map(|(e, c)| (*e, c.clone()))
                .chain(rhs.terms.iter().map(|(e, c)| (*e, -c.clone()))),
        )
    }
}

impl<S: Scalar> Mul for &LaurentPoly<S> {
    type Output = LaurentPoly<S>;

    fn mul(self, rhs: Self) -> LaurentPoly<S> {
        let mut out: BTreeMap<i64, S> = BTreeMap::new();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                let entry = out.entry(ea + eb).or_insert_with(S::zero);
                *entry = entry.clone() + ca.clone() * cb.clone();
            }
        }
        out.retain(|_, c| !c.is_zero());
        LaurentPoly { terms: out }
    }
}

impl<S: Scalar> Neg for &LaurentPoly<S> {
    type Output = LaurentPoly<S>;

    fn neg(self) -> LaurentPoly<S> {
        LaurentPoly { terms: self.terms.iter().map(|(e, c)| (*e, -c.clone())).collect() }
    }
}

macro_rules! forward_owned_binop {
    ($tr:ident, $m:ident) => {
        impl<S: Scalar> $tr for LaurentPoly<S> {
            type Output = LaurentPoly<S>;

            fn $m(self, rhs: Self) -> LaurentPoly<S> {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned_binop!(Add, add);
forward_owned_binop!(Sub, sub);
forward_owned_binop!(Mul, mul);

impl<S: Scalar> Neg for LaurentPoly<S> {
    type Output = LaurentPoly<S>;

    fn neg(self) -> LaurentPoly<S> {
        -(&self)
    }
}

/// Precision of a truncated series: either exact (a finite Laurent
/// polynomial), or every coefficient of `t^k` with `k ≥ N` unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Prec {
    Below(i64),
    Exact,
}

impl Prec {
    fn shift(self, k: i64) -> Prec {
        match self {
            Prec::Below(n) => Prec::Below(n + k),
            Prec::Exact => Prec::Exact,
        }
    }
}

/// What is known about the order of a truncated series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesOrder {
    /// Certified smallest exponent with nonzero coefficient.
    Exact(i64),
    /// The series is exactly zero.
    Zero,
    /// All known coefficients vanish; the order is at least this value.
    AtLeast(i64),
}

impl SeriesOrder {
    /// Lower bound on the order (`None` means +∞).
    pub fn lower_bound(self) -> Option<i64> {
        match self {
            SeriesOrder::Exact(k) | SeriesOrder::AtLeast(k) => Some(k),
            SeriesOrder::Zero => None,
        }
    }

    pub fn is_certified(self) -> bool {
        !matches!(self, SeriesOrder::AtLeast(_))
    }
}

/// Element of `ℂ((t))` known below a precision exponent.
#[derive(Clone, PartialEq)]
pub struct TruncatedSeries<S> {
    terms: BTreeMap<i64, S>,
    prec: Prec,
}

impl<S: Scalar> TruncatedSeries<S> {
    pub fn exact(p: &LaurentPoly<S>) -> Self {
        Self { terms: p.terms.clone(), prec: Prec::Exact }
    }

    pub fn zero() -> Self {
        Self { terms: BTreeMap::new(), prec: Prec::Exact }
    }

    /// `p + O(t^prec)`.
    pub fn truncated(p: &LaurentPoly<S>, prec: i64) -> Self {
        Self {
            terms: p.terms.range(..prec).map(|(e, c)| (*e, c.clone())).collect(),
            prec: Prec::Below(prec),
        }
    }

    pub fn from_terms<I: IntoIterator<Item = (i64, S)>>(terms: I, prec: Prec) -> Self {
        let p = LaurentPoly::from_terms(terms);
        match prec {
            Prec::Exact => Self::exact(&p),
            Prec::Below(n) => Self::truncated(&p, n),
        }
    }

    pub fn prec(&self) -> Prec {
        self.prec
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, &S)> + '_ {
        self.terms.iter().map(|(e, c)| (*e, c))
    }

    pub fn coeff(&self, exp: i64) -> S {
        self.terms.get(&exp).cloned().unwrap_or_else(S::zero)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// The known part as a Laurent polynomial.
    pub fn known_part(&self) -> LaurentPoly<S> {
        LaurentPoly { terms: self.terms.clone() }
    }

    pub fn order(&self) -> SeriesOrder {
        match (self.terms.keys().next(), self.prec) {
            (Some(&k), _) => SeriesOrder::Exact(k),
            (None, Prec::Exact) => SeriesOrder::Zero,
            (None, Prec::Below(n)) => SeriesOrder::AtLeast(n),
        }
    }

    /// Number of known coefficients past the order (`None` when exact).
    pub fn relative_precision(&self) -> Option<i64> {
        match self.prec {
            Prec::Exact => None,
            Prec::Below(n) => Some(n - self.order().lower_bound().unwrap_or(n)),
        }
    }

    pub fn truncate(&self, prec: Prec) -> Self {
        let prec = prec.min(self.prec);
        match prec {
            Prec::Exact => self.clone(),
            Prec::Below(n) => Self {
                terms: self.terms.range(..n).map(|(e, c)| (*e, c.clone())).collect(),
                prec,
            },
        }
    }

    pub fn shift(&self, k: i64) -> Self {
        Self {
            terms: self.terms.iter().map(|(e, c)| (e + k, c.clone())).collect(),
            prec: self.prec.shift(k),
        }
    }

    pub fn scale(&self, s: &S) -> Self {
        if s.is_zero() {
            return Self::zero();
        }
        Self {
            terms: self.terms.iter().map(|(e, c)| (*e, c.clone() * s.clone())).collect(),
            prec: self.prec,
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let prec = self.prec.min(rhs.prec);
        let sum = &self.known_part() + &rhs.known_part();
        Self::exact(&sum).truncate(prec)
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.neg())
    }

    pub fn neg(&self) -> Self {
        Self {
            terms: self.terms.iter().map(|(e, c)| (*e, -c.clone())).collect(),
            prec: self.prec,
        }
    }

    /// Product with precision `min(ord a + prec b, ord b + prec a)`.
    pub fn mul(&self, rhs: &Self) -> Self {
        let (la, lb) = match (self.order().lower_bound(), rhs.order().lower_bound()) {
            (Some(a), Some(b)) => (a, b),
            // an exact zero factor gives an exact zero
            _ => return Self::zero(),
        };
        let prec = match (self.prec, rhs.prec) {
            (Prec::Exact, Prec::Exact) => Prec::Exact,
            (Prec::Below(pa), Prec::Exact) => Prec::Below(pa + lb),
            (Prec::Exact, Prec::Below(pb)) => Prec::Below(pb + la),
            (Prec::Below(pa), Prec::Below(pb)) => Prec::Below((pa + lb).min(pb + la)),
        };
        // Skip products that land at or above the precision cap.
        let mut out: BTreeMap<i64, S> = BTreeMap::new();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                let e = ea + eb;
                if let Prec::Below(n) = prec {
                    if e >= n {
                        break;
                    }
                }
                let entry = out.entry(e).or_insert_with(S::zero);
                *entry = entry.clone() + ca.clone() * cb.clone();
            }
        }
        out.retain(|_, c| !c.is_zero());
        Self { terms: out, prec }
    }

    pub fn mul_poly(&self, p: &LaurentPoly<S>) -> Self {
        self.mul(&Self::exact(p))
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = Self::exact(&LaurentPoly::one());
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// Division by a Laurent polynomial. Monomials divide exactly; otherwise
    /// the inverse is expanded to the relative precision of `self` (at least
    /// `min_terms` terms when `self` is exact).
    pub fn div_poly(&self, a: &LaurentPoly<S>, min_terms: usize) -> Result<Self> {
        if a.is_zero() {
            return Err(Error::ZeroDivision);
        }
        if a.is_monomial() {
            let (e, c) = a.leading().expect("nonzero");
            let inv = S::one() / c.clone();
            return Ok(self.scale(&inv).shift(-e));
        }
        let terms = match self.relative_precision() {
            Some(k) => (k.max(1) as usize).max(1),
            None => min_terms.max(1),
        };
        let inv = invert_series(a, terms)?;
        Ok(self.mul(&inv))
    }
}

impl<S: Scalar> fmt::Debug for TruncatedSeries<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.known_part())?;
        match self.prec {
            Prec::Exact => Ok(()),
            Prec::Below(n) => write!(f, " + O(t^{n})"),
        }
    }
}

/// Inverse of a nonzero Laurent polynomial as a truncated series.
///
/// `prec` is the number of terms returned past the order: with
/// `f = t^m (c₀ + c₁t + …)` the result is `t^{-m}(g₀ + … + g_{prec-1}t^{prec-1}) + O(t^{prec-m})`,
/// so that `f·g = 1 + O(t^prec)` and `ord g = -ord f` exactly.
pub fn invert_series<S: Scalar>(f: &LaurentPoly<S>, prec: usize) -> Result<TruncatedSeries<S>> {
    let (m, c0) = f.leading().ok_or(Error::ZeroDivision)?;
    let prec = prec.max(1);
    let inv_c0 = S::one() / c0.clone();
    // c_j for j ≥ 1 relative to the leading exponent
    let rel: Vec<(usize, S)> = f
        .terms()
        .skip(1)
        .map(|(e, c)| ((e - m) as usize, c.clone()))
        .take_while(|(j, _)| *j < prec)
        .collect();
    let mut g: Vec<S> = Vec::with_capacity(prec);
    g.push(inv_c0.clone());
    for k in 1..prec {
        let mut acc = S::zero();
        for (j, c) in &rel {
            if *j > k {
                break;
            }
            acc = acc + c.clone() * g[k - j].clone();
        }
        g.push(-(inv_c0.clone() * acc));
    }
    Ok(TruncatedSeries::from_terms(
        g.into_iter().enumerate().map(|(k, c)| (k as i64 - m, c)),
        Prec::Below(prec as i64 - m),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{qint, rat, QComplex};
    use num_complex::Complex;
    use proptest::prelude::*;

    type Q = LaurentPoly<QComplex>;

    fn q(terms: &[(i64, i64)]) -> Q {
        Q::from_terms(terms.iter().map(|&(e, c)| (e, qint(c, 0))))
    }

    #[test]
    fn ord_examples() {
        assert_eq!(q(&[(1, 1)]).ord(), Order::Finite(1));
        assert_eq!(q(&[(-2, 3), (1, 1)]).ord(), Order::Finite(-2));
        assert_eq!(Q::zero().ord(), Order::Infinity);
    }

    #[test]
    fn from_terms_drops_cancelled_coefficients() {
        let p = q(&[(0, 2), (0, -2), (3, 1)]);
        assert_eq!(p.len(), 1);
        assert_eq!(p.ord(), Order::Finite(3));
    }

    #[test]
    fn t_adic_norm_examples() {
        let half = HybridNormParams::new(0.5).unwrap();
        assert_eq!(q(&[(1, 1)]).t_adic_norm(half), 0.5);
        assert_eq!(q(&[(-2, 1)]).t_adic_norm(half), 4.0);
        assert_eq!(Q::zero().t_adic_norm(half), 0.0);
        assert!(HybridNormParams::new(1.0).is_err());
        assert!(HybridNormParams::new(0.0).is_err());
    }

    #[test]
    fn hybrid_norm_examples() {
        let half = HybridNormParams::new(0.5).unwrap();
        assert_eq!(Q::one().hybrid_norm(half), 1.0);
        let f = Q::from_terms([(-1, qint(2, 0)), (1, Complex::new(rat(1, 2), rat(0, 1)))]);
        assert!((f.hybrid_norm(half) - 4.5).abs() < 1e-15);
        assert_eq!(Q::zero().hybrid_norm(half), 0.0);
    }

    #[test]
    fn eval_examples() {
        let inv_t = q(&[(-1, 1)]);
        assert_eq!(inv_t.eval(Complex64::new(0.5, 0.0)).unwrap(), Complex64::new(2.0, 0.0));
        let one_plus_t = q(&[(0, 1), (1, 1)]);
        let v = one_plus_t.eval(Complex64::new(0.0, 0.1)).unwrap();
        assert!((v - Complex64::new(1.0, 0.1)).norm() < 1e-15);
        assert_eq!(inv_t.eval(Complex64::new(0.0, 0.0)), Err(Error::ZeroParameter));
        assert_eq!(one_plus_t.eval(Complex64::new(0.0, 0.0)).unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn invert_series_examples() {
        let g = invert_series(&q(&[(1, 1)]), 5).unwrap();
        assert_eq!(g.known_part(), q(&[(-1, 1)]));

        let g = invert_series(&q(&[(0, 1), (1, -1)]), 3).unwrap();
        assert_eq!(g.known_part(), q(&[(0, 1), (1, 1), (2, 1)]));
        assert_eq!(g.prec(), Prec::Below(3));

        // t²(1 + t) → t⁻²(1 − t) + O(t⁰)
        let f = q(&[(2, 1), (3, 1)]);
        let g = invert_series(&f, 2).unwrap();
        assert_eq!(g.known_part(), q(&[(-2, 1), (-1, -1)]));
        assert_eq!(g.prec(), Prec::Below(0));
        assert_eq!(g.order(), SeriesOrder::Exact(-2));

        assert_eq!(invert_series(&Q::zero(), 3), Err(Error::ZeroDivision));
    }

    #[test]
    fn truncated_product_tracks_precision() {
        // (t⁻¹ + 1 + O(t²)) · (t + O(t³)) = 1 + t + O(t²)
        let a = TruncatedSeries::truncated(&q(&[(-1, 1), (0, 1)]), 2);
        let b = TruncatedSeries::truncated(&q(&[(1, 1)]), 3);
        let c = a.mul(&b);
        assert_eq!(c.prec(), Prec::Below(2));
        assert_eq!(c.known_part(), q(&[(0, 1), (1, 1)]));
    }

    #[test]
    fn empty_truncated_series_has_only_a_lower_bound() {
        let s = TruncatedSeries::truncated(&Q::zero(), 3);
        assert_eq!(s.order(), SeriesOrder::AtLeast(3));
        assert!(!s.order().is_certified());
        assert_eq!(TruncatedSeries::<QComplex>::zero().order(), SeriesOrder::Zero);
    }

    #[test]
    fn div_by_non_monomial_matches_inverse() {
        let a = q(&[(0, 1), (1, 1)]);
        let x = TruncatedSeries::truncated(&q(&[(0, 1), (1, 1)]), 6);
        let y = x.div_poly(&a, 8).unwrap();
        assert_eq!(y.known_part(), q(&[(0, 1)]));
        assert_eq!(y.prec(), Prec::Below(6));
    }

    fn arb_poly() -> impl Strategy<Value = Q> {
        prop::collection::vec((-4i64..5, -3i64..4, -3i64..4, 1i64..4), 0..5).prop_map(|v| {
            Q::from_terms(
                v.into_iter()
                    .map(|(e, re, im, den)| (e, Complex::new(rat(re, den), rat(im, den)))),
            )
        })
    }

    proptest! {
        #[test]
        fn ring_laws(a in arb_poly(), b in arb_poly(), c in arb_poly()) {
            prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
            prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
            prop_assert_eq!(&a * &b, &b * &a);
        }

        #[test]
        fn order_is_additive(a in arb_poly(), b in arb_poly()) {
            prop_assume!(!a.is_zero() && !b.is_zero());
            prop_assert_eq!((&a * &b).ord(), a.ord() + b.ord());
        }

        #[test]
        fn t_adic_norm_is_multiplicative_and_ultrametric(a in arb_poly(), b in arb_poly()) {
            let p = HybridNormParams::new(0.5).unwrap();
            let (na, nb) = (a.t_adic_norm(p), b.t_adic_norm(p));
            prop_assert_eq!((&a * &b).t_adic_norm(p), na * nb);
            let ns = (&a + &b).t_adic_norm(p);
            prop_assert!(ns <= na.max(nb));
            if a.ord() != b.ord() {
                prop_assert_eq!(ns, na.max(nb));
            }
        }

        #[test]
        fn hybrid_norm_is_submultiplicative(a in arb_poly(), b in arb_poly(), r in 0.05f64..0.95) {
            let p = HybridNormParams::new(r).unwrap();
            let lhs = (&a * &b).hybrid_norm(p);
            prop_assert!(lhs <= a.hybrid_norm(p) * b.hybrid_norm(p) * (1.0 + 1e-12));
        }

        #[test]
        fn invert_series_multiplies_back(a in arb_poly(), prec in 1usize..8) {
            prop_assume!(!a.is_zero());
            let g = invert_series(&a, prec).unwrap();
            prop_assert_eq!(g.order(), SeriesOrder::Exact(-a.ord().finite().unwrap()));
            let residual = &(&a * &g.known_part()) - &Q::one();
            prop_assert!(residual.ord() >= Order::Finite(prec as i64));
        }

        #[test]
        fn evaluation_bounded_by_hybrid_norm(a in arb_poly(), r in 0.05f64..0.95, theta in 0.0f64..6.3) {
            let p = HybridNormParams::new(r).unwrap();
            let t0 = Complex64::from_polar(r, theta);
            let v = a.eval(t0).unwrap().norm();
            prop_assert!(v <= a.hybrid_norm(p) * (1.0 + 1e-12) + 1e-12);
        }
    }
}
