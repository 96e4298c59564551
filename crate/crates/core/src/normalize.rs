//! Reduction of a general Hénon-type family
//! `(x, y) ↦ (a₀x^d + a₁x^{d−1} + … + a_d − a·y, b·x)` to monic form.
//!
//! With `σ(x, y) = (λx, (λ/b)·y)`,
//! `σ∘H∘σ⁻¹(X, Y) = (λ·P(X/λ) − a·b·Y, X)`. The coefficient of `X^{d−k}` is
//! `a_k·λ^{k+1−d}`, so the map is monic exactly when `λ^{d−1} = a₀`. A
//! `(d−1)`-th root of `a₀(t)` exists after the substitution `t = s^{d−1}`:
//! writing `a₀(s^{d−1}) = c·s^{(d−1)m}(1 + u(s))`,
//! `λ = c^{1/(d−1)}·s^m·(1 + u)^{1/(d−1)}`.
//!
//! The binomial series of `(1 + u)^β` has rational coefficients and is
//! computed exactly; the constant `c^{1/(d−1)}` is the principal root
//! evaluated in floating point and taken at its exact binary value. When
//! `a₀` is a monomial the result is a finite family; otherwise every
//! coefficient is a truncated series and the returned family holds its known
//! part.

use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::family::{ExactLaurent, HenonFamily};
use crate::laurent::{LaurentPoly, Order, Prec, TruncatedSeries};
use crate::scalar::{QComplex, Scalar};

/// `a₀x^d + … + a_d − a·y` in the first slot and `b·x` in the second.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralFamily {
    /// `a₀ … a_d`.
    pub coeffs: Vec<ExactLaurent>,
    pub a: ExactLaurent,
    pub b: ExactLaurent,
}

impl GeneralFamily {
    pub fn new(coeffs: Vec<ExactLaurent>, a: ExactLaurent, b: ExactLaurent) -> Result<Self> {
        if coeffs.len() < 3 {
            return Err(Error::InvalidFamily(format!("degree {} < 2", coeffs.len() as i64 - 1)));
        }
        if coeffs[0].is_zero() {
            return Err(Error::DegenerateFamily("leading coefficient a₀ vanishes identically".into()));
        }
        if b.is_zero() {
            return Err(Error::DegenerateFamily("b vanishes identically".into()));
        }
        if a.is_zero() {
            return Err(Error::DegenerateFamily("a vanishes identically".into()));
        }
        Ok(Self { coeffs, a, b })
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn from_monic(f: &HenonFamily) -> Self {
        let mut coeffs = vec![LaurentPoly::one()];
        coeffs.extend(f.coeffs().iter().cloned());
        Self { coeffs, a: f.a().clone(), b: LaurentPoly::one() }
    }

    /// `(a₀(x)…, a, b)` evaluated at `t0`, as floats.
    pub fn eval(&self, t0: Complex64) -> Result<(Vec<Complex64>, Complex64, Complex64)> {
        let cs = self.coeffs.iter().map(|c| c.eval(t0)).collect::<Result<Vec<_>>>()?;
        Ok((cs, self.a.eval(t0)?, self.b.eval(t0)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    /// Monic family in the parameter `s`.
    pub family: HenonFamily,
    /// `t = s^substitution`; 1 when no substitution was needed.
    pub substitution: u32,
    /// Conjugating factor `λ(s)`.
    pub lambda: TruncatedSeries<QComplex>,
    /// Smallest precision among the returned coefficients.
    pub precision: Prec,
    /// Largest relative deviation found when re-checking the conjugation
    /// identity coefficient by coefficient.
    pub residual: f64,
}

/// `f^{num/den}` for `f = c·s^e·(1 + u)` with `den | e·num`, to `terms`
/// coefficients past the order. `root` is a chosen `c^{1/den}`.
fn rational_power(
    f: &ExactLaurent,
    num: i64,
    den: i64,
    root: &QComplex,
    terms: usize,
) -> Result<TruncatedSeries<QComplex>> {
    let (e, c) = f.leading().ok_or(Error::ZeroDivision)?;
    if (e * num) % den != 0 {
        return Err(Error::Unsupported(format!("s^({e}·{num}/{den}) is not a Laurent monomial")));
    }
    let shift = e * num / den;
    // constant factor root^num
    let mut k = QComplex::one();
    let base = if num >= 0 { root.clone() } else { QComplex::one() / root.clone() };
    for _ in 0..num.unsigned_abs() {
        k = k * base.clone();
    }
    if f.is_monomial() {
        return Ok(TruncatedSeries::exact(&LaurentPoly::monomial(shift, k)));
    }
    // normalized tail 1 + u, f_j = coeff(e + j)/c
    let inv_c = QComplex::one() / c.clone();
    let fj: Vec<QComplex> = (0..terms).map(|j| f.coeff(e + j as i64) * inv_c.clone()).collect();
    let beta = Complex::new(BigRational::new(num.into(), den.into()), BigRational::zero());
    let one = QComplex::one();
    let mut g: Vec<QComplex> = vec![one.clone()];
    for n in 1..terms {
        let mut acc = QComplex::zero();
        for j in 1..=n {
            if fj[j].is_zero() {
                continue;
            }
            let w = (beta.clone() + one.clone()) * qint_i(j as i64) - qint_i(n as i64);
            acc = acc + w * fj[j].clone() * g[n - j].clone();
        }
        g.push(acc / qint_i(n as i64));
    }
    let poly = LaurentPoly::from_terms(g.into_iter().enumerate().map(|(j, c)| (shift + j as i64, c * k.clone())));
    Ok(TruncatedSeries::truncated(&poly, shift + terms as i64))
}

fn qint_i(n: i64) -> QComplex {
    Complex::new(BigRational::from_integer(BigInt::from(n)), BigRational::zero())
}

/// Principal `n`-th root of a complex rational, at its exact binary value.
fn principal_root(c: &QComplex, n: u32) -> Result<QComplex> {
    if n == 1 {
        return Ok(c.clone());
    }
    let z = c.to_c64();
    let root = z.powf(1.0 / n as f64);
    QComplex::from_c64(root).ok_or_else(|| Error::InvalidFamily(format!("root of {z} is not finite")))
}

/// Conjugates `g` to monic form over `s` with `t = s^{d−1}`. `terms` bounds
/// the series length when `a₀` is not a monomial.
pub fn normalize_family(g: &GeneralFamily, terms: usize, c: f64) -> Result<Normalized> {
    let d = g.degree();
    let one = LaurentPoly::one();
    if g.coeffs[0] == one {
        let family = HenonFamily::new(g.coeffs[1..].to_vec(), &g.a * &g.b, c)?;
        return Ok(Normalized {
            family,
            substitution: 1,
            lambda: TruncatedSeries::exact(&one),
            precision: Prec::Exact,
            residual: 0.0,
        });
    }
    let k = (d - 1) as i64;
    let sub = |p: &ExactLaurent| p.substitute_power(k);
    let a0 = sub(&g.coeffs[0]);
    let (_, c0) = a0.leading().expect("a₀ ≠ 0");
    let root = principal_root(c0, (d - 1) as u32)?;
    let lambda = rational_power(&a0, 1, k, &root, terms)?;

    let mut coeffs = Vec::with_capacity(d);
    let mut precision = Prec::Exact;
    for (idx, ak) in g.coeffs.iter().enumerate().skip(1) {
        // λ^{idx+1−d} = a₀^{(idx+1−d)/(d−1)}
        let pw = rational_power(&a0, idx as i64 + 1 - d as i64, k, &root, terms)?;
        let term = pw.mul_poly(&sub(ak));
        precision = precision.min(term.prec());
        coeffs.push(term.known_part());
    }
    let a_new = sub(&(&g.a * &g.b));
    let family = HenonFamily::new(coeffs, a_new, c)?;
    let residual = conjugation_residual(g, &family, &lambda, k as u32)?;
    Ok(Normalized { family, substitution: k as u32, lambda, precision, residual })
}

/// Relative deviation between `a'_k·λ^{d−1−k}` and `a_k(s^{d−1})` over the
/// known coefficients (the leading one checks `λ^{d−1} = a₀`).
fn conjugation_residual(
    g: &GeneralFamily,
    f: &HenonFamily,
    lambda: &TruncatedSeries<QComplex>,
    k: u32,
) -> Result<f64> {
    let d = g.degree();
    let lam = lambda.known_part().to_c64();
    let mut worst = 0.0f64;
    let cap = match lambda.prec() {
        Prec::Exact => i64::MAX,
        Prec::Below(n) => {
            let o = match lambda.known_part().ord() {
                Order::Finite(o) => o,
                Order::Infinity => 0,
            };
            n - o
        }
    };
    for idx in 0..=d {
        // a'_idx·λ^{d−1−idx} = a_idx, with negative powers moved across
        let lhs_coeff = if idx == 0 { LaurentPoly::one() } else { f.coeffs()[idx - 1].to_c64() };
        let lhs = &lhs_coeff * &lam.pow((d - 1).saturating_sub(idx) as u32);
        let rhs = &g.coeffs[idx].substitute_power(k as i64).to_c64() * &lam.pow((idx + 1).saturating_sub(d) as u32);
        let base = match rhs.ord().finite().or(lhs.ord().finite()) {
            Some(o) => o,
            None => continue,
        };
        let scale = rhs.terms().map(|(_, c)| c.norm()).fold(1.0, f64::max);
        let diff = &lhs - &rhs;
        for (e, c) in diff.terms() {
            if cap == i64::MAX || e < base + cap {
                worst = worst.max(c.norm() / scale);
            }
        }
    }
    Ok(worst)
}
