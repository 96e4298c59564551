//! Symbolic iterates `H^{±n}` and their five-section homogenization
//! `(F₁⁽ⁿ⁾, F₂⁽ⁿ⁾, F₁⁽⁻ⁿ⁾, F₂⁽⁻ⁿ⁾, Z^{dⁿ})`, together with the model
//! functions built from the sections.
//!
//! On the chart `Z = 1` the sections are the four iterate components and 1,
//! so `log Φ_{n,t} = dⁿ·G_{n,t}` with `G_{n,t} = max(G⁺_{n,t}, G⁻_{n,t})`.
//! Backward iterates divide by `a(t)`; they stay Laurent polynomials only
//! when `a` is a monomial, which is therefore required here.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde_json::{json, Value};

use crate::complex::C2;
use crate::dd::{Dd, DdC};
use crate::error::{Error, Result};
use crate::family::{ExactLaurent, HenonFamily};
use crate::json::laurent_to_json;
use crate::laurent::{HybridNormParams, LaurentPoly, Prec, SeriesOrder, TruncatedSeries};
use crate::na::NAPoint;
use crate::scalar::QComplex;

/// Default bound on `dⁿ` for symbolic composition.
pub const DEFAULT_DEGREE_BUDGET: u64 = 64;

/// Polynomial in `x, y` with Laurent coefficients in `t`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BivarPoly {
    terms: BTreeMap<(u32, u32), ExactLaurent>,
}

impl BivarPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: ExactLaurent) -> Self {
        Self::monomial(0, 0, c)
    }

    pub fn monomial(i: u32, j: u32, c: ExactLaurent) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert((i, j), c);
        }
        Self { terms }
    }

    pub fn x() -> Self {
        Self::monomial(1, 0, LaurentPoly::one())
    }

    pub fn y() -> Self {
        Self::monomial(0, 1, LaurentPoly::one())
    }

    pub fn terms(&self) -> impl Iterator<Item = ((u32, u32), &ExactLaurent)> + '_ {
        self.terms.iter().map(|(k, c)| (*k, c))
    }

    pub fn coeff(&self, i: u32, j: u32) -> ExactLaurent {
        self.terms.get(&(i, j)).cloned().unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn total_degree(&self) -> Option<u32> {
        self.terms.keys().map(|(i, j)| i + j).max()
    }

    fn accumulate(out: &mut BTreeMap<(u32, u32), ExactLaurent>, k: (u32, u32), c: ExactLaurent) {
        let e = out.entry(k).or_default();
        *e = &*e + &c;
    }

    fn canonical(mut terms: BTreeMap<(u32, u32), ExactLaurent>) -> Self {
        terms.retain(|_, c| !c.is_zero());
        Self { terms }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let mut out = self.terms.clone();
        for (k, c) in &rhs.terms {
            Self::accumulate(&mut out, *k, c.clone());
        }
        Self::canonical(out)
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.scale(&-LaurentPoly::one()))
    }

    pub fn scale(&self, c: &ExactLaurent) -> Self {
        Self::canonical(self.terms.iter().map(|(k, v)| (*k, v * c)).collect())
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let mut out = BTreeMap::new();
        for ((i1, j1), c1) in &self.terms {
            for ((i2, j2), c2) in &rhs.terms {
                Self::accumulate(&mut out, (i1 + i2, j1 + j2), c1 * c2);
            }
        }
        Self::canonical(out)
    }

    /// `x^d + a_1x^{d−1} + … + a_d` with `x` replaced by `self`.
    fn monic_poly_of(&self, coeffs: &[ExactLaurent]) -> Self {
        let mut acc = Self::constant(LaurentPoly::one());
        for c in coeffs {
            acc = acc.mul(self).add(&Self::constant(c.clone()));
        }
        acc
    }

    /// Value at `(x, y)` and parameter `t0`, in double-double.
    pub fn eval_dd(&self, x: DdC, y: DdC, t0: DdC) -> DdC {
        let tp = PowerCache::new(t0);
        let xp = PowerCache::new(x);
        let yp = PowerCache::new(y);
        let mut acc = DdC::ZERO;
        for ((i, j), c) in &self.terms {
            acc = acc + eval_laurent_dd(c, &tp) * xp.pow(*i as i64) * yp.pow(*j as i64);
        }
        acc
    }

    pub fn eval(&self, z: C2, t0: Complex64) -> Complex64 {
        self.eval_dd(DdC::from_c64(z.x), DdC::from_c64(z.y), DdC::from_c64(t0)).to_c64()
    }

    /// Exact value at a point of `ℂ((t))²`, keeping `work` coefficients past
    /// each intermediate order.
    fn eval_series(
        &self,
        x: &TruncatedSeries<QComplex>,
        y: &TruncatedSeries<QComplex>,
        work: usize,
    ) -> TruncatedSeries<QComplex> {
        let window = |s: TruncatedSeries<QComplex>| match s.order() {
            SeriesOrder::Exact(k) => s.truncate(Prec::Below(k + work as i64)),
            _ => s,
        };
        let max_i = self.terms.keys().map(|k| k.0).max().unwrap_or(0);
        let max_j = self.terms.keys().map(|k| k.1).max().unwrap_or(0);
        let mut xs = vec![TruncatedSeries::exact(&LaurentPoly::one())];
        for _ in 0..max_i {
            let next = window(xs.last().unwrap().mul(x));
            xs.push(next);
        }
        let mut ys = vec![TruncatedSeries::exact(&LaurentPoly::one())];
        for _ in 0..max_j {
            let next = window(ys.last().unwrap().mul(y));
            ys.push(next);
        }
        let mut acc = TruncatedSeries::zero();
        for ((i, j), c) in &self.terms {
            let term = xs[*i as usize].mul(&ys[*j as usize]).mul_poly(c);
            acc = acc.add(&window(term));
        }
        acc
    }
}

struct PowerCache {
    base: DdC,
    inv: Option<DdC>,
}

impl PowerCache {
    fn new(base: DdC) -> Self {
        let inv = (base.norm_sqr().to_f64() > 0.0).then(|| base.inv());
        Self { base, inv }
    }

    fn pow(&self, e: i64) -> DdC {
        if e >= 0 {
            self.base.powi(e)
        } else {
            self.inv.expect("negative power of zero").powi(-e)
        }
    }
}

fn eval_laurent_dd(c: &ExactLaurent, tp: &PowerCache) -> DdC {
    c.terms().fold(DdC::ZERO, |acc, (e, q)| acc + DdC::from_q(q) * tp.pow(e))
}

/// The components of `Hⁿ` and `H⁻ⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterates {
    pub n: u32,
    pub forward: (BivarPoly, BivarPoly),
    pub backward: (BivarPoly, BivarPoly),
}

fn check_budget(d: usize, n: u32, budget: u64) -> Result<u64> {
    let deg = (d as u64).checked_pow(n).unwrap_or(u64::MAX);
    if deg > budget {
        return Err(Error::BudgetExceeded { degree: deg, budget });
    }
    Ok(deg)
}

/// `1/a` for a monomial `a`.
fn monomial_inverse(a: &ExactLaurent) -> Result<ExactLaurent> {
    if !a.is_monomial() {
        return Err(Error::Unsupported(
            "backward iterates need 1/a(t) as a Laurent polynomial; a(t) must be a monomial".into(),
        ));
    }
    let (e, c) = a.leading().expect("nonzero");
    Ok(LaurentPoly::monomial(-e, QComplex::one() / c.clone()))
}

/// Exact `Hⁿ` and `H⁻ⁿ` as polynomials in `x, y` (`n ≥ 1`, `dⁿ ≤ budget`).
pub fn compose_iterates(family: &HenonFamily, n: u32, budget: u64) -> Result<Iterates> {
    if n == 0 {
        return Err(Error::Unsupported("iterate count must be at least 1".into()));
    }
    check_budget(family.degree(), n, budget)?;
    let a_inv = monomial_inverse(family.a())?;
    let coeffs = family.coeffs();
    let (mut f1, mut f2) = (BivarPoly::x(), BivarPoly::y());
    let (mut b1, mut b2) = (BivarPoly::x(), BivarPoly::y());
    for _ in 0..n {
        let nf1 = f1.monic_poly_of(coeffs).sub(&f2.scale(family.a()));
        f2 = std::mem::replace(&mut f1, nf1);
        let nb2 = b2.monic_poly_of(coeffs).sub(&b1).scale(&a_inv);
        b1 = std::mem::replace(&mut b2, nb2);
    }
    Ok(Iterates { n, forward: (f1, f2), backward: (b1, b2) })
}

/// Homogeneous polynomial in `X, Y, Z` with Laurent coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriPoly {
    terms: BTreeMap<(u32, u32, u32), ExactLaurent>,
}

impl TriPoly {
    /// `Z^D·P(X/Z, Y/Z)`; requires `deg P ≤ D`.
    pub fn homogenize(p: &BivarPoly, degree: u32) -> Result<Self> {
        let mut terms = BTreeMap::new();
        for ((i, j), c) in p.terms() {
            if i + j > degree {
                return Err(Error::StructureViolation(format!(
                    "monomial x^{i}y^{j} exceeds degree {degree}"
                )));
            }
            terms.insert((i, j, degree - i - j), c.clone());
        }
        Ok(Self { terms })
    }

    pub fn z_power(degree: u32) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert((0, 0, degree), LaurentPoly::one());
        Self { terms }
    }

    pub fn terms(&self) -> impl Iterator<Item = ((u32, u32, u32), &ExactLaurent)> + '_ {
        self.terms.iter().map(|(k, c)| (*k, c))
    }

    /// `P(x, y) = F(x, y, 1)`.
    pub fn dehomogenize(&self) -> BivarPoly {
        BivarPoly::canonical(self.terms.iter().map(|((i, j, _), c)| ((*i, *j), c.clone())).collect())
    }

    /// Terms with no `Z`.
    pub fn z_zero_slice(&self) -> BTreeMap<(u32, u32), ExactLaurent> {
        self.terms
            .iter()
            .filter(|((_, _, k), _)| *k == 0)
            .map(|((i, j, _), c)| ((*i, *j), c.clone()))
            .collect()
    }

    pub fn is_homogeneous_of(&self, degree: u32) -> bool {
        self.terms.keys().all(|(i, j, k)| i + j + k == degree)
    }

    pub fn divisible_by_z(&self) -> bool {
        self.terms.keys().all(|(_, _, k)| *k >= 1)
    }

    pub fn eval_dd(&self, x: DdC, y: DdC, z: DdC, t0: DdC) -> DdC {
        let tp = PowerCache::new(t0);
        let (xp, yp, zp) = (PowerCache::new(x), PowerCache::new(y), PowerCache::new(z));
        let mut acc = DdC::ZERO;
        for ((i, j, k), c) in &self.terms {
            acc = acc
                + eval_laurent_dd(c, &tp) * xp.pow(*i as i64) * yp.pow(*j as i64) * zp.pow(*k as i64);
        }
        acc
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.terms
                .iter()
                .map(|((i, j, k), c)| json!([[i, j, k], laurent_to_json(c)]))
                .collect(),
        )
    }
}

/// The five sections, all homogeneous of degree `dⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousDatum {
    pub n: u32,
    pub d: usize,
    pub degree: u32,
    /// `F₁⁽ⁿ⁾, F₂⁽ⁿ⁾, F₁⁽⁻ⁿ⁾, F₂⁽⁻ⁿ⁾, Z^{dⁿ}`.
    pub sections: [TriPoly; 5],
    /// Leading coefficient of `F₂⁽⁻ⁿ⁾` at `Y^{dⁿ}`, `a^{−(dⁿ−1)/(d−1)}`.
    pub backward_leading: ExactLaurent,
}

/// Expected `a^{−(dⁿ−1)/(d−1)}` for a monomial `a`.
fn backward_leading_coeff(a: &ExactLaurent, d: usize, n: u32) -> Result<ExactLaurent> {
    let inv = monomial_inverse(a)?;
    let exp = ((d as u64).pow(n) - 1) / (d as u64 - 1);
    Ok(inv.pow(exp as u32))
}

pub fn homogenize_datum(family: &HenonFamily, n: u32, budget: u64) -> Result<HomogeneousDatum> {
    let it = compose_iterates(family, n, budget)?;
    let degree = check_budget(family.degree(), n, budget)? as u32;
    let sections = [
        TriPoly::homogenize(&it.forward.0, degree)?,
        TriPoly::homogenize(&it.forward.1, degree)?,
        TriPoly::homogenize(&it.backward.0, degree)?,
        TriPoly::homogenize(&it.backward.1, degree)?,
        TriPoly::z_power(degree),
    ];
    let datum = HomogeneousDatum {
        n,
        d: family.degree(),
        degree,
        sections,
        backward_leading: backward_leading_coeff(family.a(), family.degree(), n)?,
    };
    datum.check_structure()?;
    Ok(datum)
}

impl HomogeneousDatum {
    /// Degree, leading-term, divisibility and base-locus checks.
    pub fn check_structure(&self) -> Result<()> {
        let deg = self.degree;
        for (idx, s) in self.sections.iter().enumerate() {
            if !s.is_homogeneous_of(deg) {
                return Err(Error::StructureViolation(format!("section {idx} is not homogeneous of degree {deg}")));
            }
        }
        for (idx, s) in [(1, &self.sections[1]), (2, &self.sections[2])] {
            if !s.divisible_by_z() {
                return Err(Error::StructureViolation(format!("section {idx} is not divisible by Z")));
            }
        }
        let expect_x: BTreeMap<_, _> = [((deg, 0), LaurentPoly::one())].into();
        if self.sections[0].z_zero_slice() != expect_x {
            return Err(Error::StructureViolation("F₁⁽ⁿ⁾ is not X^{dⁿ} + Z·(…)".into()));
        }
        let expect_y: BTreeMap<_, _> = [((0, deg), self.backward_leading.clone())].into();
        if self.sections[3].z_zero_slice() != expect_y {
            return Err(Error::StructureViolation("F₂⁽⁻ⁿ⁾ is not c·Y^{dⁿ} + Z·(…)".into()));
        }
        Ok(())
    }

    /// Restriction to `Z = 0` of each section.
    pub fn z_zero_slice(&self) -> [BTreeMap<(u32, u32), ExactLaurent>; 5] {
        [0, 1, 2, 3, 4].map(|i| self.sections[i].z_zero_slice())
    }

    /// Sections with their coefficients evaluated at `t0`.
    pub fn at(&self, t0: Complex64) -> SpecializedDatum {
        let tp = PowerCache::new(DdC::from_c64(t0));
        let sections = self
            .sections
            .iter()
            .map(|s| s.terms.iter().map(|(&(i, j, k), c)| ([i, j, k], eval_laurent_dd(c, &tp))).collect())
            .collect();
        SpecializedDatum { degree: self.degree, sections }
    }

    /// `Φ_{n,t}([X:Y:Z])` in double-double: max of the section moduli.
    pub fn phi_max_dd(&self, p: [Complex64; 3], t0: Complex64) -> Dd {
        self.at(t0).phi_max_dd(p)
    }

    /// `log Φ_{n,t}` (no metric factor).
    pub fn model_function_unnormalized(&self, p: [Complex64; 3], t0: Complex64) -> f64 {
        self.at(t0).model_function_unnormalized(p)
    }

    /// `φ_{F_n} = log Φ_{n,t} − (dⁿ/2)·log(|X|² + |Y|² + |Z|²)`.
    pub fn model_function_phi(&self, p: [Complex64; 3], t0: Complex64) -> f64 {
        self.at(t0).model_function_phi(p)
    }

    /// Non-archimedean model function at a classical point on `Z = 1`, as
    /// the rational `q` with `g = q·log(1/r)`:
    /// `q = −min_i ord F_i(x, y, 1) + dⁿ·min(ord x, ord y, 0)`.
    pub fn na_model_function_g(&self, p: &NAPoint) -> Result<BigRational> {
        let ord_of = |s: &TruncatedSeries<QComplex>, what: &str| -> Result<Option<i64>> {
            match s.order() {
                SeriesOrder::Exact(k) => Ok(Some(k)),
                SeriesOrder::Zero => Ok(None),
                SeriesOrder::AtLeast(k) => Err(Error::InsufficientPrecision(format!(
                    "order of {what} only known to be ≥ {k}"
                ))),
            }
        };
        let ux = ord_of(&p.x, "x")?;
        let uy = ord_of(&p.y, "y")?;
        let base = [ux, uy, Some(0)].into_iter().flatten().min().expect("contains 0");
        let mut work = crate::na::DEFAULT_WORK;
        loop {
            let mut min_ord: Option<i64> = None;
            let mut failed = None;
            for (idx, s) in self.sections.iter().enumerate() {
                let v = s.dehomogenize().eval_series(&p.x, &p.y, work);
                match ord_of(&v, &format!("section {idx}")) {
                    Ok(Some(k)) => min_ord = Some(min_ord.map_or(k, |m: i64| m.min(k))),
                    Ok(None) => {}
                    Err(e) => failed = Some(e),
                }
            }
            match failed {
                Some(_) if work < crate::na::MAX_WORK => work *= 2,
                Some(e) => return Err(e),
                None => {
                    let m = min_ord.expect("Z^D section is 1 on the chart");
                    return Ok(BigRational::from_integer(BigInt::from(-m + self.degree as i64 * base)));
                }
            }
        }
    }

    /// `max log(‖c‖_{A_r}) / dⁿ` over all section coefficients.
    pub fn coefficient_growth(&self, r: HybridNormParams) -> f64 {
        self.sections
            .iter()
            .flat_map(|s| s.terms().map(|(_, c)| c.hybrid_norm(r).ln()))
            .fold(0.0, f64::max)
            / self.degree as f64
    }

    pub fn to_json(&self) -> Value {
        json!({
            "n": self.n,
            "d": self.d,
            "degree": self.degree,
            "sections": self.sections.iter().map(TriPoly::to_json).collect::<Vec<_>>(),
        })
    }
}

/// `G_{n,t}(x, y) = max(G⁺_{n,t}, G⁻_{n,t})` by iterating the map in
/// double-double. Used to cross-check the section evaluation.
pub fn green_n_dd(family: &HenonFamily, z: C2, n: u32, t0: Complex64) -> Result<f64> {
    let t = DdC::from_c64(t0);
    let tp = PowerCache::new(t);
    let coeffs: Vec<DdC> = family.coeffs().iter().map(|c| eval_laurent_dd(c, &tp)).collect();
    let a = eval_laurent_dd(family.a(), &tp);
    if a.norm().to_f64() == 0.0 {
        return Err(Error::InvalidFamily(format!("a(t) vanishes at t = {t0}")));
    }
    let a_inv = a.inv();
    let p = |x: DdC| coeffs.iter().fold(DdC::ONE, |acc, c| acc * x + *c);
    let (mut fx, mut fy) = (DdC::from_c64(z.x), DdC::from_c64(z.y));
    let (mut bx, mut by) = (fx, fy);
    for _ in 0..n {
        let nx = p(fx) - a * fy;
        fy = fx;
        fx = nx;
        let ny = (p(by) - bx) * a_inv;
        bx = by;
        by = ny;
    }
    let lg = |u: DdC, v: DdC| {
        let m = if u.norm().to_f64() >= v.norm().to_f64() { u.norm() } else { v.norm() };
        if m.to_f64() <= 1.0 {
            0.0
        } else {
            m.ln()
        }
    };
    let dn = (family.degree() as f64).powi(n as i32);
    Ok(lg(fx, fy).max(lg(bx, by)) / dn)
}

/// A homogeneous datum at a fixed parameter, for repeated evaluation.
#[derive(Debug, Clone)]
pub struct SpecializedDatum {
    degree: u32,
    sections: Vec<Vec<([u32; 3], DdC)>>,
}

fn power_table(b: DdC, n: u32) -> Vec<DdC> {
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut acc = DdC::ONE;
    for _ in 0..=n {
        out.push(acc);
        acc = acc * b;
    }
    out
}

impl SpecializedDatum {
    pub fn phi_max_dd(&self, p: [Complex64; 3]) -> Dd {
        let [xp, yp, zp] = p.map(|c| power_table(DdC::from_c64(c), self.degree));
        self.sections
            .iter()
            .map(|s| {
                s.iter()
                    .fold(DdC::ZERO, |acc, ([i, j, k], c)| {
                        acc + *c * xp[*i as usize] * yp[*j as usize] * zp[*k as usize]
                    })
                    .norm()
            })
            .fold(Dd::ZERO, |m, v| if v.to_f64() > m.to_f64() { v } else { m })
    }

    pub fn model_function_unnormalized(&self, p: [Complex64; 3]) -> f64 {
        self.phi_max_dd(p).ln()
    }

    pub fn model_function_phi(&self, p: [Complex64; 3]) -> f64 {
        let nsq = p.iter().fold(Dd::ZERO, |acc, c| acc + DdC::from_c64(*c).norm_sqr());
        self.model_function_unnormalized(p) - 0.5 * self.degree as f64 * nsq.ln()
    }
}

/// Exact `G_n(p) = max(log⁺‖Hⁿp‖, log⁺‖H⁻ⁿp‖)/dⁿ` over `ℂ((t))`, as the
/// rational multiple of `log(1/r)`.
pub fn na_green_n(h: &crate::na::NAHenon, p: &NAPoint, n: u32) -> Result<BigRational> {
    use crate::complex::Branch;
    let mut best = BigRational::zero();
    for branch in [Branch::Plus, Branch::Minus] {
        let orbit = h.orbit(p, n as usize, branch)?;
        let w = crate::na::na_val(orbit.last().expect("nonempty"))?;
        if let Some(o) = w.norm_order().finite() {
            best = best.max(-o.clone());
        }
    }
    Ok(best / BigRational::from_integer(BigInt::from(h.degree()).pow(n)))
}

/// `−min(ord x, ord y, 0)`, the exponent of `log max(|x|, |y|, 1)`.
pub fn na_log_max_norm(p: &NAPoint) -> Result<BigRational> {
    let w = crate::na::na_val(p)?;
    let m = match w.norm_order() {
        crate::na::ExtRational::Finite(q) => q.min(BigRational::zero()),
        crate::na::ExtRational::Infinity => BigRational::zero(),
    };
    Ok(-m)
}
