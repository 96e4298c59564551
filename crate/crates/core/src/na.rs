//! Hénon dynamics over the non-archimedean field `ℂ((t))` with
//! `|f| = r^{ord f}`.
//!
//! Everything here is exact. Valuation data are rationals (`|x| = r^u`), and
//! classical points are pairs of truncated Laurent series whose orders are
//! certified before they are used. A Green value `q` means
//! `G = q·log(1/r)`.
//!
//! The filtration radius is an order `ρ` (`R = r^ρ`); the default is the
//! smallest power of `r` strictly above `max{|a_i|, |a|, 1}`, i.e.
//! `ρ = min(ord a_i, ord a, 0) − 1`.

use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use serde_json::{json, Value};

use crate::complex::{Branch, Region};
use crate::error::{Error, Result};
use crate::family::{ExactLaurent, HenonFamily};
use crate::json::{ext_rational_from_json, ext_rational_to_json, rational_to_json};
use crate::laurent::{HybridNormParams, LaurentPoly, Order, Prec, SeriesOrder, TruncatedSeries};
use crate::scalar::QComplex;

/// Default relative working precision (Laurent coefficients) for exact orbits.
pub const DEFAULT_WORK: usize = 64;
/// Working precision is doubled up to this cap on `InsufficientPrecision`.
pub const MAX_WORK: usize = 1024;
/// Starting precision when only orders are needed.
const ORDER_WORK: usize = 8;

/// A rational or `+∞` (the order of zero).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExtRational {
    Finite(BigRational),
    Infinity,
}

impl ExtRational {
    pub fn int(n: i64) -> Self {
        ExtRational::Finite(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn finite(&self) -> Option<&BigRational> {
        match self {
            ExtRational::Finite(q) => Some(q),
            ExtRational::Infinity => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtRational::Infinity)
    }

    fn add(&self, rhs: &ExtRational) -> ExtRational {
        match (self, rhs) {
            (ExtRational::Finite(a), ExtRational::Finite(b)) => ExtRational::Finite(a + b),
            _ => ExtRational::Infinity,
        }
    }

    /// Order of the `k`-th power; `ord(0⁰) = ord(1) = 0`.
    fn scale(&self, k: i64) -> ExtRational {
        match self {
            ExtRational::Finite(a) => ExtRational::Finite(a * BigInt::from(k)),
            ExtRational::Infinity if k == 0 => ExtRational::int(0),
            ExtRational::Infinity => ExtRational::Infinity,
        }
    }

    /// `r^self` (0 for `+∞`).
    pub fn abs_value(&self, r: f64) -> f64 {
        match self {
            ExtRational::Finite(q) => r.powf(crate::scalar::rat_to_f64(q)),
            ExtRational::Infinity => 0.0,
        }
    }

    pub fn to_json(&self) -> Value {
        ext_rational_to_json(self.finite())
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        Ok(ext_rational_from_json(v)?.map_or(ExtRational::Infinity, ExtRational::Finite))
    }
}

impl From<Order> for ExtRational {
    fn from(o: Order) -> Self {
        match o {
            Order::Finite(k) => ExtRational::int(k),
            Order::Infinity => ExtRational::Infinity,
        }
    }
}

impl From<BigRational> for ExtRational {
    fn from(q: BigRational) -> Self {
        ExtRational::Finite(q)
    }
}

impl fmt::Display for ExtRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtRational::Finite(q) => write!(f, "{q}"),
            ExtRational::Infinity => f.write_str("inf"),
        }
    }
}

/// Valuation data `(u, v) = (ord x, ord y)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ValPoint {
    pub u: ExtRational,
    pub v: ExtRational,
}

impl ValPoint {
    pub fn new(u: ExtRational, v: ExtRational) -> Self {
        Self { u, v }
    }

    pub fn ints(u: i64, v: i64) -> Self {
        Self::new(ExtRational::int(u), ExtRational::int(v))
    }

    /// Order of the sup norm, `min(u, v)`.
    pub fn norm_order(&self) -> ExtRational {
        self.u.clone().min(self.v.clone())
    }

    pub fn to_json(&self) -> Value {
        json!({"u": self.u.to_json(), "v": self.v.to_json()})
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let get = |k: &str| {
            v.get(k)
                .ok_or_else(|| Error::Parse(format!("valuation point lacks \"{k}\"")))
                .and_then(ExtRational::from_json)
        };
        Ok(Self::new(get("u")?, get("v")?))
    }
}

impl fmt::Display for ValPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.u, self.v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NAGreenStatus {
    Exact,
    BoundedToBudget,
}

/// `G = q·log(1/r)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NAGreenValue {
    pub q: BigRational,
    pub status: NAGreenStatus,
    /// Step at which the orbit entered `V^±`.
    pub escape_time: Option<usize>,
}

impl NAGreenValue {
    pub fn value(&self, r: f64) -> f64 {
        crate::scalar::rat_to_f64(&self.q) * -r.ln()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "q": rational_to_json(&self.q),
            "status": match self.status {
                NAGreenStatus::Exact => "Exact",
                NAGreenStatus::BoundedToBudget => "BoundedToBudget",
            },
            "escape_time": self.escape_time,
        })
    }
}

/// Classical point of `ℂ((t))²`.
#[derive(Debug, Clone, PartialEq)]
pub struct NAPoint {
    pub x: TruncatedSeries<QComplex>,
    pub y: TruncatedSeries<QComplex>,
    pub r: HybridNormParams,
}

impl NAPoint {
    /// Rejects coordinates whose order is only lower-bounded.
    pub fn new(
        x: TruncatedSeries<QComplex>,
        y: TruncatedSeries<QComplex>,
        r: HybridNormParams,
    ) -> Result<Self> {
        for (name, s) in [("x", &x), ("y", &y)] {
            if !s.order().is_certified() {
                return Err(Error::InsufficientPrecision(format!(
                    "coordinate {name} has no known nonzero coefficient below its precision"
                )));
            }
        }
        Ok(Self { x, y, r })
    }

    pub fn exact(x: &ExactLaurent, y: &ExactLaurent, r: HybridNormParams) -> Self {
        Self { x: TruncatedSeries::exact(x), y: TruncatedSeries::exact(y), r }
    }
}

fn series_order(s: &TruncatedSeries<QComplex>, what: &str) -> Result<ExtRational> {
    match s.order() {
        SeriesOrder::Exact(k) => Ok(ExtRational::int(k)),
        SeriesOrder::Zero => Ok(ExtRational::Infinity),
        SeriesOrder::AtLeast(k) => Err(Error::InsufficientPrecision(format!(
            "order of {what} is only known to be ≥ {k}"
        ))),
    }
}

/// Orders of both coordinates.
pub fn na_val(p: &NAPoint) -> Result<ValPoint> {
    Ok(ValPoint::new(series_order(&p.x, "x")?, series_order(&p.y, "y")?))
}

/// `‖p‖ = max(r^{ord x}, r^{ord y})`.
pub fn na_norm(p: &NAPoint) -> Result<f64> {
    Ok(na_val(p)?.norm_order().abs_value(p.r.r()))
}

/// Keeps `work` coefficients past the order.
/// Exact series already inside the window stay exact.
fn window(s: TruncatedSeries<QComplex>, work: usize) -> TruncatedSeries<QComplex> {
    match s.order() {
        SeriesOrder::Exact(k) => {
            let top = s.terms().last().map(|(e, _)| e).unwrap_or(k);
            if s.prec() == Prec::Exact && top < k + work as i64 {
                s
            } else {
                s.truncate(Prec::Below(k + work as i64))
            }
        }
        _ => s,
    }
}

/// Hénon map over `ℂ((t))` at base `r` with an exact filtration radius.
#[derive(Debug, Clone, PartialEq)]
pub struct NAHenon {
    d: usize,
    coeffs: Vec<ExactLaurent>,
    a: ExactLaurent,
    coeff_orders: Vec<ExtRational>,
    a_order: BigRational,
    r: HybridNormParams,
    radius_order: BigRational,
}

impl NAHenon {
    pub fn new(family: &HenonFamily, r: HybridNormParams) -> Self {
        let (orders, a_order) = family.orders();
        let coeff_orders: Vec<ExtRational> = orders.into_iter().map(ExtRational::from).collect();
        let a_order = match a_order {
            Order::Finite(k) => BigRational::from_integer(BigInt::from(k)),
            Order::Infinity => unreachable!("a(t) is nonzero by construction"),
        };
        let mut h = Self {
            d: family.degree(),
            coeffs: family.coeffs().to_vec(),
            a: family.a().clone(),
            coeff_orders,
            a_order,
            r,
            radius_order: BigRational::zero(),
        };
        h.radius_order = h.max_order_bound() - BigRational::one();
        h
    }

    /// `min(ord a_i, ord a, 0)`, the order of `max{|a_i|, |a|, 1}`.
    fn max_order_bound(&self) -> BigRational {
        let mut m = BigRational::zero().min(self.a_order.clone());
        for o in &self.coeff_orders {
            if let ExtRational::Finite(q) = o {
                m = m.min(q.clone());
            }
        }
        m
    }

    /// Uses `R = r^ρ`; requires `R > max{|a_i|, |a|, 1}`.
    pub fn with_radius_order(mut self, rho: BigRational) -> Result<Self> {
        let bound = self.max_order_bound();
        if rho >= bound {
            return Err(Error::InvalidRadius(format!(
                "R = r^{rho} does not exceed max(|a_i|, |a|, 1) = r^{bound}"
            )));
        }
        self.radius_order = rho;
        Ok(self)
    }

    /// Real-radius form of [`Self::with_radius_order`]; `ρ = log R / log r`
    /// is taken at its exact binary value.
    pub fn with_radius(self, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidRadius(format!("R = {radius}")));
        }
        let rho = BigRational::from_float(radius.ln() / self.r.r().ln())
            .ok_or_else(|| Error::InvalidRadius(format!("R = {radius}")))?;
        self.with_radius_order(rho)
    }

    pub fn degree(&self) -> usize {
        self.d
    }

    pub fn r(&self) -> HybridNormParams {
        self.r
    }

    pub fn radius_order(&self) -> &BigRational {
        &self.radius_order
    }

    pub fn radius(&self) -> f64 {
        self.r.r().powf(crate::scalar::rat_to_f64(&self.radius_order))
    }

    pub fn coeff_orders(&self) -> &[ExtRational] {
        &self.coeff_orders
    }

    pub fn a_order(&self) -> &BigRational {
        &self.a_order
    }

    /// Same tie-break as the complex filtration, in orders: `|x| ≥ |y|` is
    /// `u ≤ v` and `|x| ≥ R` is `u ≤ ρ`.
    pub fn classify(&self, w: &ValPoint) -> Region {
        let rho = ExtRational::Finite(self.radius_order.clone());
        if w.u <= w.v && w.u <= rho {
            Region::VPlus
        } else if w.v <= rho {
            Region::VMinus
        } else {
            Region::W
        }
    }

    /// Candidate orders of the terms of `p(s) − a·w`: `d·s`, `ord a_i + (d−i)s`
    /// (index `i`), then `ord a + w` (index `d + 1`).
    fn candidates(&self, s: &ExtRational, other: &ExtRational) -> Vec<ExtRational> {
        let d = self.d as i64;
        let mut c = Vec::with_capacity(self.d + 2);
        c.push(s.scale(d));
        for (i, o) in self.coeff_orders.iter().enumerate() {
            c.push(o.add(&s.scale(d - 1 - i as i64)));
        }
        c.push(other.add(&ExtRational::Finite(self.a_order.clone())));
        c
    }

    fn unique_min(c: Vec<ExtRational>) -> Result<ExtRational> {
        let min = c.iter().min().cloned().expect("nonempty");
        if min.is_infinite() {
            return Ok(min);
        }
        let terms: Vec<usize> = c
            .iter()
            .enumerate()
            .filter(|(_, v)| **v == min)
            .map(|(i, _)| i)
            .collect();
        if terms.len() > 1 {
            return Err(Error::TropicalTie { terms, value: min });
        }
        Ok(min)
    }

    /// Valuation-level image under `H`. Exact whenever one term dominates.
    pub fn tropical_step(&self, w: &ValPoint) -> Result<ValPoint> {
        let u1 = Self::unique_min(self.candidates(&w.u, &w.v))?;
        Ok(ValPoint::new(u1, w.u.clone()))
    }

    /// Valuation-level image under `H⁻¹(x, y) = (y, (p(y) − x)/a)`.
    pub fn tropical_step_inverse(&self, w: &ValPoint) -> Result<ValPoint> {
        let mut c = self.candidates(&w.v, &w.u);
        // the x term enters with coefficient 1, not a
        let last = c.len() - 1;
        c[last] = w.u.clone();
        let m = Self::unique_min(c)?;
        let v1 = m.add(&ExtRational::Finite(-self.a_order.clone()));
        Ok(ValPoint::new(w.v.clone(), v1))
    }

    pub fn tropical_step_branch(&self, w: &ValPoint, branch: Branch) -> Result<ValPoint> {
        match branch {
            Branch::Plus => self.tropical_step(w),
            Branch::Minus => self.tropical_step_inverse(w),
        }
    }

    fn p_series(&self, s: &TruncatedSeries<QComplex>, work: usize) -> TruncatedSeries<QComplex> {
        let mut acc = TruncatedSeries::exact(&LaurentPoly::one());
        for c in &self.coeffs {
            acc = window(acc.mul(s), work).add(&TruncatedSeries::exact(c));
        }
        acc
    }

    fn apply_work(&self, p: &NAPoint, work: usize) -> Result<NAPoint> {
        let x1 = self.p_series(&p.x, work).sub(&p.y.mul_poly(&self.a));
        let x1 = window(x1, work);
        NAPoint::new(x1, p.x.clone(), p.r)
    }

    fn apply_inverse_work(&self, p: &NAPoint, work: usize) -> Result<NAPoint> {
        let num = self.p_series(&p.y, work).sub(&p.x);
        let y1 = window(num.div_poly(&self.a, work)?, work);
        NAPoint::new(p.y.clone(), y1, p.r)
    }

    /// Exact image under `H`, truncated to the default working precision.
    pub fn apply(&self, p: &NAPoint) -> Result<NAPoint> {
        self.apply_work(p, DEFAULT_WORK)
    }

    /// Exact image under `H⁻¹`. Division by a non-monomial `a(t)` expands its
    /// inverse; the working precision doubles (64 up to 1024) until the
    /// resulting orders are certified.
    pub fn apply_inverse(&self, p: &NAPoint) -> Result<NAPoint> {
        with_doubling(|work| self.apply_inverse_work(p, work))
    }

    fn step_work(&self, p: &NAPoint, branch: Branch, work: usize) -> Result<NAPoint> {
        match branch {
            Branch::Plus => self.apply_work(p, work),
            Branch::Minus => self.apply_inverse_work(p, work),
        }
    }

    /// Exact orbit `p, H^{±1}(p), …, H^{±n}(p)`.
    pub fn orbit(&self, p: &NAPoint, n: usize, branch: Branch) -> Result<Vec<NAPoint>> {
        with_doubling(|work| {
            let mut out = Vec::with_capacity(n + 1);
            out.push(p.clone());
            for _ in 0..n {
                let next = self.step_work(out.last().expect("nonempty"), branch, work)?;
                out.push(next);
            }
            Ok(out)
        })
    }

    /// Orders along the exact orbit. Only as many coefficients are kept as
    /// certifying the orders requires.
    pub fn orbit_orders(&self, p: &NAPoint, n: usize, branch: Branch) -> Result<Vec<ValPoint>> {
        with_doubling_from(ORDER_WORK, |work| {
            let mut cur = p.clone();
            let mut out = Vec::with_capacity(n + 1);
            out.push(na_val(&cur)?);
            for _ in 0..n {
                cur = self.step_work(&cur, branch, work)?;
                out.push(na_val(&cur)?);
            }
            Ok(out)
        })
    }

    /// Green value from the first iterate in `V^±` (at step `m`, orders `w`).
    /// Plus: `u` is multiplied by exactly `d` per step, so `q = −u_m/d^m`.
    /// Minus: `v ↦ d·v − ord a` per step, so `q = −(v_m − ord a/(d−1))/d^m`.
    fn green_from_escape(&self, w: &ValPoint, m: usize, branch: Branch) -> BigRational {
        let dm = BigRational::from_integer(BigInt::from(self.d).pow(m as u32));
        let q = match branch {
            Branch::Plus => -w.u.finite().expect("finite in V⁺").clone() / dm,
            Branch::Minus => {
                let shift = self.a_order.clone() / BigInt::from(self.d as i64 - 1);
                -(w.v.finite().expect("finite in V⁻").clone() - shift) / dm
            }
        };
        q.max(BigRational::zero())
    }

    fn target(branch: Branch) -> Region {
        match branch {
            Branch::Plus => Region::VPlus,
            Branch::Minus => Region::VMinus,
        }
    }

    /// `G^±` from valuation data alone. Ties are reported, never guessed.
    pub fn green_val(&self, w: &ValPoint, budget: usize, branch: Branch) -> Result<NAGreenValue> {
        let mut cur = w.clone();
        for m in 0..=budget {
            if self.classify(&cur) == Self::target(branch) {
                return Ok(NAGreenValue {
                    q: self.green_from_escape(&cur, m, branch),
                    status: NAGreenStatus::Exact,
                    escape_time: Some(m),
                });
            }
            if m < budget {
                cur = self.tropical_step_branch(&cur, branch)?;
            }
        }
        Ok(NAGreenValue { q: BigRational::zero(), status: NAGreenStatus::BoundedToBudget, escape_time: None })
    }

    /// Lower bounds on the orders of `H^{±1}(p)` from lower bounds on those of
    /// `p` (ultrametric inequality; ties only raise the true order).
    fn step_lower_bound(&self, w: &ValPoint, branch: Branch) -> ValPoint {
        match branch {
            Branch::Plus => {
                let u1 = self.candidates(&w.u, &w.v).into_iter().min().expect("nonempty");
                ValPoint::new(u1, w.u.clone())
            }
            Branch::Minus => {
                let mut c = self.candidates(&w.v, &w.u);
                let last = c.len() - 1;
                c[last] = w.u.clone();
                let m = c.into_iter().min().expect("nonempty");
                ValPoint::new(w.v.clone(), m.add(&ExtRational::Finite(-self.a_order.clone())))
            }
        }
    }

    /// Every point with orders at least `lb` lies in `W`.
    fn surely_in_w(&self, lb: &ValPoint) -> bool {
        let rho = ExtRational::Finite(self.radius_order.clone());
        lb.u > rho && lb.v > rho
    }

    /// `G^±` of a classical point. Steps are tropical while one term
    /// dominates. After a tie only lower bounds on the orders are carried;
    /// the exact orbit is replayed when those
    /// bounds no longer keep the orbit inside `W`. Replays start from `p`
    /// itself, so no precision is lost between them.
    pub fn green_point(&self, p: &NAPoint, budget: usize, branch: Branch) -> Result<NAGreenValue> {
        enum State {
            Exact(ValPoint),
            Lower(ValPoint),
        }
        let mut state = State::Exact(na_val(p)?);
        let mut m = 0usize;
        loop {
            if let State::Lower(lb) = &state {
                if !self.surely_in_w(lb) {
                    state = State::Exact(self.orbit_orders(p, m, branch)?.pop().expect("nonempty"));
                }
            }
            if let State::Exact(w) = &state {
                if self.classify(w) == Self::target(branch) {
                    return Ok(NAGreenValue {
                        q: self.green_from_escape(w, m, branch),
                        status: NAGreenStatus::Exact,
                        escape_time: Some(m),
                    });
                }
            }
            if m == budget {
                return Ok(NAGreenValue {
                    q: BigRational::zero(),
                    status: NAGreenStatus::BoundedToBudget,
                    escape_time: None,
                });
            }
            state = match state {
                State::Exact(w) => match self.tropical_step_branch(&w, branch) {
                    Ok(next) => State::Exact(next),
                    // resolved on demand by the replay above
                    Err(Error::TropicalTie { .. }) => State::Lower(self.step_lower_bound(&w, branch)),
                    Err(e) => return Err(e),
                },
                State::Lower(lb) => State::Lower(self.step_lower_bound(&lb, branch)),
            };
            m += 1;
        }
    }

    pub fn green_plus(&self, p: &NAPoint, budget: usize) -> Result<NAGreenValue> {
        self.green_point(p, budget, Branch::Plus)
    }

    pub fn green_minus(&self, p: &NAPoint, budget: usize) -> Result<NAGreenValue> {
        self.green_point(p, budget, Branch::Minus)
    }

    /// `max(G⁺, G⁻)`; exact only when both branches are.
    pub fn green_max(&self, p: &NAPoint, budget: usize) -> Result<NAGreenValue> {
        Ok(combine_max(self.green_plus(p, budget)?, self.green_minus(p, budget)?))
    }

    pub fn green_max_val(&self, w: &ValPoint, budget: usize) -> Result<NAGreenValue> {
        Ok(combine_max(
            self.green_val(w, budget, Branch::Plus)?,
            self.green_val(w, budget, Branch::Minus)?,
        ))
    }

    /// A classical point with orders `(u, v)`: `c·t^u(1 + c'·t)` per coordinate
    /// with random Gaussian-integer `c, c'`.
    pub fn representative<R: Rng>(&self, w: &ValPoint, rng: &mut R) -> Result<NAPoint> {
        let coord = |o: &ExtRational, rng: &mut R| -> Result<ExactLaurent> {
            match o {
                ExtRational::Infinity => Ok(LaurentPoly::zero()),
                ExtRational::Finite(q) if q.is_integer() => {
                    let e: i64 = q.to_integer().try_into().map_err(|_| {
                        Error::Unsupported(format!("order {q} out of range"))
                    })?;
                    let gauss = |rng: &mut R| loop {
                        let z = Complex::new(rng.random_range(-4i64..=4), rng.random_range(-4i64..=4));
                        if z != Complex::new(0, 0) {
                            break Complex::new(
                                BigRational::from_integer(z.re.into()),
                                BigRational::from_integer(z.im.into()),
                            );
                        }
                    };
                    let c0 = gauss(rng);
                    let c1 = gauss(rng);
                    Ok(LaurentPoly::from_terms([(e, c0), (e + 1, c1)]))
                }
                ExtRational::Finite(q) => Err(Error::Unsupported(format!(
                    "no classical point over ℂ((t)) has order {q}"
                ))),
            }
        };
        Ok(NAPoint::exact(&coord(&w.u, rng)?, &coord(&w.v, rng)?, self.r))
    }

    /// Image orders under `H^{±1}`: tropical when a term dominates, otherwise
    /// exact on a random classical representative. The second component says
    /// whether the exact path was taken.
    fn image_orders<R: Rng>(&self, w: &ValPoint, branch: Branch, rng: &mut R) -> Result<(ValPoint, bool)> {
        match self.tropical_step_branch(w, branch) {
            Ok(img) => Ok((img, false)),
            Err(Error::TropicalTie { .. }) => {
                let p = self.representative(w, rng)?;
                let img = with_doubling_from(ORDER_WORK, |work| self.step_work(&p, branch, work))?;
                Ok((na_val(&img)?, true))
            }
            Err(e) => Err(e),
        }
    }

    /// Checks `H(V⁺) ⊂ V⁺`, `H(V⁺ ∪ W) ⊂ V⁺ ∪ W` and `H⁻¹(V⁻) ⊂ V⁻` on each
    /// sample.
    pub fn filtration_check<R: Rng>(&self, samples: &[ValPoint], rng: &mut R) -> Result<FiltrationReport> {
        let mut rep = FiltrationReport::default();
        for w in samples {
            rep.checked += 1;
            let region = self.classify(w);
            if region == Region::VPlus || region == Region::W {
                let (img, exact) = self.image_orders(w, Branch::Plus, rng)?;
                rep.exact_fallbacks += exact as usize;
                let to = self.classify(&img);
                let ok = match region {
                    Region::VPlus => to == Region::VPlus,
                    _ => to != Region::VMinus,
                };
                if region == Region::VPlus {
                    rep.v_plus_checked += 1;
                } else {
                    rep.w_checked += 1;
                }
                if !ok {
                    rep.violations.push(FiltrationViolation { point: w.clone(), image: img, claim: region });
                }
            }
            if region == Region::VMinus {
                let (img, exact) = self.image_orders(w, Branch::Minus, rng)?;
                rep.exact_fallbacks += exact as usize;
                rep.v_minus_checked += 1;
                if self.classify(&img) != Region::VMinus {
                    rep.violations.push(FiltrationViolation { point: w.clone(), image: img, claim: region });
                }
            }
        }
        Ok(rep)
    }
}

fn combine_max(p: NAGreenValue, m: NAGreenValue) -> NAGreenValue {
    let status = if p.status == NAGreenStatus::Exact && m.status == NAGreenStatus::Exact {
        NAGreenStatus::Exact
    } else {
        NAGreenStatus::BoundedToBudget
    };
    let (q, escape_time) = if p.q >= m.q { (p.q, p.escape_time) } else { (m.q, m.escape_time) };
    NAGreenValue { q, status, escape_time }
}

/// Retries `f` with working precision 64, 128, …, 1024 while it reports
/// `InsufficientPrecision`.
fn with_doubling<T>(f: impl FnMut(usize) -> Result<T>) -> Result<T> {
    with_doubling_from(DEFAULT_WORK, f)
}

fn with_doubling_from<T>(start: usize, mut f: impl FnMut(usize) -> Result<T>) -> Result<T> {
    let mut work = start;
    loop {
        match f(work) {
            Err(Error::InsufficientPrecision(_)) if work < MAX_WORK => work *= 2,
            other => return other,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiltrationViolation {
    pub point: ValPoint,
    pub image: ValPoint,
    /// Region whose inclusion failed.
    pub claim: Region,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FiltrationReport {
    pub checked: usize,
    pub v_plus_checked: usize,
    pub w_checked: usize,
    pub v_minus_checked: usize,
    /// Samples with a tropical tie, resolved by exact arithmetic.
    pub exact_fallbacks: usize,
    pub violations: Vec<FiltrationViolation>,
}

impl FiltrationReport {
    pub fn to_json(&self) -> Value {
        json!({
            "checked": self.checked,
            "v_plus_checked": self.v_plus_checked,
            "w_checked": self.w_checked,
            "v_minus_checked": self.v_minus_checked,
            "exact_fallbacks": self.exact_fallbacks,
            "violations": self.violations.iter().map(|v| json!({
                "point": v.point.to_json(),
                "image": v.image.to_json(),
                "claim": format!("{:?}", v.claim),
            })).collect::<Vec<_>>(),
        })
    }
}

/// Orders at which the dominant terms of the tropical map balance:
/// `ρ = min(0, min_i ord(a_i)/i, ord(a)/(d−1))`. The bounded dynamics of the
/// tropical map sits at `(ρ, ρ)`.
pub fn tropical_center(family: &HenonFamily) -> BigRational {
    let (orders, a_order) = family.orders();
    let mut rho = BigRational::zero();
    for (i, o) in orders.iter().enumerate() {
        if let Order::Finite(k) = o {
            rho = rho.min(BigRational::new(BigInt::from(*k), BigInt::from(i as i64 + 1)));
        }
    }
    if let Order::Finite(k) = a_order {
        rho = rho.min(BigRational::new(BigInt::from(k), BigInt::from(family.degree() as i64 - 1)));
    }
    rho
}

/// Free-function form of [`NAHenon::classify`] with a real radius.
pub fn na_classify(h: &NAHenon, w: &ValPoint, radius: f64) -> Result<Region> {
    Ok(h.clone().with_radius(radius)?.classify(w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{qint, rat};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_family() -> HenonFamily {
        // p(x) = x², a = 1
        HenonFamily::new(
            vec![LaurentPoly::zero(), LaurentPoly::zero()],
            LaurentPoly::one(),
            5.0,
        )
        .unwrap()
    }

    fn all_order_zero() -> HenonFamily {
        HenonFamily::new(
            vec![LaurentPoly::constant(qint(1, 0)), LaurentPoly::constant(qint(-2, 1))],
            LaurentPoly::constant(qint(3, 0)),
            5.0,
        )
        .unwrap()
    }

    fn half() -> HybridNormParams {
        HybridNormParams::new(0.5).unwrap()
    }

    fn q(n: i64, d: i64) -> BigRational {
        rat(n, d)
    }

    #[test]
    fn norm_examples() {
        let t_inv = LaurentPoly::monomial(-1, qint(1, 0));
        let p = NAPoint::exact(&t_inv, &LaurentPoly::zero(), half());
        assert_eq!(na_norm(&p).unwrap(), 2.0);
        let x = LaurentPoly::from_terms([(0, qint(1, 0)), (1, qint(1, 0))]);
        let y = LaurentPoly::monomial(2, qint(1, 0));
        assert_eq!(na_norm(&NAPoint::exact(&x, &y, half())).unwrap(), 1.0);
        let unknown = TruncatedSeries::truncated(&LaurentPoly::zero(), 3);
        assert!(matches!(
            NAPoint::new(unknown, TruncatedSeries::exact(&y), half()),
            Err(Error::InsufficientPrecision(_))
        ));
    }

    #[test]
    fn apply_examples() {
        let h = NAHenon::new(&unit_family(), half());
        let t_inv = LaurentPoly::monomial(-1, qint(1, 0));
        let p = NAPoint::exact(&t_inv, &LaurentPoly::zero(), half());
        let img = h.apply(&p).unwrap();
        assert_eq!(na_val(&img).unwrap(), ValPoint::ints(-2, -1));
        assert_eq!(na_norm(&img).unwrap(), 4.0);
        let back = h.apply_inverse(&img).unwrap();
        assert_eq!(back.x.known_part(), p.x.known_part());
        assert_eq!(back.y.known_part(), p.y.known_part());

        let integral = NAHenon::new(&all_order_zero(), half());
        let x = LaurentPoly::monomial(1, qint(1, 0));
        let y = LaurentPoly::monomial(2, qint(1, 0));
        let img = integral.apply(&NAPoint::exact(&x, &y, half())).unwrap();
        let w = na_val(&img).unwrap();
        assert!(w.u >= ExtRational::int(0) && w.v >= ExtRational::int(0));
    }

    #[test]
    fn inverse_with_non_monomial_a() {
        let fam = HenonFamily::new(
            vec![LaurentPoly::zero(), LaurentPoly::constant(qint(-1, 0))],
            LaurentPoly::from_terms([(0, qint(1, 0)), (1, qint(1, 0))]),
            5.0,
        )
        .unwrap();
        let h = NAHenon::new(&fam, half());
        let p = NAPoint::exact(
            &LaurentPoly::monomial(-1, qint(2, 1)),
            &LaurentPoly::monomial(-3, qint(1, 0)),
            half(),
        );
        let img = h.apply_inverse(&p).unwrap();
        assert!(matches!(img.y.prec(), Prec::Below(_)));
        let back = h.apply(&img).unwrap();
        // y ↦ x is exact; x is recovered up to the tracked precision
        let Prec::Below(n) = back.x.prec() else { panic!() };
        let diff = back.x.known_part() - p.x.known_part();
        assert!(diff.terms().all(|(e, _)| e >= n));
    }

    #[test]
    fn tropical_examples() {
        let h = NAHenon::new(&all_order_zero(), half());
        assert_eq!(h.tropical_step(&ValPoint::ints(-1, 0)).unwrap(), ValPoint::ints(-2, -1));
        match h.tropical_step(&ValPoint::ints(0, 0)) {
            Err(Error::TropicalTie { terms, value }) => {
                assert_eq!(terms, vec![0, 1, 2, 3]);
                assert_eq!(value, ExtRational::int(0));
            }
            other => panic!("{other:?}"),
        }
        let fam = HenonFamily::new(
            vec![LaurentPoly::constant(qint(1, 0)), LaurentPoly::constant(qint(1, 0))],
            LaurentPoly::monomial(1, qint(1, 0)),
            5.0,
        )
        .unwrap();
        let h = NAHenon::new(&fam, half());
        assert_eq!(
            h.tropical_step_inverse(&ValPoint::ints(0, -3)).unwrap(),
            ValPoint::ints(-3, -7)
        );
    }

    #[test]
    fn classify_and_radius() {
        let h = NAHenon::new(&all_order_zero(), half());
        assert_eq!(h.radius_order(), &q(-1, 1));
        assert_eq!(h.radius(), 2.0);
        assert_eq!(h.classify(&ValPoint::ints(-2, -1)), Region::VPlus);
        assert_eq!(h.classify(&ValPoint::ints(0, -2)), Region::VMinus);
        assert_eq!(h.classify(&ValPoint::ints(0, 0)), Region::W);
        assert_eq!(h.classify(&ValPoint::ints(-1, -1)), Region::VPlus);
        assert!(matches!(h.clone().with_radius(1.0), Err(Error::InvalidRadius(_))));
        assert_eq!(na_classify(&h, &ValPoint::ints(-3, 0), 4.0).unwrap(), Region::VPlus);
    }

    #[test]
    fn green_examples() {
        let h = NAHenon::new(&unit_family(), half());
        let p = NAPoint::exact(&LaurentPoly::monomial(-1, qint(1, 0)), &LaurentPoly::zero(), half());
        let g = h.green_plus(&p, 10).unwrap();
        assert_eq!(g.status, NAGreenStatus::Exact);
        assert_eq!(g.escape_time, Some(0));
        assert_eq!(g.q, q(1, 1));
        assert!((g.value(0.5) - 2f64.ln()).abs() < 1e-15);

        let h = NAHenon::new(&all_order_zero(), half());
        let p = NAPoint::exact(
            &LaurentPoly::from_terms([(0, qint(1, 1)), (2, qint(3, 0))]),
            &LaurentPoly::monomial(1, qint(2, 0)),
            half(),
        );
        let g = h.green_plus(&p, 20).unwrap();
        assert_eq!(g.status, NAGreenStatus::BoundedToBudget);
        assert!(g.q.is_zero());
    }

    #[test]
    fn green_functional_equation() {
        let fam = HenonFamily::new(
            vec![LaurentPoly::monomial(-1, qint(1, 0)), LaurentPoly::constant(qint(2, 0))],
            LaurentPoly::monomial(-1, qint(1, 0)),
            5.0,
        )
        .unwrap();
        let h = NAHenon::new(&fam, half());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for u in -6..2 {
            for v in -6..2 {
                let p = h.representative(&ValPoint::ints(u, v), &mut rng).unwrap();
                let g0 = h.green_plus(&p, 12).unwrap();
                let g1 = h.green_plus(&h.apply(&p).unwrap(), 12).unwrap();
                if g0.status == NAGreenStatus::Exact {
                    assert_eq!(g1.q, g0.q.clone() * BigInt::from(2));
                }
                let m0 = h.green_minus(&p, 12).unwrap();
                let m1 = h.green_minus(&h.apply_inverse(&p).unwrap(), 12).unwrap();
                if m0.status == NAGreenStatus::Exact {
                    assert_eq!(m1.q, m0.q.clone() * BigInt::from(2));
                }
            }
        }
    }

    #[test]
    fn val_green_matches_point_green() {
        let fam = HenonFamily::new(
            vec![LaurentPoly::zero(), LaurentPoly::monomial(-2, qint(1, 0))],
            LaurentPoly::monomial(1, qint(1, 0)),
            5.0,
        )
        .unwrap();
        let h = NAHenon::new(&fam, half());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut compared = 0;
        for u in -8..3 {
            for v in -8..3 {
                let w = ValPoint::ints(u, v);
                let p = h.representative(&w, &mut rng).unwrap();
                for branch in [Branch::Plus, Branch::Minus] {
                    if let Ok(gv) = h.green_val(&w, 12, branch) {
                        let gp = h.green_point(&p, 12, branch).unwrap();
                        assert_eq!(gv, gp, "{w} {branch:?}");
                        compared += 1;
                    }
                }
            }
        }
        assert!(compared > 50);
    }

    #[test]
    fn filtration_holds_on_grid() {
        let h = NAHenon::new(&all_order_zero(), half());
        let samples: Vec<ValPoint> = (-6..4)
            .flat_map(|u| (-6..4).map(move |v| ValPoint::ints(u, v)))
            .chain([ValPoint::new(ExtRational::Infinity, ExtRational::int(-3))])
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rep = h.filtration_check(&samples, &mut rng).unwrap();
        assert!(rep.violations.is_empty(), "{:?}", rep.violations);
        assert!(rep.exact_fallbacks > 0);
        assert!(rep.v_plus_checked > 0 && rep.w_checked > 0 && rep.v_minus_checked > 0);
    }

    #[test]
    fn ultrametric_exactness_without_ties() {
        let h = NAHenon::new(&all_order_zero(), half());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for u in -5..5 {
            for v in -5..5 {
                let w = ValPoint::ints(u, v);
                if let Ok(img) = h.tropical_step(&w) {
                    let p = h.representative(&w, &mut rng).unwrap();
                    assert_eq!(na_val(&h.apply(&p).unwrap()).unwrap(), img);
                }
            }
        }
    }

    #[test]
    fn tropical_step_from_zero_coordinate() {
        // x = 0 leaves the constant term c₀ = −t⁻¹ as the only finite candidate
        let fam = HenonFamily::new(
            vec![LaurentPoly::zero(), LaurentPoly::monomial(-1, qint(-1, 0))],
            LaurentPoly::monomial(2, qint(1, 0)),
            5.0,
        )
        .unwrap();
        let h = NAHenon::new(&fam, half());
        let w = ValPoint::new(ExtRational::Infinity, ExtRational::int(6));
        assert_eq!(h.tropical_step(&w).unwrap(), ValPoint::new(ExtRational::int(-1), ExtRational::Infinity));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = h.representative(&w, &mut rng).unwrap();
        assert_eq!(na_val(&h.apply(&p).unwrap()).unwrap(), ValPoint::new(ExtRational::int(-1), ExtRational::Infinity));
    }

    #[test]
    fn tropical_center_values() {
        let fam = HenonFamily::new(
            vec![LaurentPoly::zero(), LaurentPoly::monomial(-3, qint(1, 0))],
            LaurentPoly::monomial(-1, qint(1, 0)),
            5.0,
        )
        .unwrap();
        assert_eq!(tropical_center(&fam), q(-3, 2));
        assert_eq!(tropical_center(&all_order_zero()), q(0, 1));
    }

    #[test]
    fn json_round_trip() {
        let w = ValPoint::new(ExtRational::Finite(q(-3, 2)), ExtRational::Infinity);
        assert_eq!(w.to_json(), json!({"u": [-3, 2], "v": "inf"}));
        assert_eq!(ValPoint::from_json(&w.to_json()).unwrap(), w);
    }
}
