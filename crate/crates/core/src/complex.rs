//! Complex Hénon maps at a fixed parameter `t₀ ∈ 𝔻*`: iteration, the
//! `V⁺ / V⁻ / W` filtration, Green functions and their certified truncation
//! error.
//!
//! The filtration radius is `R = c·max{1, |a|, |a|⁻¹, |a|⁻², |a_1|, …, |a_d|}`
//! and `δ = (c^d + c² − c − 1)/(c^{d+1} − c^d)`. On `V⁺` the map satisfies
//! `(1−δ)|x|^d ≤ ‖H(z)‖ ≤ (1+δ)|x|^d` (sup norm), and symmetrically for the
//! inverse on `V⁻` with an extra factor `|a|⁻¹`. These two facts drive every
//! error bound in this module.
//!
//! Orbits that grow past `1e30` are continued in scaled coordinates
//! `z = e^s·(X, Y)` with `max(|X|, |Y|) = 1`, so Green values at large `n`
//! never overflow.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::HenonFamily;
use crate::roots::poly_roots;

/// A point of `ℂ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C2 {
    pub x: Complex64,
    pub y: Complex64,
}

impl C2 {
    pub fn new(x: Complex64, y: Complex64) -> Self {
        Self { x, y }
    }

    pub fn from_re(x: f64, y: f64) -> Self {
        Self::new(Complex64::new(x, 0.0), Complex64::new(y, 0.0))
    }

    /// Sup norm `max(|x|, |y|)`.
    pub fn norm(&self) -> f64 {
        self.x.norm().max(self.y.norm())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dist(&self, other: &C2) -> f64 {
        (self.x - other.x).norm().max((self.y - other.y).norm())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    VPlus,
    VMinus,
    W,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GreenStatus {
    EscapedPlus,
    EscapedMinus,
    BoundedToBudget,
}

/// Green value with a certified absolute error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenEstimate {
    pub value: f64,
    pub n_used: usize,
    pub err_bound: f64,
    pub status: GreenStatus,
    /// Smallest `n` with `H^{±n}(z)` in `V^±`, when found within the budget.
    pub escape_time: Option<usize>,
}

impl GreenEstimate {
    pub fn lower(&self) -> f64 {
        (self.value - self.err_bound).max(0.0)
    }

    pub fn upper(&self) -> f64 {
        self.value + self.err_bound
    }
}

/// `G = max(G⁺, G⁻)` together with both branch estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenPair {
    pub plus: GreenEstimate,
    pub minus: GreenEstimate,
}

impl GreenPair {
    pub fn value(&self) -> f64 {
        self.plus.value.max(self.minus.value)
    }

    /// `|max(a, b) − max(a', b')| ≤ max(|a − a'|, |b − b'|)`.
    pub fn err_bound(&self) -> f64 {
        self.plus.err_bound.max(self.minus.err_bound)
    }
}

/// Stopping rule for [`ComplexHenon::green_certified`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenBudget {
    pub target_err: f64,
    pub max_iter: usize,
}

impl GreenBudget {
    pub fn new(target_err: f64, max_iter: usize) -> Self {
        Self { target_err, max_iter }
    }

    /// `10·⌈log_d(53 + |log₂ scale|)⌉` iterations.
    pub fn default_for(d: usize, scale: f64) -> Self {
        let arg = 53.0 + scale.max(f64::MIN_POSITIVE).log2().abs();
        let n = (arg.ln() / (d as f64).ln()).ceil() as usize;
        Self { target_err: 1e-12, max_iter: 10 * n.max(1) }
    }
}

/// `δ = (c^d + c² − c − 1)/(c^{d+1} − c^d)`.
pub fn delta(c: f64, d: usize) -> f64 {
    let cd = c.powi(d as i32);
    (cd + c * c - c - 1.0) / (cd * c - cd)
}

/// Point in scaled form `e^s·(x, y)`.
#[derive(Debug, Clone, Copy)]
struct ScaledPoint {
    s: f64,
    x: Complex64,
    y: Complex64,
}

const RESCALE_ABOVE: f64 = 1e30;

impl ScaledPoint {
    fn new(z: C2) -> Self {
        let mut p = Self { s: 0.0, x: z.x, y: z.y };
        p.normalize();
        p
    }

    fn normalize(&mut self) {
        let m = self.x.norm().max(self.y.norm());
        if m == 0.0 {
            self.s = 0.0;
        } else if self.s != 0.0 || m > RESCALE_ABOVE {
            self.s += m.ln();
            self.x /= m;
            self.y /= m;
        }
    }

    fn log_norm(&self) -> f64 {
        self.s + self.x.norm().max(self.y.norm()).ln()
    }

    fn log_abs_x(&self) -> f64 {
        self.s + self.x.norm().ln()
    }

    fn log_abs_y(&self) -> f64 {
        self.s + self.y.norm().ln()
    }

    fn is_finite(&self) -> bool {
        self.s.is_finite() && self.x.is_finite() && self.y.is_finite()
    }

    fn point(&self) -> C2 {
        let f = self.s.exp();
        C2::new(self.x * f, self.y * f)
    }
}

/// A concrete Hénon map `(x, y) ↦ (p(x) − a·y, x)`, `p` monic of degree `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexHenon {
    d: usize,
    /// `a_1 … a_d`
    coeffs: Vec<Complex64>,
    a: Complex64,
    t0: Option<Complex64>,
    c: f64,
    radius: f64,
    delta: f64,
}

impl ComplexHenon {
    pub fn new(coeffs: Vec<Complex64>, a: Complex64, c: f64) -> Result<Self> {
        let d = coeffs.len();
        if d < 2 {
            return Err(Error::InvalidFamily(format!("degree {d} < 2")));
        }
        if a.norm() == 0.0 || !a.is_finite() || coeffs.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidFamily("a must be nonzero and coefficients finite".into()));
        }
        if !(c > 1.0) {
            return Err(Error::InvalidFamily(format!("filtration constant c = {c} must exceed 1")));
        }
        let an = a.norm();
        let radius = c * coeffs
            .iter()
            .map(|z| z.norm())
            .chain([1.0, an, 1.0 / an, 1.0 / (an * an)])
            .fold(0.0, f64::max);
        Ok(Self { d, coeffs, a, t0: None, c, radius, delta: delta(c, d) })
    }

    /// The member of `family` at `t0` (`0 < |t0| < 1`).
    pub fn from_family(family: &HenonFamily, t0: Complex64) -> Result<Self> {
        if t0.norm() == 0.0 {
            return Err(Error::ZeroParameter);
        }
        if t0.norm() >= 1.0 {
            return Err(Error::ParameterTooLarge(format!("|t0| = {} ≥ 1", t0.norm())));
        }
        let coeffs = family
            .coeffs()
            .iter()
            .map(|p| p.eval(t0))
            .collect::<Result<Vec<_>>>()?;
        let a = family.a().eval(t0)?;
        if a.norm() == 0.0 {
            return Err(Error::InvalidFamily(format!("a(t) vanishes at t = {t0}")));
        }
        let mut h = Self::new(coeffs, a, family.c())?;
        h.t0 = Some(t0);
        Ok(h)
    }

    /// Same map with filtration constant clamped to at least 5.
    pub fn certified(mut self) -> Self {
        if self.c < crate::family::DEFAULT_C {
            let rescale = crate::family::DEFAULT_C / self.c;
            self.c = crate::family::DEFAULT_C;
            self.radius *= rescale;
            self.delta = delta(self.c, self.d);
        }
        self
    }

    pub fn degree(&self) -> usize {
        self.d
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn a(&self) -> Complex64 {
        self.a
    }

    pub fn t0(&self) -> Option<Complex64> {
        self.t0
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Filtration radius `R_t`.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `log (1 − δ)⁻¹`.
    pub fn log_inv_one_minus_delta(&self) -> f64 {
        -(1.0 - self.delta).ln()
    }

    pub fn p(&self, x: Complex64) -> Complex64 {
        self.coeffs.iter().fold(Complex64::new(1.0, 0.0), |acc, &c| acc * x + c)
    }

    pub fn p_prime(&self, x: Complex64) -> Complex64 {
        // d x^{d-1} + Σ (d−i) a_i x^{d−i−1}
        let mut acc = Complex64::new(self.d as f64, 0.0);
        for (i, &c) in self.coeffs.iter().enumerate().take(self.d - 1) {
            acc = acc * x + c * (self.d - 1 - i) as f64;
        }
        acc
    }

    pub fn apply(&self, z: C2) -> C2 {
        C2::new(self.p(z.x) - self.a * z.y, z.x)
    }

    pub fn apply_inverse(&self, z: C2) -> C2 {
        C2::new(z.y, (self.p(z.y) - z.x) / self.a)
    }

    pub fn apply_branch(&self, z: C2, branch: Branch) -> C2 {
        match branch {
            Branch::Plus => self.apply(z),
            Branch::Minus => self.apply_inverse(z),
        }
    }

    /// Jacobian of `H` at `z`: `[[p′(x), −a], [1, 0]]`.
    pub fn jacobian(&self, z: C2) -> [[Complex64; 2]; 2] {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        [[self.p_prime(z.x), -self.a], [one, zero]]
    }

    /// `V⁺` wins ties with `V⁻`, which wins ties with `W`.
    pub fn classify(&self, z: C2) -> Region {
        let (ax, ay) = (z.x.norm(), z.y.norm());
        if ax >= ay && ax >= self.radius {
            Region::VPlus
        } else if ay >= self.radius {
            Region::VMinus
        } else {
            Region::W
        }
    }

    fn classify_scaled(&self, p: &ScaledPoint) -> Region {
        if p.s == 0.0 {
            return self.classify(C2::new(p.x, p.y));
        }
        let (lx, ly, lr) = (p.log_abs_x(), p.log_abs_y(), self.radius.ln());
        if lx >= ly && lx >= lr {
            Region::VPlus
        } else if ly >= lr {
            Region::VMinus
        } else {
            Region::W
        }
    }

    fn step_scaled(&self, p: &ScaledPoint, branch: Branch) -> ScaledPoint {
        let d = self.d as i32;
        let (s, x, y) = (p.s, p.x, p.y);
        // p(e^s u) = e^{ds}·(u^d + Σ a_i e^{−is} u^{d−i})
        let poly = |u: Complex64| -> Complex64 {
            let mut acc = u;
            for (i, &c) in self.coeffs.iter().enumerate() {
                let w = if s == 0.0 { c } else { c * (-(i as f64 + 1.0) * s).exp() };
                acc = if i + 1 < self.d { (acc + w) * u } else { acc + w };
            }
            acc
        };
        let lower = if s == 0.0 { 1.0 } else { ((1 - d) as f64 * s).exp() };
        let mut next = match branch {
            Branch::Plus => ScaledPoint {
                s: d as f64 * s,
                x: poly(x) - self.a * (y * lower),
                y: x * lower,
            },
            Branch::Minus => ScaledPoint {
                s: d as f64 * s,
                x: y * lower,
                y: (poly(y) - x * lower) / self.a,
            },
        };
        next.normalize();
        next
    }

    pub fn escape_time(&self, z: C2, budget: usize, branch: Branch) -> Option<usize> {
        let target = match branch {
            Branch::Plus => Region::VPlus,
            Branch::Minus => Region::VMinus,
        };
        let mut p = ScaledPoint::new(z);
        for n in 0..=budget {
            if !p.is_finite() {
                return None;
            }
            if self.classify_scaled(&p) == target {
                return Some(n);
            }
            if n < budget {
                p = self.step_scaled(&p, branch);
            }
        }
        None
    }

    /// Smallest `n ≤ budget` with `Hⁿ(z) ∈ V⁺`.
    pub fn escape_time_plus(&self, z: C2, budget: usize) -> Option<usize> {
        self.escape_time(z, budget, Branch::Plus)
    }

    /// Smallest `n ≤ budget` with `H⁻ⁿ(z) ∈ V⁻`.
    pub fn escape_time_minus(&self, z: C2, budget: usize) -> Option<usize> {
        self.escape_time(z, budget, Branch::Minus)
    }

    /// `(1/dⁿ)·log⁺‖H^{±n}(z)‖` by plain point iteration.
    pub fn green_n(&self, z: C2, n: usize, branch: Branch) -> Result<f64> {
        let mut w = z;
        for step in 0..n {
            w = self.apply_branch(w, branch);
            if !w.is_finite() {
                return Err(Error::Overflow { steps: step + 1 });
            }
        }
        Ok(w.norm().ln().max(0.0) / (self.d as f64).powi(n as i32))
    }

    /// Same quantity as [`Self::green_n`], continued in scaled coordinates so
    /// it never overflows.
    pub fn green_n_log(&self, z: C2, n: usize, branch: Branch) -> f64 {
        let mut p = ScaledPoint::new(z);
        for _ in 0..n {
            p = self.step_scaled(&p, branch);
        }
        p.log_norm().max(0.0) / (self.d as f64).powi(n as i32)
    }

    /// `[G^±_0(z), …, G^±_n(z)]` along one orbit.
    pub fn green_n_profile(&self, z: C2, n: usize, branch: Branch) -> Vec<f64> {
        let d = self.d as f64;
        let mut p = ScaledPoint::new(z);
        let mut out = Vec::with_capacity(n + 1);
        for k in 0..=n {
            out.push(p.log_norm().max(0.0) / d.powi(k as i32));
            if k < n {
                p = self.step_scaled(&p, branch);
            }
        }
        out
    }

    /// One-step sandwich at `z`: for `z ∈ V⁺`,
    /// `(1−δ)|x|^d ≤ ‖H(z)‖ ≤ (1+δ)|x|^d`; for `z ∈ V⁻`,
    /// `(1−δ)|y|^d/|a| ≤ ‖H⁻¹(z)‖ ≤ (1+δ)|y|^d/|a|`. Compared in logs with a
    /// rounding slack of `1e−12`. `None` on `W`.
    pub fn sandwich_holds(&self, z: C2) -> Option<bool> {
        let d = self.d as f64;
        let (lead, image) = match self.classify(z) {
            Region::VPlus => (d * z.x.norm().ln(), self.apply(z)),
            Region::VMinus => (d * z.y.norm().ln() - self.a.norm().ln(), self.apply_inverse(z)),
            Region::W => return None,
        };
        let lhs = image.norm().ln();
        let slack = 1e-12 * (1.0 + lead.abs());
        Some(
            lhs >= (1.0 - self.delta).ln() + lead - slack && lhs <= (1.0 + self.delta).ln() + lead + slack,
        )
    }

    /// `G_n = max(G⁺_n, G⁻_n)`.
    pub fn green_n_max(&self, z: C2, n: usize) -> f64 {
        self.green_n_log(z, n, Branch::Plus).max(self.green_n_log(z, n, Branch::Minus))
    }

    /// Per-step bound on `|log(‖H^{±}(w)‖ / ‖w‖^d)|` once `w ∈ V^±`.
    fn step_log_bound(&self, branch: Branch) -> f64 {
        match branch {
            Branch::Plus => self.log_inv_one_minus_delta(),
            Branch::Minus => self.log_inv_one_minus_delta() + self.a.norm().ln().abs(),
        }
    }

    /// Constant of the bounded-orbit bound.
    fn bounded_log_bound(&self, branch: Branch) -> f64 {
        match branch {
            Branch::Plus => self.log_inv_one_minus_delta(),
            Branch::Minus => self.log_inv_one_minus_delta() + (-self.a.norm().ln()).max(0.0),
        }
    }

    /// Certified `G^±(z)`.
    ///
    /// Once the orbit enters `V^±` at step `m`, the truncation `G^±_n` for
    /// `n ≥ m` is within `K/(dⁿ(d−1))` of the limit, where `K` bounds the
    /// per-step log-ratio. Iteration continues until that tail meets
    /// `budget.target_err` or `budget.max_iter` is reached. If the orbit never
    /// enters `V^±`, the value is 0 with bound
    /// `(1/d^{n−1})·log M + K'/(d^{n−1}(d−1))`, `M = max(R, ‖z_n‖)`.
    pub fn green_certified(&self, z: C2, budget: GreenBudget, branch: Branch) -> GreenEstimate {
        let d = self.d as f64;
        let (target, status) = match branch {
            Branch::Plus => (Region::VPlus, GreenStatus::EscapedPlus),
            Branch::Minus => (Region::VMinus, GreenStatus::EscapedMinus),
        };
        let k_step = self.step_log_bound(branch);
        let mut p = ScaledPoint::new(z);
        let mut escape: Option<usize> = None;
        let mut n = 0usize;
        loop {
            if escape.is_none() && self.classify_scaled(&p) == target {
                escape = Some(n);
            }
            if escape.is_some() {
                let scale = d.powi(n as i32);
                let tail = k_step / (scale * (d - 1.0));
                let value = p.log_norm().max(0.0) / scale;
                // rounding slack for the accumulated log
                let slack = 1e-15 * (n as f64 + 4.0) * (value + 1.0);
                if tail <= budget.target_err || n >= budget.max_iter {
                    return GreenEstimate {
                        value,
                        n_used: n,
                        err_bound: tail + slack,
                        status,
                        escape_time: escape,
                    };
                }
            } else if n >= budget.max_iter {
                let m = p.log_norm().max(self.radius.ln());
                let scale = d.powi(n as i32 - 1);
                let err = m / scale + self.bounded_log_bound(branch) / (scale * (d - 1.0));
                return GreenEstimate {
                    value: 0.0,
                    n_used: n,
                    err_bound: err,
                    status: GreenStatus::BoundedToBudget,
                    escape_time: None,
                };
            }
            p = self.step_scaled(&p, branch);
            n += 1;
        }
    }

    pub fn green_certified_max(&self, z: C2, budget: GreenBudget) -> GreenPair {
        GreenPair {
            plus: self.green_certified(z, budget, Branch::Plus),
            minus: self.green_certified(z, budget, Branch::Minus),
        }
    }

    /// Per-parameter constants `(α, β)` making the truncation bound
    /// `|G_t − G_{n,t}| ≤ (α+β)/dⁿ · log|t|⁻¹` an equality at the worst `n`:
    /// `α = d(log R + log(1−δ)⁻¹/(d−1))/log|t|⁻¹`,
    /// `β = d·max(0, log|a|⁻¹)/((d−1)·log|t|⁻¹)`.
    pub fn uniformity_constants(&self) -> Result<(f64, f64)> {
        let t0 = self
            .t0
            .ok_or_else(|| Error::ParameterTooLarge("map carries no parameter t".into()))?;
        let l = -t0.norm().ln();
        if !(l > 0.0) {
            return Err(Error::ParameterTooLarge(format!("log|t|⁻¹ = {l} ≤ 0")));
        }
        let d = self.d as f64;
        let alpha = d * (self.radius.ln() + self.log_inv_one_minus_delta() / (d - 1.0)) / l;
        let beta = d * (-self.a.norm().ln()).max(0.0) / ((d - 1.0) * l);
        Ok((alpha.max(0.0), beta))
    }

    /// `ε_n·log|t|⁻¹ = (α+β)/dⁿ · log|t|⁻¹`.
    pub fn uniformity_bound(&self, n: usize) -> Result<f64> {
        let (alpha, beta) = self.uniformity_constants()?;
        let l = -self.t0.expect("checked above").norm().ln();
        Ok((alpha + beta) / (self.d as f64).powi(n as i32) * l)
    }

    /// Fixed points `(x, x)` with `p(x) − (1 + a)x = 0`.
    pub fn fixed_points(&self) -> Vec<C2> {
        let mut coeffs = vec![Complex64::new(1.0, 0.0)];
        coeffs.extend_from_slice(&self.coeffs);
        coeffs[self.d - 1] -= Complex64::new(1.0, 0.0) + self.a;
        poly_roots(&coeffs).into_iter().map(|x| C2::new(x, x)).collect()
    }

    /// Sharp escape radius: the largest positive root `B` of
    /// `B^d = Σ|a_i|B^{d−i} + (1 + |a|)·2B`. Every bounded orbit of `H` and of
    /// `H⁻¹` lies in the bidisk of radius `B`.
    pub fn escape_radius(&self) -> f64 {
        let d = self.d as i32;
        let f = |b: f64| -> f64 {
            let rhs: f64 = self
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| c.norm() * b.powi(d - 1 - i as i32))
                .sum::<f64>()
                + 2.0 * (1.0 + self.a.norm()) * b;
            b.powi(d) - rhs
        };
        let mut hi = 1.0;
        while f(hi) <= 0.0 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// Scaled-coordinate image of `z` after `n` steps, returned as a point
    /// (may overflow to infinity for large orbits).
    pub fn iterate(&self, z: C2, n: usize, branch: Branch) -> C2 {
        let mut p = ScaledPoint::new(z);
        for _ in 0..n {
            p = self.step_scaled(&p, branch);
        }
        p.point()
    }
}

impl HenonFamily {
    pub fn at(&self, t0: Complex64) -> Result<ComplexHenon> {
        ComplexHenon::from_family(self, t0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::HenonFamily;
    use crate::laurent::LaurentPoly;
    use crate::scalar::qint;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn quadratic(cst: f64, a: f64) -> ComplexHenon {
        ComplexHenon::new(vec![c(0.0, 0.0), c(cst, 0.0)], c(a, 0.0), 5.0).unwrap()
    }

    #[test]
    fn delta_values() {
        assert!((delta(5.0, 2) - 0.44).abs() < 1e-15);
        for d in 2..8 {
            let dl = delta(5.0, d);
            assert!(dl > 0.0 && dl < 1.0);
        }
    }

    #[test]
    fn apply_examples() {
        let h = ComplexHenon::new(vec![c(0.3, 0.1), c(-0.7, 0.2)], c(0.5, 0.0), 5.0).unwrap();
        assert_eq!(h.apply(C2::from_re(0.0, 0.0)), C2::new(c(-0.7, 0.2), c(0.0, 0.0)));
        assert_eq!(h.apply_inverse(C2::new(c(-0.7, 0.2), c(0.0, 0.0))), C2::from_re(0.0, 0.0));
        let h = quadratic(0.0, 1.0);
        assert_eq!(h.apply(C2::from_re(2.0, 1.0)), C2::from_re(3.0, 2.0));
        let h = quadratic(0.0, 2.0);
        assert_eq!(h.apply_inverse(C2::from_re(3.0, 2.0)), C2::from_re(2.0, 0.5));
    }

    #[test]
    fn inverse_identity_on_random_points() {
        let h = ComplexHenon::new(vec![c(0.3, -0.2), c(-1.1, 0.4)], c(0.6, 0.3), 5.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100_000 {
            let z = C2::new(
                c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
                c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
            );
            let back = h.apply_inverse(h.apply(z));
            assert!(back.dist(&z) <= 1e-12 * (1.0 + z.norm().powi(2)), "{z:?} → {back:?}");
        }
    }

    #[test]
    fn classify_examples() {
        let h = quadratic(-1.0, 0.5);
        let r = h.radius();
        assert_eq!(h.classify(C2::from_re(2.0 * r, r)), Region::VPlus);
        assert_eq!(h.classify(C2::from_re(0.0, 2.0 * r)), Region::VMinus);
        assert_eq!(h.classify(C2::from_re(0.0, 0.0)), Region::W);
        assert_eq!(h.classify(C2::from_re(r, r)), Region::VPlus);
    }

    #[test]
    fn radius_follows_definition() {
        let h = quadratic(-3.0, 0.25);
        // max{1, .25, 4, 16, 0, 3} = 16
        assert!((h.radius() - 80.0).abs() < 1e-12);
    }

    #[test]
    fn escape_time_examples() {
        let h = quadratic(-1.0, 0.5);
        let r = h.radius();
        assert_eq!(h.escape_time_plus(C2::from_re(2.0 * r, r), 10), Some(0));
        assert_eq!(h.escape_time_plus(C2::from_re(1e12, 3.0), 10), Some(0));
        for fp in h.fixed_points() {
            assert!(h.apply(fp).dist(&fp) < 1e-12);
            assert_eq!(h.escape_time_plus(fp, 200), None);
        }
    }

    #[test]
    fn green_n_at_zero_steps_is_log_plus_norm() {
        let h = quadratic(-1.0, 0.5);
        let z = C2::from_re(3.0, -7.0);
        assert!((h.green_n(z, 0, Branch::Plus).unwrap() - 7f64.ln()).abs() < 1e-15);
        assert_eq!(h.green_n(C2::from_re(0.5, 0.2), 0, Branch::Plus).unwrap(), 0.0);
    }

    #[test]
    fn green_n_overflow_is_reported_and_log_path_agrees() {
        let h = quadratic(-1.0, 0.5);
        let z = C2::from_re(1e10, 0.0);
        assert!(matches!(h.green_n(z, 10, Branch::Plus), Err(Error::Overflow { .. })));
        let plain = h.green_n(z, 3, Branch::Plus).unwrap();
        assert!((plain - h.green_n_log(z, 3, Branch::Plus)).abs() < 1e-12);
        let far = h.green_n_log(z, 40, Branch::Plus);
        assert!((far - 1e10f64.ln()).abs() < h.log_inv_one_minus_delta());
    }

    #[test]
    fn sandwich_one_step() {
        let h = quadratic(-1.0, 0.5);
        let dl = h.delta();
        let r = h.radius();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let mag = r * rng.random_range(1.0f64..50.0);
            let x = Complex64::from_polar(mag, rng.random_range(0.0..6.3));
            let y = Complex64::from_polar(mag * rng.random_range(0.0..1.0), rng.random_range(0.0..6.3));
            let z = C2::new(x, y);
            let g1 = h.green_n(z, 1, Branch::Plus).unwrap();
            let lo = ((1.0 - dl) * mag * mag).ln() / 2.0;
            let hi = ((1.0 + dl) * mag * mag).ln() / 2.0;
            assert!(g1 >= lo - 1e-12 && g1 <= hi + 1e-12);
            let g0 = h.green_n(z, 0, Branch::Plus).unwrap();
            let g2 = h.green_n(z, 2, Branch::Plus).unwrap();
            assert!((g2 - g1).abs() <= h.log_inv_one_minus_delta() / 4.0 + 1e-12);
            assert!((g1 - g0).abs() <= h.log_inv_one_minus_delta() / 2.0 + 1e-12);
        }
    }

    #[test]
    fn certified_far_point() {
        let h = quadratic(-1.0, 0.5);
        let est = h.green_certified(C2::from_re(1e10, 0.0), GreenBudget::new(1e-12, 200), Branch::Plus);
        assert_eq!(est.status, GreenStatus::EscapedPlus);
        assert_eq!(est.escape_time, Some(0));
        assert!(est.err_bound <= 1e-12 + 1e-12);
        assert!((est.value - 10.0 * 10f64.ln()).abs() <= h.log_inv_one_minus_delta());
    }

    #[test]
    fn certified_fixed_point_is_bounded_with_shrinking_error() {
        let h = quadratic(-1.0, 0.5);
        let fp = h.fixed_points()[0];
        let mut last = f64::INFINITY;
        for n in [5, 10, 20, 40] {
            let est = h.green_certified(fp, GreenBudget::new(0.0, n), Branch::Plus);
            assert_eq!(est.status, GreenStatus::BoundedToBudget);
            assert_eq!(est.value, 0.0);
            let expected = h.radius().ln() / 2f64.powi(n as i32 - 1)
                + h.log_inv_one_minus_delta() / 2f64.powi(n as i32 - 1);
            assert!((est.err_bound - expected).abs() < 1e-15 * expected.max(1.0));
            assert!(est.err_bound < last);
            last = est.err_bound;
        }
    }

    #[test]
    fn certified_agrees_with_long_truncation() {
        let h = ComplexHenon::new(vec![c(0.2, 0.1), c(-1.3, 0.2)], c(0.4, -0.2), 5.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n_large = 60;
        for _ in 0..1000 {
            let z = C2::new(
                c(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)),
                c(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)),
            );
            for branch in [Branch::Plus, Branch::Minus] {
                let est = h.green_certified(z, GreenBudget::new(1e-6, 200), branch);
                let long = h.green_n_log(z, n_large, branch);
                let tail = h.step_log_bound(branch) / (2f64.powi(n_large as i32));
                let tol = 1e-6 + tail + est.err_bound;
                assert!((est.value - long).abs() <= tol, "{z:?} {branch:?} {est:?} {long}");
            }
        }
    }

    #[test]
    fn uniformity_constants_behaviour() {
        let constant = HenonFamily::new(
            vec![LaurentPoly::zero(), LaurentPoly::constant(qint(-1, 0))],
            LaurentPoly::constant(qint(1, 0)),
            5.0,
        )
        .unwrap();
        let a_small = |t: f64| constant.at(c(t, 0.0)).unwrap().uniformity_constants().unwrap().0;
        assert!(a_small(1e-8) < a_small(1e-2));
        assert!(a_small(1e-100) < 0.1);

        let m = 3;
        let fam = HenonFamily::new(
            vec![LaurentPoly::zero(), LaurentPoly::constant(qint(-1, 0))],
            LaurentPoly::monomial(m, qint(1, 0)),
            5.0,
        )
        .unwrap();
        let (alpha, beta) = fam.at(c(1e-30, 0.0)).unwrap().uniformity_constants().unwrap();
        assert!(alpha >= 0.0);
        assert!((beta - 2.0 * m as f64).abs() < 1e-12);
        let h = quadratic(-1.0, 0.5);
        assert!(h.uniformity_constants().is_err());
    }

    #[test]
    fn default_budget_formula() {
        assert_eq!(GreenBudget::default_for(2, 1.0).max_iter, 60);
        assert_eq!(GreenBudget::default_for(3, 1.0).max_iter, 40);
    }

    #[test]
    fn fixed_points_are_fixed() {
        let h = ComplexHenon::new(vec![c(0.3, 0.0), c(-2.0, 0.5), c(0.1, 0.1)], c(0.7, 0.1), 5.0).unwrap();
        let fps = h.fixed_points();
        assert_eq!(fps.len(), 3);
        for fp in fps {
            assert!(h.apply(fp).dist(&fp) < 1e-10);
        }
    }

    #[test]
    fn escape_radius_contains_bounded_orbits() {
        let h = quadratic(-2.0, 0.3);
        let b = h.escape_radius();
        for fp in h.fixed_points() {
            assert!(fp.norm() <= b);
        }
        // a point just outside the bidisk escapes
        let z = C2::from_re(1.01 * b, 0.5 * b);
        assert!(h.green_n_log(z, 30, Branch::Plus) > 0.0);
    }
}
