//! Grid approximation of the equilibrium measure
//! `μ_t = (dd^c max{G⁺, G⁻})²`, observable pairings and Lyapunov exponents.
//!
//! The potential is sampled at the nodes of a uniform grid in
//! `(Re x, Im x, Re y, Im y)`, mollified by a separable Gaussian, and
//! differentiated by centered second differences. With
//! `u_{1 1̄} = (u_{x₁x₁} + u_{y₁y₁})/4` and
//! `u_{1 2̄} = ¼[(u_{x₁x₂} + u_{y₁y₂}) + i(u_{x₁y₂} − u_{y₁x₂})]`, a cell of
//! side `h` gets weight `(8/π²)·det(u_{i j̄})·h⁴`. The constant makes the
//! Fubini–Study potential `½log(1 + |z|²)` a probability measure.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::complex::{Branch, ComplexHenon, GreenBudget, C2};
use crate::error::{Error, Result};

/// Weight constant of a cell: `(8/π²)·det·h⁴`.
pub const MA_CONSTANT: f64 = 8.0 / (PI * PI);

/// Default grid points per real axis.
pub const DEFAULT_RESOLUTION: usize = 16;

/// Default mollifier width in cells.
pub const DEFAULT_EPS_CELLS: f64 = 1.5;

/// Truncation radius of the mollifier in standard deviations.
const KERNEL_SIGMAS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Lower corner in `(Re x, Im x, Re y, Im y)`.
    pub lo: [f64; 4],
    pub hi: [f64; 4],
    pub n_per_axis: usize,
    pub smoothing_eps: f64,
}

impl GridSpec {
    pub fn new(lo: [f64; 4], hi: [f64; 4], n_per_axis: usize, smoothing_eps: f64) -> Result<Self> {
        let spec = Self { lo, hi, n_per_axis, smoothing_eps };
        spec.validate()?;
        Ok(spec)
    }

    /// `[−b, b]⁴`.
    pub fn cube(b: f64, n_per_axis: usize, smoothing_eps: f64) -> Result<Self> {
        Self::new([-b; 4], [b; 4], n_per_axis, smoothing_eps)
    }

    /// Cube of half-width `w = b + 3ε` around a support of radius `b`, with
    /// `ε = eps_cells·h` and `h = 2w/n`.
    pub fn around(b: f64, n_per_axis: usize, eps_cells: f64) -> Result<Self> {
        let shrink = 1.0 - 6.0 * eps_cells / n_per_axis as f64;
        if !(shrink > 0.1) {
            return Err(Error::InvalidGrid(format!("{n_per_axis} cells cannot hold a {eps_cells}-cell mollifier")));
        }
        let w = b / shrink;
        Self::cube(w, n_per_axis, eps_cells * 2.0 * w / n_per_axis as f64)
    }

    /// Grid in coordinates scaled by `lambda` (see [`build_green_grid_scaled`])
    /// around the bidisk of the sharp escape radius of `h`.
    pub fn for_henon(h: &ComplexHenon, n_per_axis: usize, lambda: f64, eps_cells: f64) -> Result<Self> {
        Self::around(h.escape_radius() / lambda, n_per_axis, eps_cells)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_per_axis < 8 {
            return Err(Error::InvalidGrid(format!("n_per_axis = {} < 8", self.n_per_axis)));
        }
        if !(self.smoothing_eps > 0.0) || !self.smoothing_eps.is_finite() {
            return Err(Error::InvalidGrid(format!("smoothing_eps = {}", self.smoothing_eps)));
        }
        for a in 0..4 {
            if !(self.hi[a] > self.lo[a]) || !(self.hi[a] - self.lo[a]).is_finite() {
                return Err(Error::InvalidGrid(format!("axis {a}: empty interval")));
            }
        }
        let h = self.cell_sizes();
        if (h[0] - h[1]).abs() > 1e-12 * h[0] || (h[0] - h[2]).abs() > 1e-12 * h[0] || (h[0] - h[3]).abs() > 1e-12 * h[0] {
            return Err(Error::InvalidGrid("cells must be cubes".into()));
        }
        Ok(())
    }

    pub fn cell_sizes(&self) -> [f64; 4] {
        std::array::from_fn(|a| (self.hi[a] - self.lo[a]) / self.n_per_axis as f64)
    }

    pub fn h(&self) -> f64 {
        self.cell_sizes()[0]
    }

    /// Kernel half-width in cells.
    fn kernel_radius(&self) -> usize {
        (KERNEL_SIGMAS * self.smoothing_eps / self.h()).ceil() as usize
    }

    /// Extra nodes on each side: kernel support plus one for differences.
    pub fn margin(&self) -> usize {
        self.kernel_radius() + 1
    }

    pub fn cell_count(&self) -> usize {
        self.n_per_axis.pow(4)
    }

    /// Center of core cell `idx` (row-major, last axis fastest).
    pub fn center(&self, idx: usize) -> [f64; 4] {
        let n = self.n_per_axis;
        let h = self.h();
        let k = [idx / (n * n * n), (idx / (n * n)) % n, (idx / n) % n, idx % n];
        std::array::from_fn(|a| self.lo[a] + (k[a] as f64 + 0.5) * h)
    }

    pub fn center_point(&self, idx: usize) -> C2 {
        let c = self.center(idx);
        C2::new(Complex64::new(c[0], c[1]), Complex64::new(c[2], c[3]))
    }
}

/// Potential sampled on the margin-extended grid of a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct GreenGrid {
    pub spec: GridSpec,
    /// Nodes per axis including the margins.
    pub extent: usize,
    pub values: Vec<f64>,
    /// Largest certified error among the nodal values (0 for exact fields).
    pub max_err: f64,
    /// Grid node `z` stands for the point `coord_scale·z`.
    pub coord_scale: f64,
}

impl GreenGrid {
    fn node_point(spec: &GridSpec, extent: usize, idx: usize) -> [f64; 4] {
        let m = spec.margin() as f64;
        let h = spec.h();
        let k = [idx / (extent * extent * extent), (idx / (extent * extent)) % extent, (idx / extent) % extent, idx % extent];
        std::array::from_fn(|a| spec.lo[a] + (k[a] as f64 - m + 0.5) * h)
    }

    /// Samples an arbitrary potential.
    pub fn from_fn<F>(spec: GridSpec, f: F) -> Result<Self>
    where
        F: Fn(C2) -> f64 + Sync,
    {
        spec.validate()?;
        let extent = spec.n_per_axis + 2 * spec.margin();
        let values: Vec<f64> = (0..extent.pow(4))
            .into_par_iter()
            .map(|i| {
                let p = Self::node_point(&spec, extent, i);
                f(C2::new(Complex64::new(p[0], p[1]), Complex64::new(p[2], p[3])))
            })
            .collect();
        Ok(Self { spec, extent, values, max_err: 0.0, coord_scale: 1.0 })
    }
}

/// Iteration budget making the bounded-orbit bound of `h` at most `target`.
pub fn budget_for(h: &ComplexHenon, target: f64) -> GreenBudget {
    let d = h.degree() as f64;
    let k = h.log_inv_one_minus_delta() + h.a().norm().ln().abs();
    let top = h.radius().ln().max(1.0) + k;
    let n = ((top / target).ln() / d.ln()).ceil().max(0.0) as usize + 2;
    GreenBudget::new(target, n)
}

/// Certified `G = max(G⁺, G⁻)` at every node, each within `ε/10`.
pub fn build_green_grid(h: &ComplexHenon, spec: GridSpec) -> Result<GreenGrid> {
    build_green_grid_scaled(h, spec, 1.0)
}

/// Grid of `z ↦ G(λz)`. Its Monge–Ampère measure is the pullback of `μ` under
/// `z ↦ λz`, so the measure of a family whose bounded set sits at scale `λ`
/// is resolved on a grid of unit size.
pub fn build_green_grid_scaled(h: &ComplexHenon, spec: GridSpec, lambda: f64) -> Result<GreenGrid> {
    spec.validate()?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidGrid(format!("coordinate scale {lambda}")));
    }
    let budget = budget_for(h, spec.smoothing_eps / 10.0);
    let extent = spec.n_per_axis + 2 * spec.margin();
    let pairs: Vec<(f64, f64)> = (0..extent.pow(4))
        .into_par_iter()
        .map(|i| {
            let p = GreenGrid::node_point(&spec, extent, i);
            let z = C2::new(Complex64::new(lambda * p[0], lambda * p[1]), Complex64::new(lambda * p[2], lambda * p[3]));
            let g = h.green_certified_max(z, budget);
            (g.value(), g.err_bound())
        })
        .collect();
    let mut values = Vec::with_capacity(pairs.len());
    let mut max_err = 0.0f64;
    for (v, e) in pairs {
        values.push(v);
        max_err = max_err.max(e);
    }
    Ok(GreenGrid { spec, extent, values, max_err, coord_scale: lambda })
}

/// Discrete measure: weights at the core cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    pub spec: GridSpec,
    pub weights: Vec<f64>,
    pub total_mass: f64,
    /// Total absolute weight discarded where the discrete Hessian was not
    /// positive semidefinite.
    pub clipped_mass: f64,
    pub coord_scale: f64,
}

fn gaussian_kernel(spec: &GridSpec) -> Vec<f64> {
    let k = spec.kernel_radius() as i64;
    let h = spec.h();
    let s = spec.smoothing_eps;
    let raw: Vec<f64> = (-k..=k).map(|j| (-(j as f64 * h).powi(2) / (2.0 * s * s)).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Convolves along `axis` wherever the full stencil fits.
fn convolve_axis(values: &[f64], extent: usize, axis: usize, kernel: &[f64]) -> Vec<f64> {
    let stride = extent.pow(3 - axis as u32);
    let k = kernel.len() / 2;
    (0..values.len())
        .into_par_iter()
        .map(|i| {
            let pos = (i / stride) % extent;
            if pos < k || pos + k >= extent {
                return values[i];
            }
            let base = i - k * stride;
            kernel.iter().enumerate().map(|(j, w)| w * values[base + j * stride]).sum()
        })
        .collect()
}

/// Mollified discrete complex Monge–Ampère measure of a sampled potential.
pub fn ma_measure(field: &GreenGrid) -> Result<GridMeasure> {
    if let Some(i) = field.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteField(i));
    }
    let spec = field.spec;
    let e = field.extent;
    let kernel = gaussian_kernel(&spec);
    let mut v = field.values.clone();
    for axis in 0..4 {
        v = convolve_axis(&v, e, axis, &kernel);
    }
    let n = spec.n_per_axis;
    let m = spec.margin();
    let h = spec.h();
    let strides = [e * e * e, e * e, e, 1];
    let inv_h2 = 1.0 / (h * h);
    let results: Vec<(f64, f64)> = (0..spec.cell_count())
        .into_par_iter()
        .map(|c| {
            let k = [c / (n * n * n), (c / (n * n)) % n, (c / n) % n, c % n];
            let i: usize = (0..4).map(|a| (k[a] + m) * strides[a]).sum();
            let at = |d: [i64; 4]| -> f64 {
                let off: i64 = (0..4).map(|a| d[a] * strides[a] as i64).sum();
                v[(i as i64 + off) as usize]
            };
            let unit = |a: usize, s: i64| -> [i64; 4] {
                let mut d = [0; 4];
                d[a] = s;
                d
            };
            let add = |p: [i64; 4], q: [i64; 4]| -> [i64; 4] { std::array::from_fn(|a| p[a] + q[a]) };
            let u0 = at([0; 4]);
            let second = |a: usize| (at(unit(a, 1)) - 2.0 * u0 + at(unit(a, -1))) * inv_h2;
            let mixed = |a: usize, b: usize| {
                (at(add(unit(a, 1), unit(b, 1))) - at(add(unit(a, 1), unit(b, -1)))
                    - at(add(unit(a, -1), unit(b, 1)))
                    + at(add(unit(a, -1), unit(b, -1))))
                    * 0.25
                    * inv_h2
            };
            let h11 = 0.25 * (second(0) + second(1));
            let h22 = 0.25 * (second(2) + second(3));
            let re12 = 0.25 * (mixed(0, 2) + mixed(1, 3));
            let im12 = 0.25 * (mixed(0, 3) - mixed(1, 2));
            let det = h11 * h22 - (re12 * re12 + im12 * im12);
            let w = MA_CONSTANT * det * h.powi(4);
            if h11 >= 0.0 && h22 >= 0.0 && det >= 0.0 {
                (w, 0.0)
            } else {
                (0.0, w.abs())
            }
        })
        .collect();
    let mut weights = Vec::with_capacity(results.len());
    let (mut total, mut clipped) = (0.0, 0.0);
    for (w, c) in results {
        weights.push(w);
        total += w;
        clipped += c;
    }
    Ok(GridMeasure { spec, weights, total_mass: total, clipped_mass: clipped, coord_scale: field.coord_scale })
}

impl GridMeasure {
    /// Point represented by cell `idx`.
    pub fn point(&self, idx: usize) -> C2 {
        let c = self.spec.center_point(idx);
        C2::new(c.x * self.coord_scale, c.y * self.coord_scale)
    }

    /// `(point, weight)` for every cell.
    pub fn cells(&self) -> impl Iterator<Item = (C2, f64)> + '_ {
        self.weights.iter().enumerate().map(|(i, w)| (self.point(i), *w))
    }

    /// Normalized pairing `Σ f(center)·w / total_mass`.
    pub fn integrate<F: Fn(C2) -> f64 + Sync>(&self, f: F) -> f64 {
        let vals: Vec<f64> = (0..self.weights.len())
            .into_par_iter()
            .map(|i| {
                let w = self.weights[i];
                if w == 0.0 {
                    0.0
                } else {
                    f(self.point(i)) * w
                }
            })
            .collect();
        vals.iter().sum::<f64>() / self.total_mass
    }

    pub fn summary_json(&self) -> Value {
        json!({
            "total_mass": self.total_mass,
            "clipped_mass": self.clipped_mass,
            "resolution": self.spec.n_per_axis,
            "eps": self.spec.smoothing_eps,
            "coord_scale": self.coord_scale,
        })
    }

    /// `re_x,im_x,re_y,im_y,weight` rows for cells with positive weight.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "re_x,im_x,re_y,im_y,weight")?;
        for (i, wt) in self.weights.iter().enumerate() {
            if *wt > 0.0 {
                let c = self.spec.center(i).map(|v| v * self.coord_scale);
                writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", c[0], c[1], c[2], c[3], wt)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovResult {
    pub lambda1: f64,
    pub lambda2: f64,
    pub n_steps: usize,
    /// `|λ₁ + λ₂ − log|a||`.
    pub sum_residual: f64,
}

type M2 = [[Complex64; 2]; 2];

fn mat_vec(m: &M2, v: [Complex64; 2]) -> [Complex64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

/// Orthonormal-frame accumulation along a sequence of Jacobians.
struct QrAccumulator {
    q1: [Complex64; 2],
    sum1: f64,
    sum2: f64,
    steps: usize,
}

impl QrAccumulator {
    fn new() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // generic starting direction
        Self { q1: [Complex64::new(s, 0.0), Complex64::new(0.0, s)], sum1: 0.0, sum2: 0.0, steps: 0 }
    }

    fn push(&mut self, j: &M2) {
        let q2 = [-self.q1[1].conj(), self.q1[0].conj()];
        let v1 = mat_vec(j, self.q1);
        let r11 = (v1[0].norm_sqr() + v1[1].norm_sqr()).sqrt();
        let nq1 = [v1[0] / r11, v1[1] / r11];
        let nq2 = [-nq1[1].conj(), nq1[0].conj()];
        let v2 = mat_vec(j, q2);
        // r22 = ⟨nq2, J q2⟩
        let r22 = nq2[0].conj() * v2[0] + nq2[1].conj() * v2[1];
        self.sum1 += r11.ln();
        self.sum2 += r22.norm().ln();
        self.q1 = nq1;
        self.steps += 1;
    }

    fn result(&self, log_abs_a: f64) -> LyapunovResult {
        let n = self.steps as f64;
        let (l1, l2) = (self.sum1 / n, self.sum2 / n);
        let (l1, l2) = if l1 >= l2 { (l1, l2) } else { (l2, l1) };
        LyapunovResult { lambda1: l1, lambda2: l2, n_steps: self.steps, sum_residual: (l1 + l2 - log_abs_a).abs() }
    }
}

/// Exponents along the forward orbit of `start` for `n` steps. Fails with
/// `OrbitEscaped` once the orbit leaves the bidisk of radius `bailout`.
pub fn lyapunov_qr(h: &ComplexHenon, start: C2, n: usize, bailout: f64) -> Result<LyapunovResult> {
    let mut acc = QrAccumulator::new();
    let mut z = start;
    for step in 0..n {
        if !(z.norm() <= bailout) {
            return Err(Error::OrbitEscaped { step });
        }
        acc.push(&h.jacobian(z));
        z = h.apply(z);
    }
    Ok(acc.result(h.a().norm().ln()))
}

/// Exponents along a periodic orbit given by its points, traversed for `n`
/// steps. The cycle is checked to close up to `1e−8` relative.
pub fn lyapunov_qr_cycle(h: &ComplexHenon, cycle: &[C2], n: usize) -> Result<LyapunovResult> {
    if cycle.is_empty() {
        return Err(Error::Unsupported("empty cycle".into()));
    }
    for (i, z) in cycle.iter().enumerate() {
        let next = cycle[(i + 1) % cycle.len()];
        if h.apply(*z).dist(&next) > 1e-8 * (1.0 + next.norm()) {
            return Err(Error::Unsupported(format!("cycle does not close at point {i}")));
        }
    }
    let jacs: Vec<M2> = cycle.iter().map(|z| h.jacobian(*z)).collect();
    let mut acc = QrAccumulator::new();
    for k in 0..n {
        acc.push(&jacs[k % jacs.len()]);
    }
    Ok(acc.result(h.a().norm().ln()))
}

/// The fixed point whose Jacobian has the largest spectral radius.
pub fn saddle_fixed_point(h: &ComplexHenon) -> Option<C2> {
    h.fixed_points()
        .into_iter()
        .filter(|z| z.is_finite() && h.apply(*z).dist(z) <= 1e-8 * (1.0 + z.norm()))
        .map(|z| (spectral_radius(&h.jacobian(z)), z))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, z)| z)
}

fn mat_mul(a: &M2, b: &M2) -> M2 {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][0] * b[0][j] + a[i][1] * b[1][j]))
}

/// Largest eigenvalue modulus of a 2×2 complex matrix.
pub fn spectral_radius(m: &M2) -> f64 {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let half = tr * 0.5;
    let disc = (half * half - det).sqrt();
    (half + disc).norm().max((half - disc).norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureLyapunov {
    pub estimate: f64,
    /// Mass of cells whose orbit left the bailout within the horizon.
    pub skipped_mass: f64,
}

/// `∫ (1/n)·log ρ(DHⁿ) dμ` over the grid measure, `ρ` the spectral radius.
pub fn lyapunov_measure_avg(h: &ComplexHenon, m: &GridMeasure, n_horizon: usize, bailout: f64) -> MeasureLyapunov {
    let n_horizon = n_horizon.max(1);
    let vals: Vec<(f64, f64)> = (0..m.weights.len())
        .into_par_iter()
        .map(|i| {
            let w = m.weights[i];
            if w == 0.0 {
                return (0.0, 0.0);
            }
            let mut z = m.point(i);
            let mut prod: M2 = [[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)], [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]];
            let mut log_scale = 0.0;
            for _ in 0..n_horizon {
                if !(z.norm() <= bailout) {
                    return (0.0, w);
                }
                prod = mat_mul(&h.jacobian(z), &prod);
                let s = prod.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max);
                if s > 0.0 {
                    prod = prod.map(|row| row.map(|c| c / s));
                    log_scale += s.ln();
                }
                z = h.apply(z);
            }
            let rho = spectral_radius(&prod);
            ((log_scale + rho.ln()) / n_horizon as f64 * w, 0.0)
        })
        .collect();
    let (mut num, mut skipped) = (0.0, 0.0);
    for (v, s) in vals {
        num += v;
        skipped += s;
    }
    let kept = m.total_mass - skipped;
    MeasureLyapunov { estimate: if kept > 0.0 { num / kept } else { f64::NAN }, skipped_mass: skipped }
}

/// Escape-based membership used to test support containment.
pub fn escapes_within(h: &ComplexHenon, z: C2, n: usize) -> bool {
    h.escape_time(z, n, Branch::Plus).is_some() || h.escape_time(z, n, Branch::Minus).is_some()
}
