//! Degeneration experiments along a ladder of parameters `t → 0`.
//!
//! Quantities are normalized by `log|t|⁻¹` or rescaled by
//! `scale_factor(t) = log r / log|t|⁻¹` so that they converge to their
//! non-archimedean counterparts at base `r`.

use std::io::Write;
use std::ops::RangeInclusive;

use num_complex::Complex64;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::complex::{Branch, ComplexHenon, C2};
use crate::error::{Error, Result};
use crate::family::{ExactLaurent, HenonFamily};
use crate::laurent::{HybridNormParams, Order};
use crate::measure::{build_green_grid_scaled, lyapunov_qr_cycle, ma_measure, saddle_fixed_point, GridSpec};
use crate::na::{tropical_center, ExtRational, NAGreenStatus, NAHenon, ValPoint};

pub const DEFAULT_R: f64 = 0.5;
/// Exponents `k` of the default ladder `|t| = r^k`.
pub const DEFAULT_LADDER: [u32; 5] = [1, 2, 4, 8, 16];
/// Environment variable holding the sampler seed.
pub const SEED_VAR: &str = "HENONLAB_SEED";

/// `HENONLAB_SEED` if set and parseable, otherwise `default`.
pub fn seed_from_env(default: u64) -> u64 {
    std::env::var(SEED_VAR).ok().and_then(|s| s.trim().parse().ok()).unwrap_or(default)
}

pub fn rng_from_env(default: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed_from_env(default))
}

/// Base radius `r` and parameter samples `0 < |t_k| ≤ r`, strictly decreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridBase {
    r: f64,
    t_samples: Vec<Complex64>,
}

impl HybridBase {
    pub fn new(r: f64, t_samples: Vec<Complex64>) -> Result<Self> {
        HybridNormParams::new(r)?;
        if t_samples.is_empty() {
            return Err(Error::ParameterTooLarge("empty t-ladder".into()));
        }
        for (i, t) in t_samples.iter().enumerate() {
            let m = t.norm();
            if !(m > 0.0) || m > r {
                return Err(Error::ParameterTooLarge(format!("|t| = {m} not in (0, {r}]")));
            }
            if i > 0 && !(m < t_samples[i - 1].norm()) {
                return Err(Error::ParameterTooLarge("|t| must decrease strictly along the ladder".into()));
            }
        }
        Ok(Self { r, t_samples })
    }

    /// `t = r^k` for each exponent.
    pub fn ladder(r: f64, exponents: &[u32]) -> Result<Self> {
        Self::new(r, exponents.iter().map(|&k| Complex64::new(r.powi(k as i32), 0.0)).collect())
    }

    pub fn default_ladder() -> Self {
        Self::ladder(DEFAULT_R, &DEFAULT_LADDER).expect("valid default ladder")
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn t_samples(&self) -> &[Complex64] {
        &self.t_samples
    }
}

/// `τ(t)(f)`: `|f(t)|^{log r/log|t|}` for `0 < |t| ≤ r`, and `r^{ord f}` at
/// `t = 0`.
pub fn tau_norm(f: &ExactLaurent, t: Complex64, r: f64) -> Result<f64> {
    let params = HybridNormParams::new(r)?;
    if t == Complex64::new(0.0, 0.0) {
        return Ok(f.t_adic_norm(params));
    }
    let m = t.norm();
    if m > r {
        return Err(Error::ParameterTooLarge(format!("|t| = {m} > r = {r}")));
    }
    let v = f.eval(t)?.norm();
    if v == 0.0 {
        return Ok(0.0);
    }
    Ok((v.ln() * r.ln() / m.ln()).exp())
}

/// `log r / log|t|⁻¹`; negative for `|t| < 1`.
pub fn scale_factor(t_abs: f64, r: f64) -> f64 {
    r.ln() / -t_abs.ln()
}

fn log_inv(t: Complex64) -> f64 {
    -t.norm().ln()
}

fn rat_f64(q: &num_rational::BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

// ---------------------------------------------------------------------------
// Green uniformity

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformityRow {
    pub t_abs: f64,
    pub n: usize,
    /// `sup_z |G_{N,t} − G_{n,t}|` over the sample.
    pub sup_gap: f64,
    /// `sup_gap / log|t|⁻¹`.
    pub ratio: f64,
    /// `(α+β)/dⁿ + (α+β)/d^N`, the bound widened by the certified tail of the
    /// reference truncation.
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformityReport {
    pub n_ref: usize,
    /// Suprema of the per-parameter constants over the ladder.
    pub alpha: f64,
    pub beta: f64,
    pub rows: Vec<UniformityRow>,
    /// `(n, max ratio / min ratio)` across the ladder.
    pub spread: Vec<(usize, f64)>,
    pub violations: usize,
}

/// Unit-scale sample shapes `(kind, u₁, θ₁, u₂, θ₂)` with `u ∈ [0, 1)`.
fn sample_shapes(n: usize, rng: &mut impl Rng) -> Vec<[f64; 5]> {
    (0..n)
        .map(|i| {
            let kind = (i % 3) as f64;
            [kind, rng.random(), rng.random::<f64>() * std::f64::consts::TAU, rng.random(), rng.random::<f64>() * std::f64::consts::TAU]
        })
        .collect()
}

/// Kind 0 fills the bidisk of radius `1.5·B` uniformly; kind 1 has
/// log-uniform moduli in `[B/10, 4R]`; kind 2 perturbs a fixed point by a
/// relative amount `10^{−12u}`, so its orbit shadows the bounded set for a
/// controlled number of steps.
fn realize(shape: &[f64; 5], b: f64, big_r: f64, fixed: &[C2]) -> C2 {
    match shape[0] as u8 {
        0 => {
            let m = |u: f64| 1.5 * b * u.sqrt();
            C2::new(Complex64::from_polar(m(shape[1]), shape[2]), Complex64::from_polar(m(shape[3]), shape[4]))
        }
        1 => {
            let (lo, hi) = ((0.1 * b).ln(), (4.0 * big_r).ln());
            let m = |u: f64| (lo + u * (hi - lo)).exp();
            C2::new(Complex64::from_polar(m(shape[1]), shape[2]), Complex64::from_polar(m(shape[3]), shape[4]))
        }
        _ => {
            let k = ((shape[1] * fixed.len() as f64) as usize).min(fixed.len() - 1);
            let z = fixed[k];
            let eps = z.norm().max(1.0) * 10f64.powf(-12.0 * shape[3]);
            C2::new(z.x + Complex64::from_polar(eps, shape[2]), z.y + Complex64::from_polar(eps, shape[4]))
        }
    }
}

/// Measured truncation gaps of `G = max(G⁺, G⁻)` against `G_N`,
/// `N = max n_range + 8`, on the fixed points and `sample_size` further
/// points per parameter.
pub fn run_green_uniformity(
    family: &HenonFamily,
    base: &HybridBase,
    n_range: RangeInclusive<usize>,
    sample_size: usize,
    rng: &mut impl Rng,
) -> Result<UniformityReport> {
    let (n_lo, n_hi) = (*n_range.start(), *n_range.end());
    if n_lo < 1 || n_lo > n_hi {
        return Err(Error::Unsupported(format!("n range {n_lo}..={n_hi}")));
    }
    let n_ref = n_hi + 8;
    let d = family.degree() as f64;
    let shapes = sample_shapes(sample_size, rng);
    let maps: Vec<ComplexHenon> = base.t_samples().iter().map(|&t| family.at(t)).collect::<Result<_>>()?;
    let mut alpha = 0.0f64;
    let mut beta = 0.0f64;
    for h in &maps {
        let (a, b) = h.uniformity_constants()?;
        alpha = alpha.max(a);
        beta = beta.max(b);
    }
    let tail = (alpha + beta) / d.powi(n_ref as i32);
    let mut rows = Vec::new();
    for (h, &t) in maps.iter().zip(base.t_samples()) {
        let (b, big_r) = (h.escape_radius(), h.radius());
        let fixed: Vec<C2> = h.fixed_points().into_iter().filter(|z| z.is_finite()).collect();
        // on a fixed point the orbit is known exactly: G_k = log⁺‖z‖/d^k
        let mut gaps: Vec<Vec<f64>> = fixed
            .iter()
            .map(|z| {
                let g = |k: usize| z.norm().ln().max(0.0) / d.powi(k as i32);
                (n_lo..=n_hi).map(|n| (g(n_ref) - g(n)).abs()).collect()
            })
            .collect();
        let points: Vec<C2> = shapes
            .iter()
            .filter(|s| s[0] != 2.0 || !fixed.is_empty())
            .map(|s| realize(s, b, big_r, &fixed))
            .collect();
        gaps.par_extend(points.par_iter().map(|&z| {
            let plus = h.green_n_profile(z, n_ref, Branch::Plus);
            let minus = h.green_n_profile(z, n_ref, Branch::Minus);
            let g = |k: usize| plus[k].max(minus[k]);
            (n_lo..=n_hi).map(|n| (g(n_ref) - g(n)).abs()).collect::<Vec<f64>>()
        }));
        let l = log_inv(t);
        for (j, n) in (n_lo..=n_hi).enumerate() {
            let sup_gap = gaps.iter().map(|g| g[j]).fold(0.0, f64::max);
            let ratio = sup_gap / l;
            let bound = (alpha + beta) / d.powi(n as i32) + tail;
            rows.push(UniformityRow { t_abs: t.norm(), n, sup_gap, ratio, bound, pass: ratio <= bound });
        }
    }
    let spread = (n_lo..=n_hi)
        .map(|n| {
            let rs: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.ratio).collect();
            let max = rs.iter().cloned().fold(0.0, f64::max);
            let min = rs.iter().cloned().fold(f64::INFINITY, f64::min);
            (n, max / min)
        })
        .collect();
    let violations = rows.iter().filter(|r| !r.pass).count();
    Ok(UniformityReport { n_ref, alpha, beta, rows, spread, violations })
}

impl UniformityReport {
    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("serializable")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t_abs,n,sup_gap,ratio,bound,pass")?;
        for r in &self.rows {
            writeln!(w, "{:.16e},{},{:.16e},{:.16e},{:.16e},{}", r.t_abs, r.n, r.sup_gap, r.ratio, r.bound, r.pass)?;
        }
        Ok(())
    }

    /// Whitespace-separated `t_abs n ratio bound`, one block per `n`.
    pub fn write_dat<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# t_abs n ratio bound")?;
        let mut ns: Vec<usize> = self.rows.iter().map(|r| r.n).collect();
        ns.dedup();
        ns.sort_unstable();
        ns.dedup();
        for n in ns {
            for r in self.rows.iter().filter(|r| r.n == n) {
                writeln!(w, "{:.16e} {} {:.16e} {:.16e}", r.t_abs, r.n, r.ratio, r.bound)?;
            }
            writeln!(w)?;
            writeln!(w)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Measure convergence

/// Features of a point at parameter `t`:
/// `ξ = s·log max(|x|, e)`, `η = s·log max(|y|, e)` with `s = scale_factor`.
pub fn features(z: C2, scale: f64) -> (f64, f64) {
    let e = std::f64::consts::E;
    (scale * z.x.norm().max(e).ln(), scale * z.y.norm().max(e).ln())
}

/// Observable that is a continuous function of the rescaled features.
#[derive(Debug, Clone, Copy)]
pub struct Observable {
    pub name: &'static str,
    pub f: fn(f64, f64) -> f64,
}

pub fn default_observables() -> Vec<Observable> {
    vec![
        Observable { name: "xi", f: |xi, _| xi },
        Observable { name: "max_xi_eta", f: |xi, eta| xi.max(eta) },
        Observable { name: "exp_sum", f: |xi, eta| (xi + eta).exp() },
    ]
}

/// Limit location predicted from order data: both features at
/// `ρ·log(1/r)` with `ρ` the tropical center.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TropicalPrediction {
    pub center: f64,
    pub feature: f64,
    /// Every sampled valuation point off the center is certified to have
    /// `G > 0` by a tie-free tropical orbit.
    pub tie_free: bool,
    pub sampled: usize,
    pub ties: usize,
    /// Samples with neither branch escaping within the budget.
    pub bounded: usize,
}

/// Samples the valuation lattice `(ρ + i/q, ρ + j/q)`, `|i|, |j| ≤ span·q`,
/// minus the center. A point is certified off the support when one branch
/// reaches `V^±` tropically without a tie (then `G > 0`). The prediction is
/// tie-free when every sample is certified this way, so the tropical support
/// near the center is the center alone.
pub fn tropical_prediction(family: &HenonFamily, r: f64, q: i64, span: i64, budget: usize) -> Result<TropicalPrediction> {
    use num_bigint::BigInt;
    use num_rational::BigRational;
    let h = NAHenon::new(family, HybridNormParams::new(r)?);
    let rho = tropical_center(family);
    let (mut sampled, mut ties, mut bounded) = (0, 0, 0);
    let at = |i: i64| rho.clone() + BigRational::new(BigInt::from(i), BigInt::from(q));
    for i in -span * q..=span * q {
        for j in -span * q..=span * q {
            if i == 0 && j == 0 {
                continue;
            }
            let w = ValPoint::new(ExtRational::Finite(at(i)), ExtRational::Finite(at(j)));
            sampled += 1;
            let mut tie = false;
            let mut escaped = false;
            for branch in [Branch::Plus, Branch::Minus] {
                match h.green_val(&w, budget, branch) {
                    Ok(g) if g.status == NAGreenStatus::Exact && g.q > num_rational::BigRational::from_integer(0.into()) => {
                        escaped = true
                    }
                    Ok(_) => {}
                    Err(Error::TropicalTie { .. }) => tie = true,
                    Err(e) => return Err(e),
                }
            }
            if !escaped {
                if tie {
                    ties += 1;
                } else {
                    bounded += 1;
                }
            }
        }
    }
    let center = rat_f64(&rho);
    Ok(TropicalPrediction {
        center,
        feature: center * (1.0 / r).ln(),
        tie_free: ties == 0 && bounded == 0,
        sampled,
        ties,
        bounded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureRow {
    pub t_abs: f64,
    pub total_mass: f64,
    pub clipped_mass: f64,
    pub pairings: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservableSummary {
    pub name: String,
    /// `|I(t_{k+1}) − I(t_k)|`.
    pub differences: Vec<f64>,
    /// The pairing moved less between the last two rungs than between the
    /// two before.
    pub stabilized: bool,
    pub prediction: f64,
    pub final_relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureReport {
    pub resolution: usize,
    /// Mollifier width in cells.
    pub eps_cells: f64,
    pub tropical: TropicalPrediction,
    pub rows: Vec<MeasureRow>,
    pub observables: Vec<ObservableSummary>,
}

/// For each `t`: build `μ_t` on a grid rescaled by `|t|^ρ`, pair every
/// observable of the rescaled features, and compare the sequence with the
/// tropical prediction.
pub fn run_measure_convergence(
    family: &HenonFamily,
    base: &HybridBase,
    observables: &[Observable],
    resolution: usize,
    eps_cells: f64,
) -> Result<MeasureReport> {
    let r = base.r();
    let tropical = tropical_prediction(family, r, 4, 2, 24)?;
    let mut rows = Vec::new();
    for &t in base.t_samples() {
        let h = family.at(t)?;
        let lambda = t.norm().powf(tropical.center);
        let spec = GridSpec::for_henon(&h, resolution, lambda, eps_cells)?;
        let grid = build_green_grid_scaled(&h, spec, lambda)?;
        let m = ma_measure(&grid)?;
        let s = scale_factor(t.norm(), r);
        let pairings = observables
            .iter()
            .map(|o| {
                let f = o.f;
                m.integrate(|z| {
                    let (xi, eta) = features(z, s);
                    f(xi, eta)
                })
            })
            .collect();
        rows.push(MeasureRow { t_abs: t.norm(), total_mass: m.total_mass, clipped_mass: m.clipped_mass, pairings });
    }
    let observables = observables
        .iter()
        .enumerate()
        .map(|(k, o)| {
            let seq: Vec<f64> = rows.iter().map(|r| r.pairings[k]).collect();
            let differences: Vec<f64> = seq.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
            let tail = &differences[differences.len().saturating_sub(2)..];
            let stabilized = tail.len() == 2 && tail[1] < tail[0];
            let f = tropical.feature;
            let prediction = (o.f)(f, f);
            let last = *seq.last().expect("nonempty ladder");
            ObservableSummary {
                name: o.name.to_string(),
                differences,
                stabilized,
                prediction,
                final_relative_error: ((last - prediction) / prediction).abs(),
            }
        })
        .collect();
    Ok(MeasureReport { resolution, eps_cells, tropical, rows, observables })
}

impl MeasureReport {
    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("serializable")
    }

    pub fn write_csv<W: Write>(&self, mut w: W, names: &[&str]) -> std::io::Result<()> {
        write!(w, "t_abs,total_mass,clipped_mass")?;
        for n in names {
            write!(w, ",{n}")?;
        }
        writeln!(w)?;
        for r in &self.rows {
            write!(w, "{:.16e},{:.16e},{:.16e}", r.t_abs, r.total_mass, r.clipped_mass)?;
            for p in &r.pairings {
                write!(w, ",{p:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn write_dat<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# t_abs pairings...")?;
        for r in &self.rows {
            write!(w, "{:.16e}", r.t_abs)?;
            for p in &r.pairings {
                write!(w, " {p:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Lyapunov degeneration

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovRow {
    pub t_abs: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub sum_residual: f64,
    /// `(λ₁ + λ₂)/log|t|⁻¹`.
    pub total_slope: f64,
    /// `λ₁/log|t|⁻¹`.
    pub first_slope: f64,
    /// `|total_slope − (−ord a)|`.
    pub slope_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovReport {
    pub n_steps: usize,
    /// `−ord₀(a)`, the limit of the total slope since `log|a(t)| ~ ord·log|t|`.
    pub predicted_total_slope: f64,
    /// Whether the measured limit has the sign of `+ord₀(a)` as well; false
    /// whenever `ord₀(a) ≠ 0`.
    pub matches_positive_ord_display: bool,
    pub rows: Vec<LyapunovRow>,
    /// Slope residuals never increase by more than `1e−9`.
    pub residuals_monotone: bool,
    pub final_slope_residual: f64,
    /// `λ₁/log|t|⁻¹` moves by less on the last rung than on the one before.
    pub first_slope_stabilizing: bool,
    pub max_sum_residual: f64,
}

/// Exponents along the saddle fixed point of each `H_t` over `n_steps`.
pub fn run_lyapunov_degeneration(family: &HenonFamily, base: &HybridBase, n_steps: usize) -> Result<LyapunovReport> {
    let ord_a = match family.a().ord() {
        Order::Finite(k) => k as f64,
        Order::Infinity => return Err(Error::DegenerateFamily("a ≡ 0".into())),
    };
    let predicted = -ord_a;
    let mut rows = Vec::new();
    for &t in base.t_samples() {
        let h = family.at(t)?;
        let fp = saddle_fixed_point(&h).ok_or_else(|| Error::Unsupported("no finite fixed point".into()))?;
        let res = lyapunov_qr_cycle(&h, &[fp], n_steps)?;
        let l = log_inv(t);
        let total_slope = (res.lambda1 + res.lambda2) / l;
        rows.push(LyapunovRow {
            t_abs: t.norm(),
            lambda1: res.lambda1,
            lambda2: res.lambda2,
            sum_residual: res.sum_residual,
            total_slope,
            first_slope: res.lambda1 / l,
            slope_residual: (total_slope - predicted).abs(),
        });
    }
    let residuals_monotone = rows.windows(2).all(|w| w[1].slope_residual <= w[0].slope_residual + 1e-9);
    let first_slope_stabilizing = match rows.len() {
        n if n >= 3 => {
            let f: Vec<f64> = rows.iter().map(|r| r.first_slope).collect();
            (f[n - 1] - f[n - 2]).abs() < (f[n - 2] - f[n - 3]).abs()
        }
        _ => false,
    };
    let limit_sign = if predicted.abs() < 0.5 { 0.0 } else { predicted.signum() };
    Ok(LyapunovReport {
        n_steps,
        predicted_total_slope: predicted,
        matches_positive_ord_display: limit_sign == ord_a.signum() || ord_a == 0.0,
        final_slope_residual: rows.last().map(|r| r.slope_residual).unwrap_or(f64::NAN),
        max_sum_residual: rows.iter().map(|r| r.sum_residual).fold(0.0, f64::max),
        rows,
        residuals_monotone,
        first_slope_stabilizing,
    })
}

impl LyapunovReport {
    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("serializable")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t_abs,lambda1,lambda2,sum_residual,total_slope,first_slope,slope_residual")?;
        for r in &self.rows {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.t_abs, r.lambda1, r.lambda2, r.sum_residual, r.total_slope, r.first_slope, r.slope_residual
            )?;
        }
        Ok(())
    }

    pub fn write_dat<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# t_abs total_slope first_slope")?;
        for r in &self.rows {
            writeln!(w, "{:.16e} {:.16e} {:.16e}", r.t_abs, r.total_slope, r.first_slope)?;
        }
        Ok(())
    }
}

/// One-step sandwich violations among `samples` points drawn in `V⁺` and
/// `V⁻` of `h` (half each), with moduli up to `R·10⁶`.
pub fn sandwich_violations(h: &ComplexHenon, samples: usize, rng: &mut impl Rng) -> (usize, usize) {
    let big_r = h.radius();
    let mut checked = 0;
    let mut violations = 0;
    for i in 0..samples {
        let lead = big_r * (rng.random::<f64>() * 6.0 * std::f64::consts::LN_10).exp();
        let other = lead * rng.random::<f64>();
        let (a, b) = (rng.random::<f64>() * std::f64::consts::TAU, rng.random::<f64>() * std::f64::consts::TAU);
        let z = if i % 2 == 0 {
            C2::new(Complex64::from_polar(lead, a), Complex64::from_polar(other, b))
        } else {
            C2::new(Complex64::from_polar(other, a), Complex64::from_polar(lead, b))
        };
        if let Some(ok) = h.sandwich_holds(z) {
            checked += 1;
            if !ok {
                violations += 1;
            }
        }
    }
    (checked, violations)
}
