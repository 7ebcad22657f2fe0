//! Hellinger, L1 and Kullback-Leibler estimates between Gaussian mixtures,
//! and the inequalities that relate them.
//!
//! All distances are between the normalized densities f / Σπ_h, so a
//! mixture carrying remainder mass is compared as a probability density.
//! The Hellinger distance is d(f,g) = {∫(√f − √g)²}^{1/2} ∈ [0, √2].

use std::cmp::Ordering;

use rand::Rng;

use crate::error::{input, Error, Result};
use crate::mixture::MixtureDensity;
use crate::real::Real;

pub const MIN_BUDGET: usize = 10_000;

/// Log ratios are clipped to ±`CLIP` in [`kl_mc`].
pub const CLIP: f64 = 700.0;
/// Largest tolerated fraction of clipped log ratios.
pub const MAX_CLIP_FRACTION: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceMethod {
    McImportance,
    GridQuadrature,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceEstimate {
    pub value: f64,
    pub stderr: f64,
    pub method: DistanceMethod,
    /// Number of points at which the densities were evaluated.
    pub n_evals: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Hellinger,
    L1,
    Kl,
}

impl std::str::FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hellinger" => Ok(Metric::Hellinger),
            "l1" => Ok(Metric::L1),
            "kl" => Ok(Metric::Kl),
            other => Err(input(format!("unknown metric `{other}`"))),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::Hellinger => "hellinger",
            Metric::L1 => "l1",
            Metric::Kl => "kl",
        })
    }
}

fn to64<T: Real>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

fn check_pair<T: Real>(f: &MixtureDensity<T>, g: &MixtureDensity<T>, budget: usize) -> Result<()> {
    if f.dim() != g.dim() {
        return Err(input(format!("dimension mismatch: {} vs {}", f.dim(), g.dim())));
    }
    if budget < MIN_BUDGET {
        return Err(input(format!("budget {budget} below minimum {MIN_BUDGET}")));
    }
    Ok(())
}

/// Parameters flattened for a deterministic total order on mixtures.
fn signature<T: Real>(f: &MixtureDensity<T>) -> Vec<f64> {
    let mut out: Vec<f64> = f.weights().iter().map(|&w| to64(w)).collect();
    for c in f.components() {
        out.extend(c.mean().iter().map(|&v| to64(v)));
        out.extend(c.cov().matrix().as_slice().iter().map(|&v| to64(v)));
    }
    out
}

/// The pair in canonical order, so symmetric estimators are exactly symmetric.
fn canonical<'a, T: Real>(f: &'a MixtureDensity<T>, g: &'a MixtureDensity<T>) -> (&'a MixtureDensity<T>, &'a MixtureDensity<T>) {
    let (a, b) = (signature(f), signature(g));
    let ord = a.len().cmp(&b.len()).then_with(|| {
        a.iter().zip(&b).map(|(x, y)| x.total_cmp(y)).find(|o| *o != Ordering::Equal).unwrap_or(Ordering::Equal)
    });
    if ord == Ordering::Greater {
        (g, f)
    } else {
        (f, g)
    }
}

/// ∫ψ(f̄, ḡ) by stratified importance sampling from ½f̄ + ½ḡ: half the
/// budget from each normalized mixture, integrand divided by the mixture
/// density. Returns (estimate, stderr).
fn defensive<T: Real, R: Rng + ?Sized>(
    f: &MixtureDensity<T>,
    g: &MixtureDensity<T>,
    budget: usize,
    rng: &mut R,
    psi: impl Fn(f64, f64) -> f64,
) -> (f64, f64) {
    let (mf, mg) = (to64(f.total_mass()), to64(g.total_mass()));
    let nf = budget / 2;
    let ng = budget - nf;
    let mut stats = [(0.0f64, 0.0f64); 2];
    for (s, (src, n)) in [(f, nf), (g, ng)].into_iter().enumerate() {
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let x = src.sample(rng);
            let fx = to64(f.eval_unchecked(&x)) / mf;
            let gx = to64(g.eval_unchecked(&x)) / mg;
            let q = 0.5 * (fx + gx);
            let v = if q > 0.0 { psi(fx, gx) / q } else { 0.0 };
            sum += v;
            sq += v * v;
        }
        let mean = sum / n as f64;
        let var = (sq / n as f64 - mean * mean).max(0.0) * n as f64 / (n as f64 - 1.0);
        stats[s] = (mean, var / n as f64);
    }
    let est = 0.5 * (stats[0].0 + stats[1].0);
    let se = 0.5 * (stats[0].1 + stats[1].1).sqrt();
    (est, se)
}

fn hellinger_from_sq(sq: f64, se_sq: f64) -> (f64, f64) {
    let d2 = sq.max(0.0);
    let d = d2.sqrt().min(std::f64::consts::SQRT_2);
    // delta method, with d floored so the error stays finite near zero
    let se = if se_sq > 0.0 { se_sq / (2.0 * d.max(se_sq.sqrt())) } else { 0.0 };
    (d, se)
}

/// Hellinger distance by defensive-mixture importance sampling of
/// ∫(√f − √g)², the same integral as 2 − 2∫√(fg) but with an integrand that
/// vanishes as f → g.
pub fn hellinger<T: Real, R: Rng + ?Sized>(f: &MixtureDensity<T>, g: &MixtureDensity<T>, budget: usize, rng: &mut R) -> Result<DistanceEstimate> {
    check_pair(f, g, budget)?;
    let (a, b) = canonical(f, g);
    let (sq, se) = defensive(a, b, budget, rng, |x, y| {
        let d = x.sqrt() - y.sqrt();
        d * d
    });
    let (value, stderr) = hellinger_from_sq(sq, se);
    Ok(DistanceEstimate { value, stderr, method: DistanceMethod::McImportance, n_evals: budget })
}

/// ‖f − g‖₁ by defensive-mixture importance sampling.
pub fn l1_distance<T: Real, R: Rng + ?Sized>(f: &MixtureDensity<T>, g: &MixtureDensity<T>, budget: usize, rng: &mut R) -> Result<DistanceEstimate> {
    check_pair(f, g, budget)?;
    let (a, b) = canonical(f, g);
    let (v, se) = defensive(a, b, budget, rng, |x, y| (x - y).abs());
    Ok(DistanceEstimate { value: v.clamp(0.0, 2.0), stderr: se, method: DistanceMethod::McImportance, n_evals: budget })
}

/// ∫ log(f/g) f by plain Monte Carlo under f.
///
/// Log ratios are clipped to ±700; if more than 0.01% of the draws clip the
/// estimate is refused. A slightly negative average is reported as 0.
pub fn kl_mc<T: Real, R: Rng + ?Sized>(f: &MixtureDensity<T>, g: &MixtureDensity<T>, budget: usize, rng: &mut R) -> Result<DistanceEstimate> {
    check_pair(f, g, budget)?;
    let shift = to64(g.total_mass()).ln() - to64(f.total_mass()).ln();
    let (mut sum, mut sq, mut clipped) = (0.0, 0.0, 0usize);
    for _ in 0..budget {
        let x = f.sample(rng);
        let mut lr = to64(f.log_eval_unchecked(&x)) - to64(g.log_eval_unchecked(&x)) + shift;
        if !lr.is_finite() || lr.abs() > CLIP {
            clipped += 1;
            lr = if lr.is_nan() { CLIP } else { lr.clamp(-CLIP, CLIP) };
        }
        sum += lr;
        sq += lr * lr;
    }
    if clipped as f64 > MAX_CLIP_FRACTION * budget as f64 {
        return Err(Error::Estimation(format!("{clipped} of {budget} log ratios clipped")));
    }
    let n = budget as f64;
    let mean = sum / n;
    let var = (sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok(DistanceEstimate { value: mean.max(0.0), stderr: (var / n).sqrt(), method: DistanceMethod::McImportance, n_evals: budget })
}

pub fn estimate<T: Real, R: Rng + ?Sized>(
    metric: Metric,
    f: &MixtureDensity<T>,
    g: &MixtureDensity<T>,
    budget: usize,
    rng: &mut R,
) -> Result<DistanceEstimate> {
    match metric {
        Metric::Hellinger => hellinger(f, g, budget, rng),
        Metric::L1 => l1_distance(f, g, budget, rng),
        Metric::Kl => kl_mc(f, g, budget, rng),
    }
}

/// Points per axis of the quadrature grid.
pub const QUAD_POINTS: usize = 2001;

fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let w = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * h / 3.0
        })
        .collect()
}

/// Per-axis range covering every component of both mixtures by ±10 sd.
fn axis_range<T: Real>(f: &MixtureDensity<T>, g: &MixtureDensity<T>, axis: usize) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for c in f.components().iter().chain(g.components()) {
        let m = to64(c.mean()[axis]);
        let s = to64(c.cov().entry(axis, axis)).sqrt();
        lo = lo.min(m - 10.0 * s);
        hi = hi.max(m + 10.0 * s);
    }
    (lo, hi)
}

/// ∫ψ(f̄(x), ḡ(x)) dx by tensor Simpson quadrature (d ≤ 2).
fn quadrature<T: Real>(f: &MixtureDensity<T>, g: &MixtureDensity<T>, psi: impl Fn(f64, f64) -> f64) -> Result<(f64, usize)> {
    let d = f.dim();
    if g.dim() != d {
        return Err(input(format!("dimension mismatch: {} vs {}", d, g.dim())));
    }
    if d > 2 {
        return Err(input("quadrature is only available for d <= 2"));
    }
    let (mf, mg) = (to64(f.total_mass()), to64(g.total_mass()));
    let n = QUAD_POINTS;
    let axes: Vec<(f64, f64, Vec<f64>)> = (0..d)
        .map(|a| {
            let (lo, hi) = axis_range(f, g, a);
            let h = (hi - lo) / (n - 1) as f64;
            (lo, h, simpson_weights(n, h))
        })
        .collect();
    let eval = |x: &[T]| psi(to64(f.eval_unchecked(x)) / mf, to64(g.eval_unchecked(x)) / mg);
    let mut total = 0.0;
    if d == 1 {
        let (lo, h, w) = &axes[0];
        for (i, wi) in w.iter().enumerate() {
            total += wi * eval(&[T::of(lo + h * i as f64)]);
        }
        return Ok((total, n));
    }
    let (lo0, h0, w0) = &axes[0];
    let (lo1, h1, w1) = &axes[1];
    for (i, wi) in w0.iter().enumerate() {
        let x0 = T::of(lo0 + h0 * i as f64);
        let mut row = 0.0;
        for (j, wj) in w1.iter().enumerate() {
            row += wj * eval(&[x0, T::of(lo1 + h1 * j as f64)]);
        }
        total += wi * row;
    }
    Ok((total, n * n))
}

fn quad_estimate(value: f64, n_evals: usize) -> DistanceEstimate {
    DistanceEstimate { value, stderr: 0.0, method: DistanceMethod::GridQuadrature, n_evals }
}

/// Reference Hellinger distance by quadrature (d ≤ 2, 2001 points per axis).
pub fn hellinger_quadrature<T: Real>(f: &MixtureDensity<T>, g: &MixtureDensity<T>) -> Result<DistanceEstimate> {
    let (sq, n) = quadrature(f, g, |x, y| {
        let d = x.sqrt() - y.sqrt();
        d * d
    })?;
    Ok(quad_estimate(sq.max(0.0).sqrt().min(std::f64::consts::SQRT_2), n))
}

pub fn l1_quadrature<T: Real>(f: &MixtureDensity<T>, g: &MixtureDensity<T>) -> Result<DistanceEstimate> {
    let (v, n) = quadrature(f, g, |x, y| (x - y).abs())?;
    Ok(quad_estimate(v.clamp(0.0, 2.0), n))
}

pub fn kl_quadrature<T: Real>(f: &MixtureDensity<T>, g: &MixtureDensity<T>) -> Result<DistanceEstimate> {
    let (v, n) = quadrature(f, g, |x, y| if x > 0.0 && y > 0.0 { x * (x / y).ln() } else { 0.0 })?;
    Ok(quad_estimate(v.max(0.0), n))
}

/// Component-wise upper bound on ‖f − g‖₁ over paired components.
///
/// Component `h < H` of `f` is paired with component `pairing[h]` of `g`.
/// Each pair contributes
/// π_h¹ [ √(2/π)‖θ¹−θ²‖/√λ_d(Σ²) + {Σ_i(x_i − log x_i − 1)}^{1/2}
///        + {2d‖O¹−O²‖₂ λ₁(Σ¹)/λ_d(Σ¹)}^{1/2} ] + |π_h¹ − π²|,
/// with x_i = λ_i(Σ¹)/λ_i(Σ²) (both spectra descending) and O the
/// eigenvector matrices under the first-nonzero-entry-positive sign
/// convention. Unpaired listed weights of either mixture are added in full.
/// The eigenvalue term is evaluated exactly, not through (x − 1)².
pub fn l1_mixture_upper_bound<T: Real>(f: &MixtureDensity<T>, g: &MixtureDensity<T>, pairing: &[usize], h: usize) -> Result<f64> {
    if f.dim() != g.dim() {
        return Err(input(format!("dimension mismatch: {} vs {}", f.dim(), g.dim())));
    }
    if h > pairing.len() || h > f.len() {
        return Err(input(format!("H = {h} exceeds pairing length {} or component count {}", pairing.len(), f.len())));
    }
    let mut used = vec![false; g.len()];
    for &p in &pairing[..h] {
        if p >= g.len() {
            return Err(input(format!("pairing index {p} out of range for {} components", g.len())));
        }
        if used[p] {
            return Err(input(format!("component {p} of g paired twice")));
        }
        used[p] = true;
    }
    let d = f.dim() as f64;
    let mut total = 0.0;
    for (i, &p) in pairing[..h].iter().enumerate() {
        let (c1, c2) = (&f.components()[i], &g.components()[p]);
        let (w1, w2) = (to64(f.weights()[i]), to64(g.weights()[p]));
        let s1 = c1.cov().spectral()?;
        let s2 = c2.cov().spectral()?;
        let dtheta: f64 = c1.mean().iter().zip(c2.mean()).map(|(&a, &b)| to64(a - b).powi(2)).sum::<f64>().sqrt();
        let lam2_min = to64(*s2.values.last().expect("dim >= 1"));
        let loc = (2.0 / std::f64::consts::PI).sqrt() * dtheta / lam2_min.sqrt();
        let eig: f64 = s1
            .values
            .iter()
            .zip(&s2.values)
            .map(|(&a, &b)| {
                let x = to64(a) / to64(b);
                x - x.ln() - 1.0
            })
            .sum();
        let odiff = to64(s1.vectors.sub(&s2.vectors).spectral_norm());
        let cond1 = to64(s1.values[0]) / to64(*s1.values.last().expect("dim >= 1"));
        let rot = (2.0 * d * odiff * cond1).sqrt();
        total += w1 * (loc + eig.max(0.0).sqrt() + rot) + (w1 - w2).abs();
    }
    total += f.weights()[h..].iter().map(|&w| to64(w)).sum::<f64>();
    total += g.weights().iter().zip(&used).filter(|(_, &u)| !u).map(|(&w, _)| to64(w)).sum::<f64>();
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsiszarCheck {
    /// ‖f − g‖₁².
    pub lhs: f64,
    /// 2 ∫ log(f/g) f.
    pub rhs: f64,
    pub lhs_stderr: f64,
    pub rhs_stderr: f64,
    /// lhs ≤ rhs within 3 combined standard errors.
    pub holds: bool,
}

/// ‖f − g‖₁² ≤ 2 ∫ log(f/g) f, both sides estimated by Monte Carlo.
pub fn csiszar_check<T: Real, R: Rng + ?Sized>(f: &MixtureDensity<T>, g: &MixtureDensity<T>, budget: usize, rng: &mut R) -> Result<CsiszarCheck> {
    let l1 = l1_distance(f, g, budget, rng)?;
    let kl = kl_mc(f, g, budget, rng)?;
    let lhs = l1.value * l1.value;
    let lhs_stderr = 2.0 * l1.value * l1.stderr;
    let rhs = 2.0 * kl.value;
    let rhs_stderr = 2.0 * kl.stderr;
    let holds = lhs <= rhs + 3.0 * (lhs_stderr.powi(2) + rhs_stderr.powi(2)).sqrt();
    Ok(CsiszarCheck { lhs, rhs, lhs_stderr, rhs_stderr, holds })
}
