//! Regularity checks on a candidate true density f₀:
//! 0 < f₀ < M, finite entropy ∫ f₀ log f₀, finite local log ratio
//! ∫ f₀ log(f₀/φ_δ) with φ_δ(x) = inf_{‖t−x‖<δ} f₀(t), and a finite
//! moment ∫ ‖x‖^{2(1+η)} f₀.
//!
//! f₀ is restricted to finite Gaussian mixtures, for which all four hold.
//! The checks report whether the numerical evidence is consistent with
//! each condition; they do not certify posterior consistency by themselves.

use rand::Rng;

use crate::error::{input, param, Error, Result};
use crate::linalg::norm;
use crate::mixture::MixtureDensity;
use crate::rng::stream;

pub const DEFAULT_ETA: f64 = 1.0;
pub const DEFAULT_DELTA: f64 = 0.5;

const CLIP: f64 = 700.0;
const MAX_CLIP_FRACTION: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct F0Spec {
    pub density: MixtureDensity<f64>,
    pub eta: f64,
    pub delta: f64,
    /// Claimed bound M on sup f₀; infinity stands for "some finite M".
    pub m_bound: f64,
}

impl F0Spec {
    pub fn new(density: MixtureDensity<f64>) -> Result<Self> {
        let s = F0Spec { density, eta: DEFAULT_ETA, delta: DEFAULT_DELTA, m_bound: f64::INFINITY };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.density.is_empty() {
            return Err(input("f0 needs at least one component"));
        }
        if (self.density.total_mass() - 1.0).abs() > 1e-9 {
            return Err(input(format!("f0 weights sum to {}, not 1", self.density.total_mass())));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(param(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(param(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.m_bound > 0.0) {
            return Err(param("M must be positive"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.density.dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckResult {
    pub estimate: f64,
    pub stderr: f64,
    pub pass: bool,
}

/// Gradient of log f at x.
fn grad_log(f: &MixtureDensity<f64>, x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let lw: Vec<f64> = f
        .weights()
        .iter()
        .zip(f.components())
        .map(|(&w, c)| if w > 0.0 { w.ln() + c.log_density(x) } else { f64::NEG_INFINITY })
        .collect();
    let mx = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut g = vec![0.0; d];
    if mx == f64::NEG_INFINITY {
        return g;
    }
    let tot: f64 = lw.iter().map(|&l| (l - mx).exp()).sum();
    for (c, &l) in f.components().iter().zip(&lw) {
        let r = (l - mx).exp() / tot;
        if r == 0.0 {
            continue;
        }
        let diff: Vec<f64> = c.mean().iter().zip(x).map(|(&m, &v)| m - v).collect();
        for (gi, v) in g.iter_mut().zip(c.cov().solve(&diff)) {
            *gi += r * v;
        }
    }
    g
}

/// Fixed-point mean-shift iteration toward a local mode of f.
fn mean_shift(f: &MixtureDensity<f64>, start: &[f64], iters: usize) -> Vec<f64> {
    let d = start.len();
    let mut x = start.to_vec();
    let precs: Vec<_> = f.components().iter().map(|c| c.cov().inverse().expect("spd")).collect();
    for _ in 0..iters {
        let mut a = vec![0.0; d * d];
        let mut b = vec![0.0; d];
        for ((&w, c), p) in f.weights().iter().zip(f.components()).zip(&precs) {
            let r = w * c.density(&x);
            let pm = p.matrix();
            let pt = pm.matvec(c.mean());
            for i in 0..d {
                b[i] += r * pt[i];
                for j in 0..d {
                    a[i * d + j] += r * pm[(i, j)];
                }
            }
        }
        let Ok(am) = crate::spd::SpdMatrix::new(d, a) else { break };
        let next = am.solve(&b);
        let step: f64 = next.iter().zip(&x).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        x = next;
        if step < 1e-12 {
            break;
        }
    }
    x
}

/// sup f₀ over mean-shift refinements started at every component mean and
/// every pairwise midpoint; passes iff sup ≤ M.
pub fn check_bounded(spec: &F0Spec) -> Result<CheckResult> {
    spec.validate()?;
    let f = &spec.density;
    let comps = f.components();
    let mut starts: Vec<Vec<f64>> = comps.iter().map(|c| c.mean().to_vec()).collect();
    for i in 0..comps.len() {
        for j in i + 1..comps.len() {
            starts.push(comps[i].mean().iter().zip(comps[j].mean()).map(|(a, b)| 0.5 * (a + b)).collect());
        }
    }
    let mut sup: f64 = 0.0;
    for s in &starts {
        sup = sup.max(f.eval(s)?);
        let m = mean_shift(f, s, 500);
        if m.iter().all(|v| v.is_finite()) {
            sup = sup.max(f.eval(&m)?);
        }
    }
    Ok(CheckResult { estimate: sup, stderr: 0.0, pass: sup.is_finite() && sup > 0.0 && sup <= spec.m_bound })
}

/// Mean, stderr, and whether the two halves of the sample agree within 4 se.
fn stable_mean(values: &[f64]) -> (f64, f64, bool) {
    fn ms(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (var / n).sqrt())
    }
    let (m, se) = ms(values);
    let (a, b) = values.split_at(values.len() / 2);
    let (ma, sa) = ms(a);
    let (mb, sb) = ms(b);
    let stable = m.is_finite() && se.is_finite() && (ma - mb).abs() <= 4.0 * (sa * sa + sb * sb).sqrt();
    (m, se, stable)
}

fn check_budget(budget: usize) -> Result<()> {
    if budget < 100 {
        return Err(input(format!("budget {budget} too small; need at least 100")));
    }
    Ok(())
}

fn clip_all(values: &mut [f64]) -> Result<()> {
    let mut clipped = 0usize;
    for v in values.iter_mut() {
        if !v.is_finite() || v.abs() > CLIP {
            clipped += 1;
            *v = if v.is_nan() { CLIP } else { v.clamp(-CLIP, CLIP) };
        }
    }
    if clipped as f64 > MAX_CLIP_FRACTION * values.len() as f64 {
        return Err(Error::Estimation(format!("{clipped} of {} log values clipped", values.len())));
    }
    Ok(())
}

/// ∫ f₀ log f₀ by Monte Carlo under f₀.
pub fn check_entropy<R: Rng + ?Sized>(spec: &F0Spec, budget: usize, rng: &mut R) -> Result<CheckResult> {
    spec.validate()?;
    check_budget(budget)?;
    let f = &spec.density;
    let mut v: Vec<f64> = (0..budget).map(|_| f.log_eval_unchecked(&f.sample(rng))).collect();
    clip_all(&mut v)?;
    let (estimate, stderr, pass) = stable_mean(&v);
    Ok(CheckResult { estimate, stderr, pass })
}

/// min of log f₀ over the closed δ-ball around x: the 2d+1 stencil, the
/// boundary point down the gradient, then projected gradient descent from
/// the best of these.
pub fn log_phi_delta(f: &MixtureDensity<f64>, x: &[f64], delta: f64) -> f64 {
    let d = x.len();
    let log_f = |t: &[f64]| f.log_eval_unchecked(t);
    let mut best = x.to_vec();
    let mut best_v = log_f(x);
    let consider = |t: Vec<f64>, best: &mut Vec<f64>, best_v: &mut f64| {
        let v = log_f(&t);
        if v < *best_v {
            *best_v = v;
            *best = t;
        }
    };
    for i in 0..d {
        for s in [-1.0, 1.0] {
            let mut t = x.to_vec();
            t[i] += s * delta;
            consider(t, &mut best, &mut best_v);
        }
    }
    let g = grad_log(f, x);
    let gn = norm(&g);
    if gn > 0.0 {
        let t = x.iter().zip(&g).map(|(&a, &b)| a - delta * b / gn).collect();
        consider(t, &mut best, &mut best_v);
    }
    let project = |t: &mut Vec<f64>| {
        let off: Vec<f64> = t.iter().zip(x).map(|(a, b)| a - b).collect();
        let r = norm(&off);
        if r > delta {
            for (ti, (&o, &xi)) in t.iter_mut().zip(off.iter().zip(x)) {
                *ti = xi + o * delta / r;
            }
        }
    };
    let mut step = delta / 4.0;
    let mut t = best.clone();
    for _ in 0..60 {
        let g = grad_log(f, &t);
        let gn = norm(&g);
        if gn == 0.0 {
            break;
        }
        let mut cand: Vec<f64> = t.iter().zip(&g).map(|(&a, &b)| a - step * b / gn).collect();
        project(&mut cand);
        let v = log_f(&cand);
        if v < best_v {
            best_v = v;
            t = cand;
        } else {
            step *= 0.5;
            if step < delta * 1e-6 {
                break;
            }
        }
    }
    // a last look at the boundary along the descent direction from x
    let off: Vec<f64> = t.iter().zip(x).map(|(a, b)| a - b).collect();
    let r = norm(&off);
    if r > 0.0 {
        let edge: Vec<f64> = x.iter().zip(&off).map(|(&a, &o)| a + o * delta / r).collect();
        best_v = best_v.min(log_f(&edge));
    }
    best_v
}

/// ∫ f₀ log(f₀/φ_δ) by Monte Carlo under f₀.
pub fn check_local_log_ratio<R: Rng + ?Sized>(spec: &F0Spec, budget: usize, rng: &mut R) -> Result<CheckResult> {
    spec.validate()?;
    check_budget(budget)?;
    let f = &spec.density;
    let mut v: Vec<f64> = (0..budget)
        .map(|_| {
            let x = f.sample(rng);
            f.log_eval_unchecked(&x) - log_phi_delta(f, &x, spec.delta)
        })
        .collect();
    clip_all(&mut v)?;
    let (estimate, stderr, stable) = stable_mean(&v);
    Ok(CheckResult { estimate, stderr, pass: stable && estimate >= -3.0 * stderr })
}

/// E‖X‖^{2(1+η)} by Monte Carlo under f₀.
pub fn check_moment<R: Rng + ?Sized>(spec: &F0Spec, budget: usize, rng: &mut R) -> Result<CheckResult> {
    spec.validate()?;
    check_budget(budget)?;
    let f = &spec.density;
    let p = 2.0 * (1.0 + spec.eta);
    let v: Vec<f64> = (0..budget).map(|_| norm(&f.sample(rng)).powf(p)).collect();
    let (estimate, stderr, pass) = stable_mean(&v);
    Ok(CheckResult { estimate, stderr, pass })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F0Report {
    pub bounded: CheckResult,
    pub entropy: CheckResult,
    pub local_log_ratio: CheckResult,
    pub moment: CheckResult,
}

impl F0Report {
    pub fn pass(&self) -> bool {
        self.bounded.pass && self.entropy.pass && self.local_log_ratio.pass && self.moment.pass
    }

    pub fn failures(&self) -> Vec<&'static str> {
        [
            ("bounded", self.bounded.pass),
            ("entropy", self.entropy.pass),
            ("local_log_ratio", self.local_log_ratio.pass),
            ("moment", self.moment.pass),
        ]
        .into_iter()
        .filter(|(_, p)| !p)
        .map(|(n, _)| n)
        .collect()
    }
}

/// All four checks, each on its own stream of `seed`.
pub fn check_all(spec: &F0Spec, budget: usize, seed: u64) -> Result<F0Report> {
    let ((bounded, entropy), (local_log_ratio, moment)) = rayon::join(
        || (check_bounded(spec), check_entropy(spec, budget, &mut stream(seed, 1))),
        || (check_local_log_ratio(spec, budget, &mut stream(seed, 2)), check_moment(spec, budget, &mut stream(seed, 3))),
    );
    Ok(F0Report { bounded: bounded?, entropy: entropy?, local_log_ratio: local_log_ratio?, moment: moment? })
}
