#![allow(dead_code)]

use rand::Rng;

use lsmix::mixture::{GaussianComponent, MixtureDensity};
use lsmix::priors::{BaseMeasureSpec, CovariancePrior, IwParams, LocationPrior};
use lsmix::sampler::{DpMixtureModel, GibbsState};
use lsmix::spd::SpdMatrix;

/// Rotation by a uniform angle times diag of log-uniform eigenvalues in [lo, hi].
pub fn random_spd2<R: Rng>(lo: f64, hi: f64, rng: &mut R) -> SpdMatrix<f64> {
    let w: f64 = rng.random_range(0.0..std::f64::consts::PI);
    let (c, s) = (w.cos(), w.sin());
    let l1 = (lo.ln() + rng.random::<f64>() * (hi / lo).ln()).exp();
    let l2 = (lo.ln() + rng.random::<f64>() * (hi / lo).ln()).exp();
    let a = c * c * l1 + s * s * l2;
    let b = c * s * (l1 - l2);
    let d = s * s * l1 + c * c * l2;
    SpdMatrix::from_rows(&[vec![a, b], vec![b, d]]).unwrap()
}

pub fn random_gaussian2<R: Rng>(spread: f64, rng: &mut R) -> GaussianComponent<f64> {
    let m = vec![rng.random_range(-spread..spread), rng.random_range(-spread..spread)];
    GaussianComponent::new(m, random_spd2(0.3, 3.0, rng)).unwrap()
}

/// k-component mixture in d = 2 with Dirichlet(1, …, 1) weights.
pub fn random_mixture2<R: Rng>(k: usize, rng: &mut R) -> MixtureDensity<f64> {
    let e: Vec<f64> = (0..k).map(|_| -rng.random::<f64>().ln()).collect();
    let s: f64 = e.iter().sum();
    MixtureDensity::new(e.iter().map(|x| x / s).collect(), (0..k).map(|_| random_gaussian2(2.0, rng)).collect()).unwrap()
}

/// Small perturbation of every parameter of a mixture, same component order.
pub fn perturb2<R: Rng>(f: &MixtureDensity<f64>, scale: f64, rng: &mut R) -> MixtureDensity<f64> {
    let e: Vec<f64> = f.weights().iter().map(|w| w * (scale * (rng.random::<f64>() - 0.5)).exp()).collect();
    let s: f64 = e.iter().sum();
    let comps = f
        .components()
        .iter()
        .map(|c| {
            let m = c.mean().iter().map(|v| v + scale * (rng.random::<f64>() - 0.5)).collect();
            // (1 − s/2)Σ + s·W stays SPD for s < 2
            let (r, w) = (c.cov().to_rows(), random_spd2(0.3, 3.0, rng).to_rows());
            let rows: Vec<Vec<f64>> = (0..2).map(|i| (0..2).map(|j| (1.0 - scale / 2.0) * r[i][j] + scale * w[i][j]).collect()).collect();
            let cov = SpdMatrix::from_rows(&rows).unwrap();
            GaussianComponent::new(m, cov).unwrap()
        })
        .collect();
    MixtureDensity::new(e.iter().map(|x| x / s).collect(), comps).unwrap()
}

pub fn det2(m: &[Vec<f64>]) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Squared Hellinger ∫(√f − √g)² = 2 − 2·BC for two Gaussians in d ≤ 2, via the
/// Bhattacharyya coefficient BC = exp(−Δᵀ S⁻¹ Δ/8) · (|Σ₁||Σ₂|)^{1/4} / |S|^{1/2},
/// S = (Σ₁ + Σ₂)/2.
pub fn hellinger_sq_gaussian(a: &GaussianComponent<f64>, b: &GaussianComponent<f64>) -> f64 {
    let (ra, rb) = (a.cov().to_rows(), b.cov().to_rows());
    let d = a.dim();
    let (maha, ds, d1, d2) = if d == 1 {
        let s = (ra[0][0] + rb[0][0]) / 2.0;
        let dm = a.mean()[0] - b.mean()[0];
        (dm * dm / s, s, ra[0][0], rb[0][0])
    } else {
        let s: Vec<Vec<f64>> = (0..2).map(|i| (0..2).map(|j| (ra[i][j] + rb[i][j]) / 2.0).collect()).collect();
        let det = det2(&s);
        let dm = [a.mean()[0] - b.mean()[0], a.mean()[1] - b.mean()[1]];
        let q = (s[1][1] * dm[0] * dm[0] - 2.0 * s[0][1] * dm[0] * dm[1] + s[0][0] * dm[1] * dm[1]) / det;
        (q, det, det2(&ra), det2(&rb))
    };
    let bc = (-maha / 8.0).exp() * (d1 * d2).powf(0.25) / ds.sqrt();
    2.0 - 2.0 * bc
}

pub fn iw_base(d: usize, nu: f64) -> BaseMeasureSpec<f64> {
    BaseMeasureSpec::new(LocationPrior::standard(d), CovariancePrior::InverseWishart(IwParams { scale: SpdMatrix::identity(d), nu })).unwrap()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Standard error of the mean of independent draws.
pub fn iid_se(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0) / v.len() as f64).sqrt()
}

/// Batch-means standard error with 50 batches.
pub fn batch_se(v: &[f64]) -> f64 {
    let b = 50;
    let k = v.len() / b;
    let bm: Vec<f64> = (0..b).map(|i| mean(&v[i * k..(i + 1) * k])).collect();
    iid_se(&bm)
}

pub struct GewekeStat {
    pub name: &'static str,
    pub prior_mean: f64,
    pub prior_se: f64,
    pub chain_mean: f64,
    pub chain_se: f64,
}

impl GewekeStat {
    pub fn z(&self) -> f64 {
        (self.prior_mean - self.chain_mean) / (self.prior_se.powi(2) + self.chain_se.powi(2)).sqrt()
    }
}

/// Marginal-conditional draws against the successive-conditional chain that
/// alternates data simulation and one Gibbs sweep, on π₁, λ₁(Σ₁) and
/// log λ₁(Σ₁) (the last is robust to heavy covariance tails).
pub fn geweke<R: Rng>(model: &DpMixtureModel<f64>, n_data: usize, rounds: usize, rng: &mut R) -> Vec<GewekeStat> {
    const NAMES: [&str; 3] = ["pi_1", "lambda_1(Sigma_1)", "log lambda_1(Sigma_1)"];
    let stats = |s: &GibbsState<f64>| {
        let l = s.covariance(0).lambda_max().unwrap();
        [s.weights()[0], l, l.ln()]
    };
    let mut prior: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(rounds)).collect();
    for _ in 0..rounds {
        let s = GibbsState::from_prior(model, rng).unwrap();
        for (v, x) in prior.iter_mut().zip(stats(&s)) {
            v.push(x);
        }
    }
    let mut s = GibbsState::from_prior(model, rng).unwrap();
    let mut chain: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(rounds)).collect();
    for _ in 0..rounds {
        let y = s.simulate_data(n_data, rng).unwrap();
        s.step(&y, rng).unwrap();
        for (v, x) in chain.iter_mut().zip(stats(&s)) {
            v.push(x);
        }
    }
    (0..3)
        .map(|k| GewekeStat {
            name: NAMES[k],
            prior_mean: mean(&prior[k]),
            prior_se: iid_se(&prior[k]),
            chain_mean: mean(&chain[k]),
            chain_se: batch_se(&chain[k]),
        })
        .collect()
}
