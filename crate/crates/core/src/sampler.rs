//! Blocked Gibbs sampler for the truncated DP location-scale mixture.
//!
//! One sweep updates, in order: allocations z_i | rest (multinomial),
//! sticks V_h ~ Beta(1 + n_h, α + Σ_{k>h} n_k) with V_H = 1, and atoms.
//! Locations are conjugate given Σ_h for every family; inverse-Wishart
//! covariances are conjugate too. Factor, MGP and spectral covariances are
//! updated by componentwise random-walk Metropolis on loadings, log
//! precisions and rotator angles, with MGP shrinkage parameters drawn from
//! their full conditionals. Atoms with no data are redrawn from P*.

use rand::Rng;
use rayon::prelude::*;

use crate::distances::{hellinger, DistanceEstimate};
use crate::error::{input, param, Result};
use crate::linalg::Matrix;
use crate::mixture::{GaussianComponent, MixtureDensity};
use crate::priors::{
    cumulative_tau, factor_sigma, log_angle_continuous, rotation_from_angles, sample_base, sample_factor_draw, sample_iw,
    sample_mgp_draw, sample_rotator_angle, sample_spectral_draw, spectral_sigma, BaseMeasureSpec, CovariancePrior, IwParams,
    LocationPrior,
};
use crate::real::Real;
use crate::rng::stream;
use crate::spd::SpdMatrix;

/// Largest default truncation.
pub const MAX_DEFAULT_TRUNCATION: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct DpMixtureModel<T> {
    pub alpha: T,
    pub base: BaseMeasureSpec<T>,
    pub truncation: usize,
}

impl<T: Real> DpMixtureModel<T> {
    pub fn new(alpha: T, base: BaseMeasureSpec<T>, truncation: usize) -> Result<Self> {
        let m = DpMixtureModel { alpha, base, truncation };
        m.validate()?;
        Ok(m)
    }

    /// Truncation ⌈5α log n⌉, capped at 200.
    pub fn default_truncation(alpha: T, n: usize) -> usize {
        let a = alpha.to_f64().unwrap_or(1.0);
        let h = (5.0 * a * (n.max(2) as f64).ln()).ceil();
        (h.max(1.0) as usize).min(MAX_DEFAULT_TRUNCATION)
    }

    pub fn with_default_truncation(alpha: T, base: BaseMeasureSpec<T>, n: usize) -> Result<Self> {
        Self::new(alpha, base, Self::default_truncation(alpha, n))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > T::zero()) || !self.alpha.is_finite() {
            return Err(param(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.truncation < 1 {
            return Err(param("truncation H must be at least 1"));
        }
        self.base.validate()
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Fit on per-coordinate standardized data and map snapshots back.
    pub standardize: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig { iterations: 2000, burn_in: 500, thin: 10, seed: 0, standardize: false }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(param(format!("iterations {} must exceed burn_in {}", self.iterations, self.burn_in)));
        }
        if self.thin < 1 {
            return Err(param("thin must be at least 1"));
        }
        Ok(())
    }

    pub fn n_snapshots(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

/// Post-burn-in acceptance rates of the Metropolis moves; `None` when the
/// move type was not used.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AcceptanceRates {
    pub loadings: Option<f64>,
    pub log_precision: Option<f64>,
    pub angles: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct PosteriorDraws<T> {
    pub snapshots: Vec<MixtureDensity<T>>,
    /// One fresh base draw per snapshot, carrying that snapshot's remainder mass.
    pub remainder_atoms: Vec<GaussianComponent<T>>,
    /// Number of occupied components at each snapshot.
    pub occupied: Vec<usize>,
    pub acceptance: AcceptanceRates,
}

impl<T: Real> PosteriorDraws<T> {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.snapshots.first().map_or(0, |s| s.dim())
    }
}

#[derive(Debug, Clone)]
enum CovState<T> {
    Iw,
    Factor { loadings: Matrix<T>, log_prec: Vec<T> },
    Mgp { loadings: Matrix<T>, log_prec: Vec<T>, phi: Matrix<T>, delta: Vec<T> },
    Spectral { log_prec: Vec<T>, angles: Vec<T> },
}

#[derive(Debug, Clone)]
struct Atom<T> {
    theta: Vec<T>,
    /// Covariance of θ: fixed, or the current draw under a hierarchical prior.
    b: SpdMatrix<T>,
    sigma: SpdMatrix<T>,
    cov: CovState<T>,
}

fn log_prec_of<T: Real>(omega: &[T]) -> Vec<T> {
    omega.iter().map(|&w| -w.ln()).collect()
}

fn exp_neg<T: Real>(v: &[T]) -> Vec<T> {
    v.iter().map(|&x| (-x).exp()).collect()
}

fn atom_from_prior<T: Real, R: Rng + ?Sized>(spec: &BaseMeasureSpec<T>, rng: &mut R) -> Result<Atom<T>> {
    let (theta, b) = spec.location.sample_with_scale(rng)?;
    let (sigma, cov) = match &spec.covariance {
        CovariancePrior::InverseWishart(p) => (sample_iw(p, rng)?, CovState::Iw),
        CovariancePrior::Factor(p) => {
            let f = sample_factor_draw(p, rng)?;
            let log_prec = log_prec_of(&f.omega);
            (f.sigma, CovState::Factor { loadings: f.loadings, log_prec })
        }
        CovariancePrior::Mgp(p) => {
            let m = sample_mgp_draw(p, rng)?;
            let log_prec = log_prec_of(&m.factor.omega);
            (m.factor.sigma, CovState::Mgp { loadings: m.factor.loadings, log_prec, phi: m.phi, delta: m.delta })
        }
        CovariancePrior::Spectral(p) => {
            let s = sample_spectral_draw(p, rng)?;
            let log_prec = log_prec_of(&s.eigvals);
            (s.sigma, CovState::Spectral { log_prec, angles: s.angles })
        }
    };
    Ok(Atom { theta, b, sigma, cov })
}

#[derive(Debug, Clone, Copy)]
struct Tuner {
    step: f64,
    window_acc: usize,
    window_prop: usize,
    acc: usize,
    prop: usize,
}

impl Tuner {
    fn new(step: f64) -> Self {
        Tuner { step, window_acc: 0, window_prop: 0, acc: 0, prop: 0 }
    }

    fn record(&mut self, accepted: bool, counting: bool) {
        self.window_prop += 1;
        self.window_acc += accepted as usize;
        if counting {
            self.prop += 1;
            self.acc += accepted as usize;
        }
    }

    /// Scale toward 0.3 acceptance.
    fn adapt(&mut self) {
        if self.window_prop >= 20 {
            let rate = self.window_acc as f64 / self.window_prop as f64;
            self.step = (self.step * (2.0 * (rate - 0.3)).exp()).clamp(1e-4, 10.0);
            self.window_acc = 0;
            self.window_prop = 0;
        }
    }

    fn reset_window(&mut self) {
        self.window_acc = 0;
        self.window_prop = 0;
    }

    fn rate(&self) -> Option<f64> {
        (self.prop > 0).then(|| self.acc as f64 / self.prop as f64)
    }
}

const ADAPT_EVERY: usize = 25;

fn accept<T: Real, R: Rng + ?Sized>(log_ratio: T, rng: &mut R) -> bool {
    log_ratio >= T::zero() || T::sample_open01(rng).ln() < log_ratio
}

/// −½ n log|Σ| − ½ tr(Σ⁻¹S).
fn cluster_loglik<T: Real>(sigma: &SpdMatrix<T>, n: usize, scatter: &Matrix<T>) -> Result<T> {
    let inv = sigma.inverse()?;
    let tr: T = inv.matrix().as_slice().iter().zip(scatter.as_slice()).map(|(&a, &b)| a * b).sum();
    let half = T::of(0.5);
    Ok(-half * T::of(n as f64) * sigma.log_det() - half * tr)
}

/// Log density of η = log(precision) when precision ~ Ga(a, rate b).
fn log_prec_prior<T: Real>(eta: T, a: T, b: T) -> T {
    a * eta - b * eta.exp()
}

fn wrap_angle<T: Real>(w: T) -> T {
    let pi = T::PI();
    let half = T::FRAC_PI_2();
    let mut v = (w + half) % pi;
    if v < T::zero() {
        v += pi;
    }
    v - half
}

/// Full state of the sampler, exposed for successive-conditional testing.
#[derive(Debug, Clone)]
pub struct GibbsState<T> {
    model: DpMixtureModel<T>,
    sticks: Vec<T>,
    atoms: Vec<Atom<T>>,
    alloc: Vec<usize>,
    tune_load: Tuner,
    tune_prec: Tuner,
    tune_angle: Tuner,
}

impl<T: Real> GibbsState<T> {
    /// Sticks V_1, …, V_{H−1} ~ Beta(1, α), V_H = 1, atoms from P*.
    pub fn from_prior<R: Rng + ?Sized>(model: &DpMixtureModel<T>, rng: &mut R) -> Result<Self> {
        model.validate()?;
        let h = model.truncation;
        let mut sticks: Vec<T> = (0..h)
            .map(|_| (T::zero() - (T::sample_open01(rng).ln() / model.alpha).exp_m1()).max(T::min_positive_value()))
            .collect();
        sticks[h - 1] = T::one();
        let atoms = (0..h).map(|_| atom_from_prior(&model.base, rng)).collect::<Result<Vec<_>>>()?;
        Ok(GibbsState {
            model: model.clone(),
            sticks,
            atoms,
            alloc: Vec::new(),
            tune_load: Tuner::new(0.3),
            tune_prec: Tuner::new(0.5),
            tune_angle: Tuner::new(0.3),
        })
    }

    pub fn weights(&self) -> Vec<T> {
        let mut left = T::one();
        self.sticks
            .iter()
            .map(|&v| {
                let w = v * left;
                left *= T::one() - v;
                w
            })
            .collect()
    }

    pub fn mean(&self, h: usize) -> &[T] {
        &self.atoms[h].theta
    }

    pub fn covariance(&self, h: usize) -> &SpdMatrix<T> {
        &self.atoms[h].sigma
    }

    pub fn truncation(&self) -> usize {
        self.atoms.len()
    }

    /// Allocation of each point from the most recent sweep.
    pub fn allocations(&self) -> &[usize] {
        &self.alloc
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.atoms.len()];
        for &z in &self.alloc {
            c[z] += 1;
        }
        c
    }

    pub fn mixture(&self) -> Result<MixtureDensity<T>> {
        let comps =
            self.atoms.iter().map(|a| GaussianComponent::new(a.theta.clone(), a.sigma.clone())).collect::<Result<Vec<_>>>()?;
        MixtureDensity::new(self.weights(), comps)
    }

    /// n points from the current mixture, one per row.
    pub fn simulate_data<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Matrix<T>> {
        let f = self.mixture()?;
        let d = f.dim();
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            data.extend(f.sample(rng));
        }
        Ok(Matrix::from_vec(n, d, data))
    }

    /// One full sweep without step-size adaptation.
    pub fn step<R: Rng + ?Sized>(&mut self, data: &Matrix<T>, rng: &mut R) -> Result<()> {
        check_data(data, self.model.dim())?;
        self.sweep(data, rng, false, false)
    }

    fn sweep<R: Rng + ?Sized>(&mut self, data: &Matrix<T>, rng: &mut R, adapt: bool, counting: bool) -> Result<()> {
        self.update_allocations(data, rng);
        let counts = self.counts();
        self.update_sticks(&counts, rng);
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); self.atoms.len()];
        for (i, &z) in self.alloc.iter().enumerate() {
            members[z].push(i);
        }
        for h in 0..self.atoms.len() {
            if members[h].is_empty() {
                self.atoms[h] = atom_from_prior(&self.model.base, rng)?;
            } else {
                self.update_atom(h, data, &members[h], rng, counting)?;
            }
        }
        if adapt {
            self.tune_load.adapt();
            self.tune_prec.adapt();
            self.tune_angle.adapt();
        }
        Ok(())
    }

    fn update_allocations<R: Rng + ?Sized>(&mut self, data: &Matrix<T>, rng: &mut R) {
        let h = self.atoms.len();
        let log_w: Vec<T> = self.weights().iter().map(|&w| w.ln()).collect();
        let comps: Vec<GaussianComponent<T>> = self
            .atoms
            .iter()
            .map(|a| GaussianComponent::new(a.theta.clone(), a.sigma.clone()).expect("atom dims agree"))
            .collect();
        self.alloc.resize(data.rows(), 0);
        let mut lp = vec![T::zero(); h];
        for i in 0..data.rows() {
            let x = data.row(i);
            let mut mx = T::neg_infinity();
            for k in 0..h {
                lp[k] = if log_w[k] == T::neg_infinity() { T::neg_infinity() } else { log_w[k] + comps[k].log_density(x) };
                if lp[k] > mx {
                    mx = lp[k];
                }
            }
            let mut total = T::zero();
            for v in lp.iter_mut() {
                *v = (*v - mx).exp();
                total += *v;
            }
            let u = T::sample_open01(rng) * total;
            let mut acc = T::zero();
            let mut pick = h - 1;
            for (k, &v) in lp.iter().enumerate() {
                acc += v;
                if u < acc {
                    pick = k;
                    break;
                }
            }
            // float slack can leave u above the running sum: take the last positive
            if u >= acc {
                pick = lp.iter().rposition(|&v| v > T::zero()).unwrap_or(0);
            }
            self.alloc[i] = pick;
        }
    }

    fn update_sticks<R: Rng + ?Sized>(&mut self, counts: &[usize], rng: &mut R) {
        let h = counts.len();
        let mut tail: usize = counts.iter().sum();
        for k in 0..h - 1 {
            tail -= counts[k];
            let a = T::one() + T::of(counts[k] as f64);
            let b = self.model.alpha + T::of(tail as f64);
            self.sticks[k] = T::sample_beta(a, b, rng).max(T::min_positive_value()).min(T::one());
        }
        self.sticks[h - 1] = T::one();
    }

    fn update_atom<R: Rng + ?Sized>(&mut self, h: usize, data: &Matrix<T>, members: &[usize], rng: &mut R, counting: bool) -> Result<()> {
        let d = self.model.dim();
        let n = members.len();
        // θ | Σ, B, data
        let theta = {
            let atom = &self.atoms[h];
            let s_inv = atom.sigma.inverse()?;
            let b_inv = atom.b.inverse()?;
            let mut sum = vec![T::zero(); d];
            for &i in members {
                for (s, &x) in sum.iter_mut().zip(data.row(i)) {
                    *s += x;
                }
            }
            let prec = b_inv.matrix().add(&s_inv.matrix().scale(T::of(n as f64)));
            let prec = SpdMatrix::from_matrix(prec)?;
            let mut rhs = b_inv.matrix().matvec(self.model.base.location.mean());
            for (r, v) in rhs.iter_mut().zip(s_inv.matrix().matvec(&sum)) {
                *r += v;
            }
            let mean = prec.solve(&rhs);
            let post = prec.inverse()?;
            let mut t = post.sample_centered(rng);
            for (v, m) in t.iter_mut().zip(mean) {
                *v += m;
            }
            t
        };
        self.atoms[h].theta = theta;
        // B | θ
        if let LocationPrior::Hierarchical { mean, b0, nu_b } = &self.model.base.location {
            let diff: Vec<T> = self.atoms[h].theta.iter().zip(mean).map(|(&a, &b)| a - b).collect();
            let mut s = b0.matrix().clone();
            for i in 0..d {
                for j in 0..d {
                    s[(i, j)] += diff[i] * diff[j];
                }
            }
            self.atoms[h].b = sample_iw(&IwParams { scale: SpdMatrix::from_matrix(s)?, nu: *nu_b + T::one() }, rng)?;
        }
        // scatter about θ
        let mut scatter = Matrix::zeros(d, d);
        {
            let th = &self.atoms[h].theta;
            for &i in members {
                let x = data.row(i);
                for a in 0..d {
                    let da = x[a] - th[a];
                    for b in 0..=a {
                        scatter[(a, b)] += da * (x[b] - th[b]);
                    }
                }
            }
            for a in 0..d {
                for b in 0..a {
                    scatter[(b, a)] = scatter[(a, b)];
                }
            }
        }
        let base = self.model.base.covariance.clone();
        match base {
            CovariancePrior::InverseWishart(p) => {
                let scale = SpdMatrix::from_matrix(p.scale.matrix().add(&scatter))?;
                self.atoms[h].sigma = sample_iw(&IwParams { scale, nu: p.nu + T::of(n as f64) }, rng)?;
            }
            CovariancePrior::Factor(p) => self.update_factor(h, n, &scatter, p.a, p.b, rng, counting)?,
            CovariancePrior::Mgp(p) => {
                self.update_mgp_shrinkage(h, p.a1, p.a2, rng);
                self.update_factor(h, n, &scatter, p.a, p.b, rng, counting)?;
            }
            CovariancePrior::Spectral(p) => self.update_spectral(h, n, &scatter, &p, rng, counting)?,
        }
        Ok(())
    }

    /// Loadings and log residual precisions, one coordinate at a time.
    #[allow(clippy::too_many_arguments)]
    fn update_factor<R: Rng + ?Sized>(&mut self, h: usize, n: usize, scatter: &Matrix<T>, a: T, b: T, rng: &mut R, counting: bool) -> Result<()> {
        let atom = &mut self.atoms[h];
        let (loadings, log_prec, shrink) = match &mut atom.cov {
            CovState::Factor { loadings, log_prec } => (loadings, log_prec, None),
            CovState::Mgp { loadings, log_prec, phi, delta } => {
                let tau = cumulative_tau(delta);
                let mut s = phi.clone();
                for j in 0..s.rows() {
                    for k in 0..s.cols() {
                        s[(j, k)] *= tau[k];
                    }
                }
                (loadings, log_prec, Some(s))
            }
            _ => unreachable!("factor update on a non-factor atom"),
        };
        let half = T::of(0.5);
        let mut ll = cluster_loglik(&atom.sigma, n, scatter)?;
        let (d, r) = (loadings.rows(), loadings.cols());
        for j in 0..d {
            for k in 0..r {
                let old = loadings[(j, k)];
                let new = old + T::of(self.tune_load.step) * T::sample_std_normal(rng);
                let prec = shrink.as_ref().map_or(T::one(), |s| s[(j, k)]);
                loadings[(j, k)] = new;
                let ok = match factor_sigma(loadings, &exp_neg(log_prec)) {
                    Ok(sig) => {
                        let ll_new = cluster_loglik(&sig, n, scatter)?;
                        let lr = ll_new - ll - half * prec * (new * new - old * old);
                        if accept(lr, rng) {
                            ll = ll_new;
                            atom.sigma = sig;
                            true
                        } else {
                            false
                        }
                    }
                    Err(_) => false,
                };
                if !ok {
                    loadings[(j, k)] = old;
                }
                self.tune_load.record(ok, counting);
            }
        }
        for j in 0..d {
            let old = log_prec[j];
            let new = old + T::of(self.tune_prec.step) * T::sample_std_normal(rng);
            log_prec[j] = new;
            let ok = match factor_sigma(loadings, &exp_neg(log_prec)) {
                Ok(sig) => {
                    let ll_new = cluster_loglik(&sig, n, scatter)?;
                    let lr = ll_new - ll + log_prec_prior(new, a, b) - log_prec_prior(old, a, b);
                    if accept(lr, rng) {
                        ll = ll_new;
                        atom.sigma = sig;
                        true
                    } else {
                        false
                    }
                }
                Err(_) => false,
            };
            if !ok {
                log_prec[j] = old;
            }
            self.tune_prec.record(ok, counting);
        }
        Ok(())
    }

    /// φ_jk and δ_k from their gamma full conditionals (local shape 3/2, rate 3/2).
    fn update_mgp_shrinkage<R: Rng + ?Sized>(&mut self, h: usize, a1: T, a2: T, rng: &mut R) {
        let CovState::Mgp { loadings, phi, delta, .. } = &mut self.atoms[h].cov else {
            unreachable!("shrinkage update on a non-MGP atom")
        };
        let (d, r) = (loadings.rows(), loadings.cols());
        let tiny = T::min_positive_value();
        let half = T::of(0.5);
        let nu = T::of(3.0);
        let tau = cumulative_tau(delta);
        for j in 0..d {
            for k in 0..r {
                let g = loadings[(j, k)];
                let rate = half * (nu + tau[k] * g * g);
                phi[(j, k)] = T::sample_gamma(half * (nu + T::one()), T::one() / rate, rng).max(tiny);
            }
        }
        for m in 0..r {
            let tau = cumulative_tau(delta);
            let mut rate = T::zero();
            for l in m..r {
                let colsum: T = (0..d).map(|j| phi[(j, l)] * loadings[(j, l)] * loadings[(j, l)]).sum();
                rate += tau[l] / delta[m] * colsum;
            }
            let shape = if m == 0 { a1 } else { a2 } + half * T::of((d * (r - m)) as f64);
            delta[m] = T::sample_gamma(shape, T::one() / (T::one() + half * rate), rng).max(tiny);
        }
    }

    fn update_spectral<R: Rng + ?Sized>(
        &mut self,
        h: usize,
        n: usize,
        scatter: &Matrix<T>,
        p: &crate::priors::SpectralParams<T>,
        rng: &mut R,
        counting: bool,
    ) -> Result<()> {
        let d = p.dim;
        let atom = &mut self.atoms[h];
        let CovState::Spectral { log_prec, angles } = &mut atom.cov else {
            unreachable!("spectral update on a non-spectral atom")
        };
        let mut ll = cluster_loglik(&atom.sigma, n, scatter)?;
        let rotation = rotation_from_angles(d, angles);
        for k in 0..d {
            let old = log_prec[k];
            let new = old + T::of(self.tune_prec.step) * T::sample_std_normal(rng);
            log_prec[k] = new;
            let ok = match spectral_sigma(&rotation, &exp_neg(log_prec)) {
                Ok(sig) => {
                    let ll_new = cluster_loglik(&sig, n, scatter)?;
                    let lr = ll_new - ll + log_prec_prior(new, p.a, p.b) - log_prec_prior(old, p.a, p.b);
                    if accept(lr, rng) {
                        ll = ll_new;
                        atom.sigma = sig;
                        true
                    } else {
                        false
                    }
                }
                Err(_) => false,
            };
            if !ok {
                log_prec[k] = old;
            }
            self.tune_prec.record(ok, counting);
        }
        let half_pi = T::FRAC_PI_2();
        let is_atom = |w: T| (p.beta_0 > T::zero() && w == T::zero()) || (p.beta_pi2 > T::zero() && w == half_pi);
        for k in 0..angles.len() {
            let old = angles[k];
            // independence move from the prior, or a wrapped random walk on the
            // continuous part; the walk holds still at an atom
            let independence = T::sample_open01(rng) < T::of(0.5);
            let (new, log_prior_ratio) = if independence {
                (sample_rotator_angle(p, rng), T::zero())
            } else if is_atom(old) {
                continue;
            } else {
                let w = wrap_angle(old + T::of(self.tune_angle.step) * T::sample_std_normal(rng));
                (w, log_angle_continuous(p.kappa_rot, w) - log_angle_continuous(p.kappa_rot, old))
            };
            angles[k] = new;
            let rot = rotation_from_angles(d, angles);
            let ok = match spectral_sigma(&rot, &exp_neg(log_prec)) {
                Ok(sig) => {
                    let ll_new = cluster_loglik(&sig, n, scatter)?;
                    if accept(ll_new - ll + log_prior_ratio, rng) {
                        ll = ll_new;
                        atom.sigma = sig;
                        true
                    } else {
                        false
                    }
                }
                Err(_) => false,
            };
            if !ok {
                angles[k] = old;
            }
            if !independence {
                self.tune_angle.record(ok, counting);
            }
        }
        Ok(())
    }

    fn acceptance(&self) -> AcceptanceRates {
        AcceptanceRates { loadings: self.tune_load.rate(), log_precision: self.tune_prec.rate(), angles: self.tune_angle.rate() }
    }

    fn reset_tuning_windows(&mut self) {
        self.tune_load.reset_window();
        self.tune_prec.reset_window();
        self.tune_angle.reset_window();
    }
}

fn check_data<T: Real>(data: &Matrix<T>, dim: usize) -> Result<()> {
    if data.rows() == 0 {
        return Err(input("no data points"));
    }
    if data.cols() != dim {
        return Err(input(format!("data has {} columns, model dimension is {dim}", data.cols())));
    }
    if let Some(i) = data.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(input(format!("non-finite value in row {}, column {}", i / dim, i % dim)));
    }
    Ok(())
}

/// Per-coordinate location and scale used for standardization.
fn standardization<T: Real>(data: &Matrix<T>) -> (Vec<T>, Vec<T>) {
    let (n, d) = (data.rows(), data.cols());
    let nt = T::of(n as f64);
    let mut loc = vec![T::zero(); d];
    let mut scale = vec![T::one(); d];
    for j in 0..d {
        let m = (0..n).map(|i| data[(i, j)]).sum::<T>() / nt;
        let v = (0..n).map(|i| (data[(i, j)] - m).powi(2)).sum::<T>() / nt;
        loc[j] = m;
        if v > T::zero() {
            scale[j] = v.sqrt();
        }
    }
    (loc, scale)
}

fn unstandardize<T: Real>(c: &GaussianComponent<T>, loc: &[T], scale: &[T]) -> Result<GaussianComponent<T>> {
    let d = loc.len();
    let mean = c.mean().iter().zip(loc).zip(scale).map(|((&m, &l), &s)| l + s * m).collect();
    let mut cov = c.cov().matrix().clone();
    for i in 0..d {
        for j in 0..d {
            cov[(i, j)] *= scale[i] * scale[j];
        }
    }
    GaussianComponent::new(mean, SpdMatrix::from_matrix(cov)?)
}

/// Run one chain; the chain's stream is `stream(cfg.seed, 0)`.
pub fn fit<T: Real>(data: &Matrix<T>, model: &DpMixtureModel<T>, cfg: &McmcConfig) -> Result<PosteriorDraws<T>> {
    fit_chain(data, model, cfg, 0)
}

fn fit_chain<T: Real>(data: &Matrix<T>, model: &DpMixtureModel<T>, cfg: &McmcConfig, chain: u64) -> Result<PosteriorDraws<T>> {
    model.validate()?;
    cfg.validate()?;
    check_data(data, model.dim())?;
    let (loc, scale) = if cfg.standardize {
        standardization(data)
    } else {
        (vec![T::zero(); data.cols()], vec![T::one(); data.cols()])
    };
    let work = if cfg.standardize {
        let (n, d) = (data.rows(), data.cols());
        let v = (0..n * d).map(|k| (data.as_slice()[k] - loc[k % d]) / scale[k % d]).collect();
        Matrix::from_vec(n, d, v)
    } else {
        data.clone()
    };
    let mut rng = stream(cfg.seed, chain);
    let mut state = GibbsState::from_prior(model, &mut rng)?;
    let mut out = PosteriorDraws {
        snapshots: Vec::with_capacity(cfg.n_snapshots()),
        remainder_atoms: Vec::with_capacity(cfg.n_snapshots()),
        occupied: Vec::with_capacity(cfg.n_snapshots()),
        acceptance: AcceptanceRates::default(),
    };
    for it in 0..cfg.iterations {
        let burning = it < cfg.burn_in;
        let adapt = burning && it % ADAPT_EVERY == ADAPT_EVERY - 1;
        state.sweep(&work, &mut rng, adapt, !burning)?;
        if it + 1 == cfg.burn_in {
            state.reset_tuning_windows();
        }
        if !burning && (it - cfg.burn_in + 1).is_multiple_of(cfg.thin) {
            debug_assert_eq!(state.counts().iter().sum::<usize>(), data.rows());
            let weights = state.weights();
            let comps = state
                .atoms
                .iter()
                .map(|a| unstandardize(&GaussianComponent::new(a.theta.clone(), a.sigma.clone())?, &loc, &scale))
                .collect::<Result<Vec<_>>>()?;
            out.snapshots.push(MixtureDensity::new(weights, comps)?);
            let (t, s) = sample_base(&model.base, &mut rng)?;
            out.remainder_atoms.push(unstandardize(&GaussianComponent::new(t, s)?, &loc, &scale)?);
            out.occupied.push(state.counts().iter().filter(|&&c| c > 0).count());
        }
    }
    out.acceptance = state.acceptance();
    Ok(out)
}

/// Independent chains on streams 0..chains, run concurrently and merged in
/// chain order.
pub fn fit_chains<T: Real>(data: &Matrix<T>, model: &DpMixtureModel<T>, cfg: &McmcConfig, chains: usize) -> Result<PosteriorDraws<T>> {
    if chains < 1 {
        return Err(param("need at least one chain"));
    }
    let runs: Vec<Result<PosteriorDraws<T>>> = (0..chains as u64).into_par_iter().map(|c| fit_chain(data, model, cfg, c)).collect();
    let mut merged = PosteriorDraws { snapshots: Vec::new(), remainder_atoms: Vec::new(), occupied: Vec::new(), acceptance: AcceptanceRates::default() };
    let mut rates: Vec<AcceptanceRates> = Vec::new();
    for r in runs {
        let r = r?;
        merged.snapshots.extend(r.snapshots);
        merged.remainder_atoms.extend(r.remainder_atoms);
        merged.occupied.extend(r.occupied);
        rates.push(r.acceptance);
    }
    let avg = |f: fn(&AcceptanceRates) -> Option<f64>| {
        let v: Vec<f64> = rates.iter().filter_map(f).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    merged.acceptance = AcceptanceRates { loadings: avg(|a| a.loadings), log_precision: avg(|a| a.log_precision), angles: avg(|a| a.angles) };
    Ok(merged)
}

/// Posterior mean of the density at x, each snapshot's remainder mass placed
/// on its fresh base atom.
pub fn predictive_density<T: Real>(draws: &PosteriorDraws<T>, x: &[T]) -> Result<T> {
    if draws.is_empty() {
        return Err(input("no posterior snapshots"));
    }
    let mut total = T::zero();
    for (k, f) in draws.snapshots.iter().enumerate() {
        let mut v = f.eval(x)?;
        let rem = f.remainder();
        if rem > T::zero() {
            if let Some(atom) = draws.remainder_atoms.get(k) {
                v += rem * atom.density(x);
            }
        }
        total += v;
    }
    Ok(total / T::of(draws.len() as f64))
}

/// Hellinger distance from f0 to every snapshot.
pub fn posterior_distance_trace<T: Real, R: Rng + ?Sized>(
    draws: &PosteriorDraws<T>,
    f0: &MixtureDensity<T>,
    budget: usize,
    rng: &mut R,
) -> Result<Vec<DistanceEstimate>> {
    draws.snapshots.iter().map(|f| hellinger(f0, f, budget, rng)).collect()
}
