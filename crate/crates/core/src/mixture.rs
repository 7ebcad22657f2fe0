//! Gaussian components, truncated mixtures and stick-breaking weights.

use rand::Rng;

use crate::error::{input, param, Result};
use crate::linalg::solve_lower;
use crate::real::Real;
use crate::spd::SpdMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent<T> {
    mean: Vec<T>,
    cov: SpdMatrix<T>,
}

impl<T: Real> GaussianComponent<T> {
    pub fn new(mean: Vec<T>, cov: SpdMatrix<T>) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(input(format!("mean has dim {}, covariance {}", mean.len(), cov.dim())));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(input("non-finite mean"));
        }
        Ok(GaussianComponent { mean, cov })
    }

    pub fn standard(dim: usize) -> Self {
        GaussianComponent { mean: vec![T::zero(); dim], cov: SpdMatrix::identity(dim) }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn cov(&self) -> &SpdMatrix<T> {
        &self.cov
    }

    /// log φ_Σ(x − θ); `x` must have the component's dimension.
    pub fn log_density(&self, x: &[T]) -> T {
        debug_assert_eq!(x.len(), self.dim());
        let diff: Vec<T> = x.iter().zip(&self.mean).map(|(&a, &b)| a - b).collect();
        let z = solve_lower(self.cov.cholesky(), &diff);
        let q: T = z.iter().map(|&v| v * v).sum();
        let d = T::of(self.dim() as f64);
        let half = T::of(0.5);
        -half * (d * T::TAU().ln() + self.cov.log_det() + q)
    }

    pub fn density(&self, x: &[T]) -> T {
        self.log_density(x).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        let mut z = self.cov.sample_centered(rng);
        for (v, &m) in z.iter_mut().zip(&self.mean) {
            *v += m;
        }
        z
    }

    pub fn cast<U: Real>(&self) -> Result<GaussianComponent<U>> {
        GaussianComponent::new(self.mean.iter().map(|&v| U::of(v.to_f64().unwrap_or(f64::NAN))).collect(), self.cov.cast()?)
    }
}

/// φ_Σ(x − θ).
pub fn eval_gaussian<T: Real>(x: &[T], c: &GaussianComponent<T>) -> Result<T> {
    if x.len() != c.dim() {
        return Err(input(format!("point has dim {}, component {}", x.len(), c.dim())));
    }
    Ok(c.density(x))
}

/// Truncated mixture Σ_h π_h φ_{Σ_h}(x − θ_h) with explicit leftover mass.
///
/// The remainder `1 − Σ π_h` is carried along but never enters evaluation,
/// so `eval` integrates to `total_mass()` rather than 1.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureDensity<T> {
    weights: Vec<T>,
    components: Vec<GaussianComponent<T>>,
    remainder: T,
}

impl<T: Real> MixtureDensity<T> {
    /// Remainder is set to `1 − Σ weights` (clamped at 0).
    pub fn new(weights: Vec<T>, components: Vec<GaussianComponent<T>>) -> Result<Self> {
        let total: T = weights.iter().copied().sum();
        let remainder = (T::one() - total).max(T::zero());
        Self::with_remainder(weights, components, remainder)
    }

    pub fn with_remainder(weights: Vec<T>, components: Vec<GaussianComponent<T>>, remainder: T) -> Result<Self> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(input(format!("{} weights for {} components", weights.len(), components.len())));
        }
        let d = components[0].dim();
        if components.iter().any(|c| c.dim() != d) {
            return Err(input("components have differing dimensions"));
        }
        if weights.iter().any(|&w| !(w >= T::zero()) || !w.is_finite()) {
            return Err(input("weights must be finite and nonnegative"));
        }
        let total: T = weights.iter().copied().sum();
        if total > T::one() + T::tol() {
            return Err(input(format!("weights sum to {total} > 1")));
        }
        if !(remainder >= T::zero()) || total + remainder > T::one() + T::tol() {
            return Err(input(format!("invalid remainder {remainder}")));
        }
        Ok(MixtureDensity { weights, components, remainder })
    }

    pub fn single(c: GaussianComponent<T>) -> Self {
        MixtureDensity { weights: vec![T::one()], components: vec![c], remainder: T::zero() }
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn components(&self) -> &[GaussianComponent<T>] {
        &self.components
    }

    pub fn remainder(&self) -> T {
        self.remainder
    }

    /// Σ π_h, the integral of `eval`.
    pub fn total_mass(&self) -> T {
        self.weights.iter().copied().sum()
    }

    pub(crate) fn eval_unchecked(&self, x: &[T]) -> T {
        self.weights
            .iter()
            .zip(&self.components)
            .filter(|(w, _)| **w > T::zero())
            .map(|(&w, c)| w * c.density(x))
            .sum()
    }

    /// log of `eval`, computed by log-sum-exp so far tails stay finite.
    pub(crate) fn log_eval_unchecked(&self, x: &[T]) -> T {
        let mut terms: Vec<T> = Vec::with_capacity(self.len());
        for (&w, c) in self.weights.iter().zip(&self.components) {
            if w > T::zero() {
                terms.push(w.ln() + c.log_density(x));
            }
        }
        let m = terms.iter().copied().fold(T::neg_infinity(), T::max);
        if !m.is_finite() {
            return m;
        }
        m + terms.iter().map(|&t| (t - m).exp()).sum::<T>().ln()
    }

    pub fn eval(&self, x: &[T]) -> Result<T> {
        self.check_dim(x)?;
        Ok(self.eval_unchecked(x))
    }

    pub fn log_eval(&self, x: &[T]) -> Result<T> {
        self.check_dim(x)?;
        Ok(self.log_eval_unchecked(x))
    }

    fn check_dim(&self, x: &[T]) -> Result<()> {
        if x.len() == self.dim() {
            Ok(())
        } else {
            Err(input(format!("point has dim {}, mixture {}", x.len(), self.dim())))
        }
    }

    /// Index drawn proportionally to the listed weights.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = self.total_mass();
        let u = T::sample_open01(rng) * total;
        let mut acc = T::zero();
        for (h, &w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return h;
            }
        }
        self.weights.iter().rposition(|&w| w > T::zero()).unwrap_or(0)
    }

    /// Draw from the normalized mixture `eval / total_mass`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        let h = self.sample_index(rng);
        self.components[h].sample(rng)
    }

    /// β·f + (1−β)·g as one mixture.
    pub fn merge(f: &Self, g: &Self, beta: T) -> Result<Self> {
        if !(beta >= T::zero() && beta <= T::one()) {
            return Err(param(format!("merge weight {beta} outside [0,1]")));
        }
        if f.dim() != g.dim() {
            return Err(input("merging mixtures of different dimension"));
        }
        let mut weights: Vec<T> = f.weights.iter().map(|&w| w * beta).collect();
        weights.extend(g.weights.iter().map(|&w| w * (T::one() - beta)));
        let mut components = f.components.clone();
        components.extend(g.components.iter().cloned());
        let remainder = beta * f.remainder + (T::one() - beta) * g.remainder;
        Self::with_remainder(weights, components, remainder)
    }

    pub fn cast<U: Real>(&self) -> Result<MixtureDensity<U>> {
        let conv = |v: T| U::of(v.to_f64().unwrap_or(f64::NAN));
        MixtureDensity::with_remainder(
            self.weights.iter().map(|&w| conv(w)).collect(),
            self.components.iter().map(|c| c.cast()).collect::<Result<_>>()?,
            conv(self.remainder),
        )
    }
}

/// Σ_h π_h φ_{Σ_h}(x − θ_h); remainder mass is ignored.
pub fn eval_mixture<T: Real>(x: &[T], f: &MixtureDensity<T>) -> Result<T> {
    f.eval(x)
}

/// Stick proportions V_h with weights π_h = V_h ∏_{k<h}(1 − V_k).
#[derive(Debug, Clone, PartialEq)]
pub struct StickBreaking<T> {
    sticks: Vec<T>,
    alpha: T,
}

impl<T: Real> StickBreaking<T> {
    /// Sticks must lie in (0, 1]; a final stick of 1 closes the truncation.
    pub fn new(sticks: Vec<T>, alpha: T) -> Result<Self> {
        if !(alpha > T::zero()) {
            return Err(param(format!("alpha must be positive, got {alpha}")));
        }
        if sticks.is_empty() {
            return Err(param("truncation H must be at least 1"));
        }
        if sticks.iter().any(|&v| !(v > T::zero() && v <= T::one())) {
            return Err(param("stick proportions must lie in (0, 1]"));
        }
        Ok(StickBreaking { sticks, alpha })
    }

    /// V_h ~ Beta(1, α) iid, by inversion: V = 1 − U^{1/α}.
    pub fn sample<R: Rng + ?Sized>(alpha: T, truncation: usize, rng: &mut R) -> Result<Self> {
        if !(alpha > T::zero()) {
            return Err(param(format!("alpha must be positive, got {alpha}")));
        }
        if truncation < 1 {
            return Err(param("truncation H must be at least 1"));
        }
        let sticks = (0..truncation)
            .map(|_| {
                let u = T::sample_open01(rng);
                (-(u.ln() / alpha).exp_m1()).max(T::min_positive_value())
            })
            .collect();
        Ok(StickBreaking { sticks, alpha })
    }

    pub fn sticks(&self) -> &[T] {
        &self.sticks
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn truncation(&self) -> usize {
        self.sticks.len()
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

    /// ∏_{h≤H}(1 − V_h).
    pub fn remainder(&self) -> T {
        self.sticks.iter().fold(T::one(), |acc, &v| acc * (T::one() - v))
    }
}
