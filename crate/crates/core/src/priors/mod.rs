//! Base measure P*: location priors, the four covariance families, and
//! the hyperparameter constraints that make the mixture prior consistent.

mod config;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{input, param, Error, Result};
use crate::linalg::{invert_lower, Matrix};
use crate::mixture::{GaussianComponent, MixtureDensity, StickBreaking};
use crate::real::Real;
use crate::spd::SpdMatrix;

pub use config::{LocationSection, PriorConfig, PriorSection};

/// Prior on component means.
#[derive(Debug, Clone, PartialEq)]
pub enum LocationPrior<T> {
    /// θ ~ N(m, B) with B fixed.
    Fixed { mean: Vec<T>, cov: SpdMatrix<T> },
    /// B ~ IW(B₀, ν_B), θ | B ~ N(m, B). Marginally θ − m is multivariate
    /// Student-t with ν_B − d + 1 degrees of freedom.
    Hierarchical { mean: Vec<T>, b0: SpdMatrix<T>, nu_b: T },
}

impl<T: Real> LocationPrior<T> {
    pub fn fixed(mean: Vec<T>, cov: SpdMatrix<T>) -> Result<Self> {
        let p = LocationPrior::Fixed { mean, cov };
        p.validate()?;
        Ok(p)
    }

    pub fn hierarchical(mean: Vec<T>, b0: SpdMatrix<T>, nu_b: T) -> Result<Self> {
        let p = LocationPrior::Hierarchical { mean, b0, nu_b };
        p.validate()?;
        Ok(p)
    }

    pub fn standard(dim: usize) -> Self {
        LocationPrior::Fixed { mean: vec![T::zero(); dim], cov: SpdMatrix::identity(dim) }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LocationPrior::Fixed { mean, cov } => {
                if mean.len() != cov.dim() {
                    return Err(input("location mean and covariance dimensions differ"));
                }
            }
            LocationPrior::Hierarchical { mean, b0, nu_b } => {
                if mean.len() != b0.dim() {
                    return Err(input("location mean and B0 dimensions differ"));
                }
                let dm1 = T::of(mean.len() as f64 - 1.0);
                if !(*nu_b > dm1) {
                    return Err(param(format!("nu_B = {nu_b} must exceed d - 1 = {dm1}")));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.mean().len()
    }

    pub fn mean(&self) -> &[T] {
        match self {
            LocationPrior::Fixed { mean, .. } | LocationPrior::Hierarchical { mean, .. } => mean,
        }
    }

    /// Degrees of freedom of the Student-t marginal, `None` for the Gaussian case.
    pub fn marginal_t_dof(&self) -> Option<T> {
        match self {
            LocationPrior::Fixed { .. } => None,
            LocationPrior::Hierarchical { nu_b, .. } => Some(*nu_b - T::of(self.dim() as f64) + T::one()),
        }
    }

    /// Draw θ together with the covariance B it was drawn from.
    pub fn sample_with_scale<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Vec<T>, SpdMatrix<T>)> {
        let b = match self {
            LocationPrior::Fixed { cov, .. } => cov.clone(),
            LocationPrior::Hierarchical { b0, nu_b, .. } => sample_iw(&IwParams { scale: b0.clone(), nu: *nu_b }, rng)?,
        };
        let mut theta = b.sample_centered(rng);
        for (t, &m) in theta.iter_mut().zip(self.mean()) {
            *t += m;
        }
        Ok((theta, b))
    }
}

pub fn sample_location<T: Real, R: Rng + ?Sized>(p: &LocationPrior<T>, rng: &mut R) -> Result<Vec<T>> {
    p.validate()?;
    Ok(p.sample_with_scale(rng)?.0)
}

/// Inverse-Wishart IW(Σ₀, ν): Σ⁻¹ ~ Wishart(ν, Σ₀⁻¹), so E[Σ⁻¹] = ν Σ₀⁻¹.
#[derive(Debug, Clone, PartialEq)]
pub struct IwParams<T> {
    pub scale: SpdMatrix<T>,
    pub nu: T,
}

impl<T: Real> IwParams<T> {
    pub fn new(scale: SpdMatrix<T>, nu: T) -> Result<Self> {
        let p = IwParams { scale, nu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let dm1 = T::of(self.scale.dim() as f64 - 1.0);
        if !(self.nu > dm1) || !self.nu.is_finite() {
            return Err(param(format!("inverse-Wishart dof {} must exceed d - 1 = {dm1}", self.nu)));
        }
        Ok(())
    }
}

/// Σ = ΓΓᵀ + Ω with d×r_f standard normal loadings and σ_j⁻² ~ Ga(a, rate b).
#[derive(Debug, Clone, PartialEq)]
pub struct FactorParams<T> {
    pub dim: usize,
    pub rank: usize,
    pub a: T,
    pub b: T,
}

impl<T: Real> FactorParams<T> {
    pub fn validate(&self) -> Result<()> {
        if self.rank < 1 || self.rank >= self.dim {
            return Err(param(format!("factor rank {} must satisfy 1 <= r < d = {}", self.rank, self.dim)));
        }
        check_gamma(self.a, self.b)
    }
}

/// Factor model with multiplicative gamma process shrinkage on the loadings.
#[derive(Debug, Clone, PartialEq)]
pub struct MgpParams<T> {
    pub dim: usize,
    pub rank: usize,
    /// Shape of δ₁ ~ Ga(a₁, 1).
    pub a1: T,
    /// Shape of δ_l ~ Ga(a₂, 1), l ≥ 2.
    pub a2: T,
    /// Residual precision shape and rate.
    pub a: T,
    pub b: T,
}

impl<T: Real> MgpParams<T> {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 || self.rank < 1 {
            return Err(param("MGP needs d >= 1 and at least one factor"));
        }
        if !(self.a1 > T::zero() && self.a2 > T::zero()) {
            return Err(param("MGP shapes a1, a2 must be positive"));
        }
        check_gamma(self.a, self.b)
    }
}

/// Σ = OΛOᵀ with λ_i⁻¹ ~ Ga(a, rate b) and O a product of Givens rotations.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralParams<T> {
    pub dim: usize,
    pub a: T,
    pub b: T,
    /// Weight of the atom at π/2.
    pub beta_pi2: T,
    /// Weight of the atom at 0 among the remaining mass.
    pub beta_0: T,
    /// Concentration of the continuous part ∝ exp(κ cos²ω).
    pub kappa_rot: T,
}

impl<T: Real> SpectralParams<T> {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 {
            return Err(param("spectral prior needs d >= 1"));
        }
        let unit = |v: T| v >= T::zero() && v <= T::one();
        if !unit(self.beta_pi2) || !unit(self.beta_0) {
            return Err(param("angle atom weights must lie in [0, 1]"));
        }
        if !(self.kappa_rot >= T::zero()) || !self.kappa_rot.is_finite() {
            return Err(param("kappa_rot must be finite and nonnegative"));
        }
        check_gamma(self.a, self.b)
    }
}

fn check_gamma<T: Real>(a: T, b: T) -> Result<()> {
    if !(a > T::zero() && b > T::zero()) || !a.is_finite() || !b.is_finite() {
        return Err(param(format!("gamma shape {a} and rate {b} must be positive")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    InverseWishart,
    Factor,
    Mgp,
    Spectral,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::InverseWishart => "iw",
            Family::Factor => "factor",
            Family::Mgp => "mgp",
            Family::Spectral => "spectral",
        })
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "iw" | "inverse_wishart" | "inverse-wishart" => Ok(Family::InverseWishart),
            "factor" => Ok(Family::Factor),
            "mgp" => Ok(Family::Mgp),
            "spectral" => Ok(Family::Spectral),
            other => Err(Error::Config(format!("unknown prior family `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CovariancePrior<T> {
    InverseWishart(IwParams<T>),
    Factor(FactorParams<T>),
    Mgp(MgpParams<T>),
    Spectral(SpectralParams<T>),
}

impl<T: Real> CovariancePrior<T> {
    pub fn family(&self) -> Family {
        match self {
            CovariancePrior::InverseWishart(_) => Family::InverseWishart,
            CovariancePrior::Factor(_) => Family::Factor,
            CovariancePrior::Mgp(_) => Family::Mgp,
            CovariancePrior::Spectral(_) => Family::Spectral,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            CovariancePrior::InverseWishart(p) => p.scale.dim(),
            CovariancePrior::Factor(p) => p.dim,
            CovariancePrior::Mgp(p) => p.dim,
            CovariancePrior::Spectral(p) => p.dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CovariancePrior::InverseWishart(p) => p.validate(),
            CovariancePrior::Factor(p) => p.validate(),
            CovariancePrior::Mgp(p) => p.validate(),
            CovariancePrior::Spectral(p) => p.validate(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SpdMatrix<T>> {
        match self {
            CovariancePrior::InverseWishart(p) => sample_iw(p, rng),
            CovariancePrior::Factor(p) => sample_factor(p, rng),
            CovariancePrior::Mgp(p) => sample_mgp(p, rng),
            CovariancePrior::Spectral(p) => sample_spectral(p, rng),
        }
    }
}

/// P*: θ and Σ independent.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseMeasureSpec<T> {
    pub location: LocationPrior<T>,
    pub covariance: CovariancePrior<T>,
}

impl<T: Real> BaseMeasureSpec<T> {
    pub fn new(location: LocationPrior<T>, covariance: CovariancePrior<T>) -> Result<Self> {
        let s = BaseMeasureSpec { location, covariance };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.location.validate()?;
        self.covariance.validate()?;
        if self.location.dim() != self.covariance.dim() {
            return Err(input(format!(
                "location dim {} differs from covariance dim {}",
                self.location.dim(),
                self.covariance.dim()
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.location.dim()
    }
}

/// Bartlett decomposition of the Wishart precision, inverted by triangular solves.
pub fn sample_iw<T: Real, R: Rng + ?Sized>(p: &IwParams<T>, rng: &mut R) -> Result<SpdMatrix<T>> {
    p.validate()?;
    let d = p.scale.dim();
    let lower = p.scale.inverse()?.cholesky().clone();
    let mut a = Matrix::zeros(d, d);
    for i in 0..d {
        a[(i, i)] = T::sample_chi2(p.nu - T::of(i as f64), rng).sqrt();
        for j in 0..i {
            a[(i, j)] = T::sample_std_normal(rng);
        }
    }
    let t = lower.matmul(&a);
    let u = invert_lower(&t);
    SpdMatrix::from_matrix(u.gram_cols())
}

/// A factor-model draw with its ingredients kept for inspection.
#[derive(Debug, Clone)]
pub struct FactorDraw<T> {
    pub sigma: SpdMatrix<T>,
    /// d × r_f loadings Γ.
    pub loadings: Matrix<T>,
    /// Diagonal of Ω.
    pub omega: Vec<T>,
}

impl<T: Real> FactorDraw<T> {
    /// ΓΓᵀ.
    pub fn loading_gram(&self) -> Matrix<T> {
        self.loadings.gram_rows()
    }
}

pub(crate) fn factor_sigma<T: Real>(loadings: &Matrix<T>, omega: &[T]) -> Result<SpdMatrix<T>> {
    let mut s = loadings.gram_rows();
    for (i, &w) in omega.iter().enumerate() {
        s[(i, i)] += w;
    }
    SpdMatrix::from_matrix(s)
}

pub fn sample_factor_draw<T: Real, R: Rng + ?Sized>(p: &FactorParams<T>, rng: &mut R) -> Result<FactorDraw<T>> {
    p.validate()?;
    let mut g = Matrix::zeros(p.dim, p.rank);
    for j in 0..p.dim {
        for h in 0..p.rank {
            g[(j, h)] = T::sample_std_normal(rng);
        }
    }
    let omega = sample_residuals(p.dim, p.a, p.b, rng);
    Ok(FactorDraw { sigma: factor_sigma(&g, &omega)?, loadings: g, omega })
}

fn sample_residuals<T: Real, R: Rng + ?Sized>(d: usize, a: T, b: T, rng: &mut R) -> Vec<T> {
    (0..d)
        .map(|_| {
            let prec = T::sample_gamma(a, T::one() / b, rng).max(T::min_positive_value());
            T::one() / prec
        })
        .collect()
}

pub fn sample_factor<T: Real, R: Rng + ?Sized>(p: &FactorParams<T>, rng: &mut R) -> Result<SpdMatrix<T>> {
    Ok(sample_factor_draw(p, rng)?.sigma)
}

#[derive(Debug, Clone)]
pub struct MgpDraw<T> {
    pub factor: FactorDraw<T>,
    /// Local precisions φ_jh.
    pub phi: Matrix<T>,
    /// δ₁, …, δ_r.
    pub delta: Vec<T>,
    /// Column precisions τ_h = ∏_{l≤h} δ_l.
    pub tau: Vec<T>,
}

pub(crate) fn cumulative_tau<T: Real>(delta: &[T]) -> Vec<T> {
    let mut acc = T::one();
    delta
        .iter()
        .map(|&d| {
            acc *= d;
            acc
        })
        .collect()
}

pub fn sample_mgp_draw<T: Real, R: Rng + ?Sized>(p: &MgpParams<T>, rng: &mut R) -> Result<MgpDraw<T>> {
    p.validate()?;
    let (d, r) = (p.dim, p.rank);
    let tiny = T::min_positive_value();
    let delta: Vec<T> = (0..r)
        .map(|h| T::sample_gamma(if h == 0 { p.a1 } else { p.a2 }, T::one(), rng).max(tiny))
        .collect();
    let tau = cumulative_tau(&delta);
    let local_scale = T::of(2.0 / 3.0);
    let mut phi = Matrix::zeros(d, r);
    let mut g = Matrix::zeros(d, r);
    for j in 0..d {
        for h in 0..r {
            let ph = T::sample_gamma(T::of(1.5), local_scale, rng).max(tiny);
            phi[(j, h)] = ph;
            g[(j, h)] = T::sample_std_normal(rng) / (ph * tau[h]).sqrt();
        }
    }
    let omega = sample_residuals(d, p.a, p.b, rng);
    let sigma = factor_sigma(&g, &omega)?;
    Ok(MgpDraw { factor: FactorDraw { sigma, loadings: g, omega }, phi, delta, tau })
}

pub fn sample_mgp<T: Real, R: Rng + ?Sized>(p: &MgpParams<T>, rng: &mut R) -> Result<SpdMatrix<T>> {
    Ok(sample_mgp_draw(p, rng)?.factor.sigma)
}

/// One rotator angle from the spike-and-slab prior on [−π/2, π/2].
///
/// The continuous part ∝ exp(κ cos²ω) is drawn by rejection: a uniform
/// proposal for κ ≤ 20 (acceptance at least about 1/√(πκ)), and for larger κ a
/// N(0, π²/(8κ)) proposal truncated to (−π/2, π/2), whose envelope is valid
/// because sin²ω ≥ 4ω²/π² on that interval.
pub fn sample_rotator_angle<T: Real, R: Rng + ?Sized>(p: &SpectralParams<T>, rng: &mut R) -> T {
    let half_pi = T::FRAC_PI_2();
    if p.beta_pi2 >= T::one() {
        return half_pi;
    }
    if p.beta_pi2 > T::zero() && T::sample_open01(rng) < p.beta_pi2 {
        return half_pi;
    }
    if p.beta_0 >= T::one() {
        return T::zero();
    }
    if p.beta_0 > T::zero() && T::sample_open01(rng) < p.beta_0 {
        return T::zero();
    }
    sample_angle_continuous(p.kappa_rot, rng)
}

pub(crate) fn sample_angle_continuous<T: Real, R: Rng + ?Sized>(kappa: T, rng: &mut R) -> T {
    let pi = T::PI();
    let half_pi = T::FRAC_PI_2();
    if kappa == T::zero() {
        return pi * (T::sample_open01(rng) - T::of(0.5));
    }
    if kappa <= T::of(20.0) {
        loop {
            let w = pi * (T::sample_open01(rng) - T::of(0.5));
            let c = w.cos();
            if T::sample_open01(rng) < (kappa * (c * c - T::one())).exp() {
                return w;
            }
        }
    }
    let sd = pi / (T::of(8.0) * kappa).sqrt();
    let four_over_pi2 = T::of(4.0) / (pi * pi);
    loop {
        let w = sd * T::sample_std_normal(rng);
        if w.abs() >= half_pi {
            continue;
        }
        let s = w.sin();
        let log_acc = -kappa * s * s + kappa * four_over_pi2 * w * w;
        if T::sample_open01(rng).ln() < log_acc {
            return w;
        }
    }
}

/// Unnormalized log density of the continuous angle part.
pub(crate) fn log_angle_continuous<T: Real>(kappa: T, w: T) -> T {
    let c = w.cos();
    kappa * c * c
}

/// O = ∏_{i<j} O_{i,j}(ω_{i,j}) in lexicographic (i, j) order.
///
/// `angles` has length d(d−1)/2 in that same order; O_{i,j}(ω) is the Givens
/// rotation acting on coordinates i and j.
pub fn rotation_from_angles<T: Real>(d: usize, angles: &[T]) -> Matrix<T> {
    assert_eq!(angles.len(), d * (d.saturating_sub(1)) / 2, "angle count");
    let mut o = Matrix::identity(d);
    let mut k = 0;
    for i in 0..d {
        for j in i + 1..d {
            let (s, c) = angles[k].sin_cos();
            k += 1;
            // o ← o · G(i, j)
            for r in 0..d {
                let oi = o[(r, i)];
                let oj = o[(r, j)];
                o[(r, i)] = c * oi + s * oj;
                o[(r, j)] = -s * oi + c * oj;
            }
        }
    }
    o
}

/// Σ = O diag(λ) Oᵀ.
pub fn spectral_sigma<T: Real>(rotation: &Matrix<T>, eigvals: &[T]) -> Result<SpdMatrix<T>> {
    let d = eigvals.len();
    let mut s = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..=i {
            let v = (0..d).map(|k| rotation[(i, k)] * eigvals[k] * rotation[(j, k)]).sum();
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    SpdMatrix::from_matrix(s)
}

#[derive(Debug, Clone)]
pub struct SpectralDraw<T> {
    pub sigma: SpdMatrix<T>,
    pub rotation: Matrix<T>,
    /// Diagonal of Λ in sampling order (not sorted).
    pub eigvals: Vec<T>,
    pub angles: Vec<T>,
}

pub fn sample_spectral_draw<T: Real, R: Rng + ?Sized>(p: &SpectralParams<T>, rng: &mut R) -> Result<SpectralDraw<T>> {
    p.validate()?;
    let d = p.dim;
    let eigvals: Vec<T> = (0..d)
        .map(|_| T::one() / T::sample_gamma(p.a, T::one() / p.b, rng).max(T::min_positive_value()))
        .collect();
    let angles: Vec<T> = (0..d * (d - 1) / 2).map(|_| sample_rotator_angle(p, rng)).collect();
    let rotation = rotation_from_angles(d, &angles);
    let sigma = spectral_sigma(&rotation, &eigvals)?;
    Ok(SpectralDraw { sigma, rotation, eigvals, angles })
}

pub fn sample_spectral<T: Real, R: Rng + ?Sized>(p: &SpectralParams<T>, rng: &mut R) -> Result<SpdMatrix<T>> {
    Ok(sample_spectral_draw(p, rng)?.sigma)
}

/// (θ, Σ) from P*, drawn independently.
pub fn sample_base<T: Real, R: Rng + ?Sized>(spec: &BaseMeasureSpec<T>, rng: &mut R) -> Result<(Vec<T>, SpdMatrix<T>)> {
    let theta = spec.location.sample_with_scale(rng)?.0;
    let sigma = spec.covariance.sample(rng)?;
    Ok((theta, sigma))
}

/// Truncated stick-breaking draw from DP(α P*) with H atoms; the
/// remainder ∏_{h≤H}(1 − V_h) is kept.
pub fn sample_prior_mixture<T: Real, R: Rng + ?Sized>(
    alpha: T,
    spec: &BaseMeasureSpec<T>,
    truncation: usize,
    rng: &mut R,
) -> Result<MixtureDensity<T>> {
    spec.validate()?;
    let sticks = StickBreaking::sample(alpha, truncation, rng)?;
    let mut comps = Vec::with_capacity(truncation);
    for _ in 0..truncation {
        let (theta, sigma) = sample_base(spec, rng)?;
        comps.push(GaussianComponent::new(theta, sigma)?);
    }
    MixtureDensity::with_remainder(sticks.weights(), comps, sticks.remainder())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintCheck {
    pub name: String,
    pub value: f64,
    /// The value must strictly exceed this.
    pub threshold: f64,
    pub margin: f64,
    pub pass: bool,
}

impl ConstraintCheck {
    fn new(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        ConstraintCheck { name: name.into(), value, threshold, margin: value - threshold, pass: value > threshold }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub checks: Vec<ConstraintCheck>,
    pub pass: bool,
}

/// Hyperparameter conditions under which the tail requirements for
/// posterior consistency hold.
///
/// - inverse-Wishart: ν > 2d(d−1) + d − 1
/// - factor, MGP, spectral: a > d(d−1)
/// - hierarchical location: the Student-t marginal's tail exponent
///   ν_B − d + 1 must exceed d + 1 (so that r > (d−1)/2); a fixed Gaussian
///   location prior has lighter than polynomial tails and always passes.
pub fn check_consistency_constraints<T: Real>(spec: &BaseMeasureSpec<T>) -> ConsistencyReport {
    let d = spec.dim() as f64;
    let f = |v: T| v.to_f64().unwrap_or(f64::NAN);
    let mut checks = Vec::new();
    match &spec.covariance {
        CovariancePrior::InverseWishart(p) => {
            checks.push(ConstraintCheck::new("iw dof nu > 2d(d-1)+d-1", f(p.nu), 2.0 * d * (d - 1.0) + d - 1.0));
        }
        CovariancePrior::Factor(p) => checks.push(ConstraintCheck::new("factor shape a > d(d-1)", f(p.a), d * (d - 1.0))),
        CovariancePrior::Mgp(p) => checks.push(ConstraintCheck::new("mgp shape a > d(d-1)", f(p.a), d * (d - 1.0))),
        CovariancePrior::Spectral(p) => {
            checks.push(ConstraintCheck::new("spectral shape a > d(d-1)", f(p.a), d * (d - 1.0)))
        }
    }
    match &spec.location {
        LocationPrior::Fixed { .. } => {
            checks.push(ConstraintCheck::new("location tail exponent > d+1 (gaussian)", f64::INFINITY, d + 1.0))
        }
        LocationPrior::Hierarchical { .. } => {
            let k = f(spec.location.marginal_t_dof().expect("hierarchical"));
            checks.push(ConstraintCheck::new("location tail exponent nu_B-d+1 > d+1", k, d + 1.0));
        }
    }
    let pass = checks.iter().all(|c| c.pass);
    ConsistencyReport { checks, pass }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn iw(d: usize, nu: f64) -> CovariancePrior<f64> {
        CovariancePrior::InverseWishart(IwParams { scale: SpdMatrix::identity(d), nu })
    }

    #[test]
    fn iw_boundary_is_error() {
        let p = IwParams { scale: SpdMatrix::<f64>::identity(2), nu: 1.0 };
        assert!(matches!(sample_iw(&p, &mut stream(1, 0)), Err(Error::Parameter(_))));
    }

    #[test]
    fn constraint_table() {
        let loc = |d| LocationPrior::<f64>::standard(d);
        let run = |cov: CovariancePrior<f64>| {
            let d = cov.dim();
            check_consistency_constraints(&BaseMeasureSpec::new(loc(d), cov).unwrap()).pass
        };
        assert!(run(iw(2, 8.0)));
        assert!(!run(iw(3, 10.0)));
        assert!(run(CovariancePrior::Factor(FactorParams { dim: 2, rank: 1, a: 5.0, b: 1.0 })));
        assert!(!run(CovariancePrior::Factor(FactorParams { dim: 3, rank: 1, a: 6.0, b: 1.0 })));
        let r = check_consistency_constraints(&BaseMeasureSpec::new(loc(3), iw(3, 10.0)).unwrap());
        assert_eq!(r.checks[0].threshold, 14.0);
        assert_eq!(r.checks[0].margin, -4.0);
    }

    #[test]
    fn hierarchical_location_condition() {
        let h = |nu_b| {
            let loc = LocationPrior::hierarchical(vec![0.0; 2], SpdMatrix::identity(2), nu_b).unwrap();
            check_consistency_constraints(&BaseMeasureSpec::new(loc, iw(2, 8.0)).unwrap()).pass
        };
        assert!(!h(4.0));
        assert!(h(4.5));
    }

    #[test]
    fn angle_atoms() {
        let mut p = SpectralParams { dim: 2, a: 3.0, b: 1.0, beta_pi2: 1.0, beta_0: 0.0, kappa_rot: 1.0 };
        let mut rng = stream(3, 0);
        assert!((0..100).all(|_| sample_rotator_angle(&p, &mut rng) == std::f64::consts::FRAC_PI_2));
        p.beta_pi2 = 0.0;
        p.beta_0 = 1.0;
        assert!((0..100).all(|_| sample_rotator_angle(&p, &mut rng) == 0.0));
    }

    #[test]
    fn zero_angles_give_diagonal() {
        let o = rotation_from_angles::<f64>(3, &[0.0; 3]);
        assert_eq!(o, Matrix::identity(3));
        let s = spectral_sigma(&o, &[2.0, 5.0, 1.0]).unwrap();
        assert_eq!(s.matrix(), &Matrix::from_diag(&[2.0, 5.0, 1.0]));
    }

    #[test]
    fn rotation_is_orthogonal() {
        let o = rotation_from_angles::<f64>(4, &[0.3, -1.2, 0.7, 1.5, -0.1, 0.9]);
        let e = o.matmul(&o.transpose()).sub(&Matrix::identity(4)).max_abs();
        assert!(e < 1e-14);
    }

    #[test]
    fn mixture_draw_is_subprobability() {
        let spec = BaseMeasureSpec::new(LocationPrior::standard(2), iw(2, 8.0)).unwrap();
        let f = sample_prior_mixture(1.0, &spec, 10, &mut stream(5, 0)).unwrap();
        let total = f.total_mass() + f.remainder();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(sample_prior_mixture(1.0, &spec, 0, &mut stream(5, 0)).is_err());
    }

    #[test]
    fn base_draw_reproducible() {
        let spec = BaseMeasureSpec::new(LocationPrior::standard(3), iw(3, 15.0)).unwrap();
        let a = sample_base(&spec, &mut stream(9, 2)).unwrap();
        let b = sample_base(&spec, &mut stream(9, 2)).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert_eq!(a.0.len(), a.1.dim());
    }
}
