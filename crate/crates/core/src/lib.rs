//! Dirichlet-process location-scale mixtures of multivariate Gaussians.
//!
//! Four covariance priors for the base measure (inverse-Wishart, factor,
//! multiplicative gamma process, spectral with rotator angles), a blocked
//! Gibbs sampler, and numerical checks of the conditions under which the
//! posterior concentrates around the true density: tail exponents of the
//! base measure, distance inequalities, sieve entropy and prior mass
//! bounds, regularity of f₀, and simulation experiments across sample sizes.
//!
//! Linear algebra and densities are generic over [`Real`] (`f32` or `f64`);
//! Monte Carlo summaries are reported in `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN
#![allow(clippy::needless_range_loop)]

pub mod distances;
pub mod error;
pub mod f0;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod mixture;
pub mod priors;
pub mod real;
pub mod rng;
pub mod sampler;
pub mod sieve;
pub mod spd;
pub mod tails;

pub use error::{Error, Result};
pub use mixture::{GaussianComponent, MixtureDensity, StickBreaking};
pub use real::Real;
pub use spd::SpdMatrix;

pub type Matrix64 = linalg::Matrix<f64>;
pub type Matrix32 = linalg::Matrix<f32>;
pub type SpdMatrix64 = SpdMatrix<f64>;
pub type SpdMatrix32 = SpdMatrix<f32>;
pub type GaussianComponent64 = GaussianComponent<f64>;
pub type GaussianComponent32 = GaussianComponent<f32>;
pub type Mixture64 = MixtureDensity<f64>;
pub type Mixture32 = MixtureDensity<f32>;
pub type BaseMeasure64 = priors::BaseMeasureSpec<f64>;
pub type Model64 = sampler::DpMixtureModel<f64>;
pub type Draws64 = sampler::PosteriorDraws<f64>;
