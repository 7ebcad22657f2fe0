//! Scalar abstraction shared by the density, prior and sampler code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use rand::Rng;
use rand_distr::{Distribution, Gamma, Open01, StandardNormal};

/// Floating point scalar usable throughout the crate (`f32` or `f64`).
///
/// Random variate generation is part of the trait so generic code can draw
/// normals and gammas without carrying `rand_distr` bounds everywhere.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn of(v: f64) -> Self;

    /// Relative validation tolerance: symmetry of matrices, excess mixture mass.
    fn tol() -> Self;

    fn sample_std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Uniform on the open interval (0, 1).
    fn sample_open01<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Gamma variate with the given shape and scale (mean = shape * scale).
    fn sample_gamma<R: Rng + ?Sized>(shape: Self, scale: Self, rng: &mut R) -> Self;

    /// Beta(a, b) via the gamma ratio.
    fn sample_beta<R: Rng + ?Sized>(a: Self, b: Self, rng: &mut R) -> Self {
        let x = Self::sample_gamma(a, Self::one(), rng);
        let y = Self::sample_gamma(b, Self::one(), rng);
        let s = x + y;
        if s > Self::zero() {
            x / s
        } else {
            // both gammas underflowed; fall back on the mean
            a / (a + b)
        }
    }

    /// Chi-square with `k` (possibly fractional) degrees of freedom.
    fn sample_chi2<R: Rng + ?Sized>(k: Self, rng: &mut R) -> Self {
        Self::sample_gamma(k / Self::of(2.0), Self::of(2.0), rng)
    }
}

macro_rules! impl_real {
    ($t:ty, $tol:expr) => {
        impl Real for $t {
            #[inline]
            fn of(v: f64) -> Self {
                v as $t
            }

            #[inline]
            fn tol() -> Self {
                $tol
            }

            #[inline]
            fn sample_std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }

            #[inline]
            fn sample_open01<R: Rng + ?Sized>(rng: &mut R) -> Self {
                Open01.sample(rng)
            }

            fn sample_gamma<R: Rng + ?Sized>(shape: Self, scale: Self, rng: &mut R) -> Self {
                Gamma::new(shape, scale)
                    .expect("gamma parameters validated by caller")
                    .sample(rng)
            }
        }
    };
}

impl_real!(f64, 1e-12);
// 1e-12 is below single precision resolution; a few ulps is the honest equivalent.
impl_real!(f32, 16.0 * f32::EPSILON);
