//! Prior/posterior agreement of the blocked Gibbs sampler: the chain that
//! alternates data simulation and one sweep must keep the prior marginals.

mod common;

use lsmix::priors::{BaseMeasureSpec, CovariancePrior, FactorParams, LocationPrior, MgpParams, SpectralParams};
use lsmix::rng::stream;
use lsmix::sampler::DpMixtureModel;

use common::{geweke, iw_base};

fn agrees(model: DpMixtureModel<f64>, rounds: usize, seed: u64) {
    for s in geweke(&model, 5, rounds, &mut stream(seed, 0)) {
        println!("{}: prior {:.4} chain {:.4} z {:.2}", s.name, s.prior_mean, s.chain_mean, s.z());
        assert!(s.z().abs() < 3.0, "{}: prior {} vs chain {} (z = {})", s.name, s.prior_mean, s.chain_mean, s.z());
    }
}

fn model(cov: CovariancePrior<f64>, h: usize) -> DpMixtureModel<f64> {
    let d = cov.dim();
    DpMixtureModel::new(1.0, BaseMeasureSpec::new(LocationPrior::standard(d), cov).unwrap(), h).unwrap()
}

#[test]
fn iw_d2() {
    agrees(DpMixtureModel::new(1.0, iw_base(2, 6.0), 4).unwrap(), 50_000, 21);
}

#[test]
fn hierarchical_location_d1() {
    let base = BaseMeasureSpec::new(
        LocationPrior::hierarchical(vec![0.0], lsmix::spd::SpdMatrix::identity(1), 6.0).unwrap(),
        CovariancePrior::InverseWishart(lsmix::priors::IwParams { scale: lsmix::spd::SpdMatrix::identity(1), nu: 8.0 }),
    )
    .unwrap();
    agrees(DpMixtureModel::new(1.0, base, 4).unwrap(), 50_000, 22);
}

#[test]
fn factor_d2() {
    agrees(model(CovariancePrior::Factor(FactorParams { dim: 2, rank: 1, a: 5.0, b: 2.0 }), 4), 50_000, 23);
}

#[test]
fn mgp_d2() {
    agrees(model(CovariancePrior::Mgp(MgpParams { dim: 2, rank: 2, a1: 2.0, a2: 3.0, a: 5.0, b: 2.0 }), 4), 50_000, 24);
}

#[test]
fn spectral_d2() {
    let p = SpectralParams { dim: 2, a: 4.0, b: 2.0, beta_pi2: 0.2, beta_0: 0.3, kappa_rot: 1.0 };
    agrees(model(CovariancePrior::Spectral(p), 4), 50_000, 25);
}
