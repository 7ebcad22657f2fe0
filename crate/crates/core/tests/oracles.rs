//! Library outputs against independent closed forms and brute-force references.

mod common;

use statrs::distribution::{Beta, ContinuousCDF, Gamma, Normal};

use lsmix::distances::{hellinger_quadrature, l1_mixture_upper_bound, l1_quadrature};
use lsmix::f0::{check_all, F0Spec};
use lsmix::harness::{self, ExperimentConfig};
use lsmix::mixture::{GaussianComponent, MixtureDensity, StickBreaking};
use lsmix::priors::{sample_base, BaseMeasureSpec, CovariancePrior, LocationPrior, SpectralParams};
use lsmix::rng::stream;
use lsmix::sampler::posterior_distance_trace;
use lsmix::sieve::{cell_of, cell_prior_mass_bound, simplex_net, SieveCell};
use lsmix::spd::SpdMatrix;
use lsmix::tails::TailRequirements;

use common::*;

fn n1(m: f64, v: f64) -> MixtureDensity<f64> {
    MixtureDensity::single(GaussianComponent::new(vec![m], SpdMatrix::diagonal(&[v]).unwrap()).unwrap())
}

#[test]
fn stick_tail_is_a_gamma_probability() {
    // Σ_{h>H} π_h = ∏(1 − V_h) and −log(1 − V_h) ~ Exp(α), so the tail exceeds
    // ε exactly when a Gamma(H, rate α) variable is below log(1/ε).
    let mut rng = stream(31, 0);
    for alpha in [0.5, 1.0, 2.0] {
        for h in [3usize, 5, 10] {
            let eps = 0.1;
            let exact = Gamma::new(h as f64, alpha).unwrap().cdf((1.0f64 / eps).ln());
            let n = 100_000;
            let hits = (0..n).filter(|_| StickBreaking::sample(alpha, h, &mut rng).unwrap().remainder() > eps).count();
            let p = hits as f64 / n as f64;
            let se = (exact * (1.0 - exact) / n as f64).sqrt();
            assert!((p - exact).abs() <= 4.0 * se + 1e-5, "alpha {alpha} H {h}: {p} vs {exact}");
        }
    }
}

#[test]
fn l1_crossing_point_oracle() {
    let phi = Normal::new(0.0, 1.0).unwrap();
    for mu in [0.1, 0.5, 1.0, 2.0] {
        // equal-variance Gaussians cross at μ/2
        let exact = 2.0 * (2.0 * phi.cdf(mu / 2.0) - 1.0);
        let (f, g) = (n1(0.0, 1.0), n1(mu, 1.0));
        assert!((l1_quadrature(&f, &g).unwrap().value - exact).abs() < 1e-7, "mu {mu}");
        let bound = l1_mixture_upper_bound(&f, &g, &[0], 1).unwrap();
        assert!(bound >= exact);
        assert!((bound - (2.0 / std::f64::consts::PI).sqrt() * mu).abs() < 1e-12);
    }
}

#[test]
fn hellinger_quadrature_matches_bhattacharyya() {
    let mut rng = stream(32, 0);
    for _ in 0..10 {
        let (a, b) = (random_gaussian2(1.0, &mut rng), random_gaussian2(1.0, &mut rng));
        let exact = hellinger_sq_gaussian(&a, &b).sqrt();
        let q = hellinger_quadrature(&MixtureDensity::single(a), &MixtureDensity::single(b)).unwrap().value;
        assert!((q - exact).abs() < 1e-5, "{q} vs {exact}");
    }
    let exact = hellinger_sq_gaussian(&GaussianComponent::standard(1), &GaussianComponent::new(vec![1.0], SpdMatrix::identity(1)).unwrap()).sqrt();
    assert!((exact - 0.48477).abs() < 1e-5);
}

#[test]
fn simplex_net_is_at_least_a_packing() {
    // Any ε-cover has at least as many points as a set with pairwise ℓ¹
    // gaps above 2ε; build one greedily on a fine grid.
    for h in [2usize, 3] {
        for eps in [0.5, 0.25, 0.15] {
            let net = simplex_net(h, eps).unwrap();
            let k = 60;
            let mut grid = Vec::new();
            if h == 2 {
                grid.extend((0..=k).map(|i| vec![i as f64 / k as f64, 1.0 - i as f64 / k as f64]));
            } else {
                for i in 0..=k {
                    for j in 0..=k - i {
                        grid.push(vec![i as f64 / k as f64, j as f64 / k as f64, (k - i - j) as f64 / k as f64]);
                    }
                }
            }
            let l1 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>();
            let mut packing: Vec<&Vec<f64>> = Vec::new();
            for p in &grid {
                if packing.iter().all(|q| l1(p, q) > 2.0 * eps) {
                    packing.push(p);
                }
            }
            assert!(net.len() >= packing.len(), "H {h} eps {eps}: net {} < packing {}", net.len(), packing.len());
        }
    }
}

/// Exact single-component cell masses for a standard normal location in
/// d = 2 (P(‖θ‖ > x) = e^{−x²/2}) and a spectral covariance with iid
/// Ga(a, 1) precisions, whose condition number z satisfies
/// P(z > x) = 2 P(Beta(a, a) > x/(1 + x)).
#[test]
fn cell_masses_match_oracle_and_bound() {
    let a = 3.0;
    let r: f64 = 2.0;
    let n = 4.0;
    let beta = Beta::new(a, a).unwrap();
    let loc_sf = |x: f64| (-x * x / 2.0).exp();
    let cond_sf = |x: f64| if x <= 1.0 { 1.0 } else { 2.0 * (1.0 - beta.cdf(x / (1.0 + x))) };
    // sup_x x^{2(r+1)} e^{−x²/2} = (2(r+1))^{r+1} e^{−(r+1)}
    let loc_const = (2.0 * (r + 1.0)).powf(r + 1.0) * (-(r + 1.0)).exp();
    let cond_const = (0..4000).map(|i| 1.0 + i as f64 * 0.05).map(|x| x.powf(a) * cond_sf(x)).fold(0.0, f64::max) * 1.01;
    let req = TailRequirements { loc_const, cond_const, ..TailRequirements::new(2, r, a) };

    let spec = BaseMeasureSpec::new(
        LocationPrior::standard(2),
        CovariancePrior::Spectral(SpectralParams { dim: 2, a, b: 1.0, beta_pi2: 0.0, beta_0: 0.0, kappa_rot: 0.0 }),
    )
    .unwrap();
    let draws = 200_000;
    let mut rng = stream(33, 0);
    let mut counts = std::collections::BTreeMap::new();
    for _ in 0..draws {
        let (theta, sigma) = sample_base(&spec, &mut rng).unwrap();
        let norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
        let cell = cell_of(&[norm], &[sigma.condition_number().unwrap()], n).unwrap();
        *counts.entry((cell.j[0], cell.l[0])).or_insert(0usize) += 1;
    }
    for j in 1..=3u64 {
        for l in 0..=2u32 {
            let cell = SieveCell::new(vec![j], vec![l]).unwrap();
            let (lo, hi) = cell.location_shell(0, n);
            let (zlo, zhi) = cell.condition_shell(0, n);
            let exact = (loc_sf(lo) - loc_sf(hi)) * (cond_sf(zlo) - cond_sf(zhi));
            let freq = *counts.get(&(j, l)).unwrap_or(&0) as f64 / draws as f64;
            let se = (exact * (1.0 - exact) / draws as f64).sqrt();
            assert!((freq - exact).abs() <= 4.0 * se + 1e-6, "cell ({j},{l}): {freq} vs {exact}");
            let bound = cell_prior_mass_bound(&cell, &req, n).unwrap();
            assert!(exact <= bound, "cell ({j},{l}): mass {exact} above bound {bound}");
        }
    }
}

#[test]
fn random_mixtures_satisfy_f0_conditions() {
    let mut rng = stream(34, 0);
    for i in 0..20 {
        let f = random_mixture2(1 + i % 3, &mut rng);
        let spec = F0Spec::new(f).unwrap();
        let r = check_all(&spec, 5_000, i as u64).unwrap();
        assert!(r.pass(), "mixture {i} failed {:?}", r.failures());
    }
}

const SMALL: &str = r#"
[f0]
weights = [0.4, 0.6]
means = [[-1.0, 0.0], [1.0, 0.5]]
covs = [[[1.0, 0.2], [0.2, 0.8]], [[0.6, 0.0], [0.0, 1.2]]]

[prior]
family = "iw"
d = 2
nu = 8.0

[mcmc]
iterations = 80
burn_in = 30
thin = 5

[experiment]
n_grid = [40, 80]
replicates = 2
epsilon = 0.4
seed = 11
distance_method = "mc"
distance_budget = 10000
f0_check_budget = 2000
"#;

#[test]
fn exceedance_is_exact_over_the_trace() {
    let cfg = ExperimentConfig::from_toml_str(SMALL).unwrap();
    let job = harness::run_job(&cfg, 40, 1).unwrap();
    let trace = posterior_distance_trace(&job.draws, &cfg.f0.density, cfg.distance_budget, &mut stream(job.row.seed, 2)).unwrap();
    let values: Vec<f64> = trace.iter().map(|e| e.value).collect();
    assert_eq!(values, job.distances);
    let over = values.iter().filter(|&&v| v > cfg.epsilon).count();
    assert_eq!(job.row.exceedance_frac, over as f64 / values.len() as f64);
    assert_eq!(job.row.hellinger_mean, values.iter().sum::<f64>() / values.len() as f64);
}

#[test]
fn results_are_byte_identical_across_worker_counts() {
    let cfg = ExperimentConfig::from_toml_str(SMALL).unwrap();
    let bytes = |w: usize| {
        let mut out = Vec::new();
        harness::write_results(&mut out, &harness::run(&cfg, w).unwrap(), false).unwrap();
        out
    };
    let one = bytes(1);
    assert_eq!(one, bytes(3));
    let back = harness::read_results(one.as_slice()).unwrap();
    assert_eq!(back.rows.len(), 4);
    let mut again = Vec::new();
    harness::write_results(&mut again, &back, false).unwrap();
    assert_eq!(one, again);
}

#[test]
fn iw_tail_conditions_hold_up_to_the_analytic_exponent() {
    use lsmix::tails::{verify_tail_conditions, TailCondition, Verdict};
    // IW(8, I₂) condition number has survival exponent (ν − d + 1)/2 = 3.5
    let spec = iw_base(2, 8.0);
    let report = verify_tail_conditions(&spec, &TailRequirements::new(2, 1.0, 3.0), 200_000, 35).unwrap();
    assert!(report.all_pass(), "{report:?}");
    let z = report.get(TailCondition::ConditionNumber);
    assert!((z.exponent.unwrap() - 3.5).abs() < 4.0 * z.stderr.unwrap() + 0.3, "{z:?}");
    let report = verify_tail_conditions(&spec, &TailRequirements::new(2, 1.0, 6.0), 200_000, 35).unwrap();
    assert_eq!(report.get(TailCondition::ConditionNumber).verdict, Verdict::Fail);
    assert!(!report.all_pass());
}
