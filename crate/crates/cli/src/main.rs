use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use lsmix::distances::{self, Metric};
use lsmix::f0::{check_all, F0Spec};
use lsmix::harness::{self, ExperimentConfig};
use lsmix::io::{read_mixture, write_posterior, PosteriorJson};
use lsmix::priors::{check_consistency_constraints, PriorConfig};
use lsmix::rng::stream;
use lsmix::sampler::{fit, DpMixtureModel, McmcConfig};
use lsmix::sieve::{entropy_bound, prior_complement_bound, summability_series, EntropyParams, SieveParams, DEFAULT_TRUNCATION};
use lsmix::tails::{analytic_condition_number_exponent, estimate_survival, parse_grid, Statistic, TailRequirements};

/// `println!` that returns the write error instead of panicking.
macro_rules! out {
    ($($t:tt)*) => {
        writeln!(io::stdout(), $($t)*)?
    };
}

#[derive(Parser)]
#[command(name = "lsmix", version, about = "Dirichlet-process location-scale Gaussian mixtures")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Monte Carlo survival curve of a prior statistic with a log-log tail fit.
    Tails(TailsArgs),
    /// Distance between two mixtures given as JSON.
    Distance(DistanceArgs),
    /// Sieve entropy, prior-complement and summability bounds.
    Sieve(SieveArgs),
    /// Blocked Gibbs posterior fit of a truncated DP mixture.
    Fit(FitArgs),
    /// Check a candidate true density against the regularity conditions.
    CheckF0(CheckF0Args),
    /// Hyperparameter constraints of a prior configuration.
    Constraints(ConstraintsArgs),
    /// Posterior consistency experiment over a grid of sample sizes.
    Consistency(ConsistencyArgs),
}

#[derive(clap::Args)]
struct TailsArgs {
    #[arg(long)]
    prior: PathBuf,
    /// norm_theta | lambda_max_inv | lambda_min_inv_reciprocal | condition_number
    #[arg(long, default_value = "condition_number")]
    statistic: Statistic,
    /// lo:hi:points, log spaced
    #[arg(long, default_value = "1:1e4:100")]
    grid: String,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct DistanceArgs {
    #[arg(long)]
    f: PathBuf,
    #[arg(long)]
    g: PathBuf,
    /// hellinger | l1 | kl
    #[arg(long, default_value = "hellinger")]
    metric: Metric,
    #[arg(long, default_value_t = 100_000)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Deterministic grid quadrature instead of Monte Carlo (d <= 2).
    #[arg(long)]
    quadrature: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SieveMode {
    Entropy,
    Complement,
    Summability,
}

#[derive(clap::Args)]
struct SieveArgs {
    #[arg(long, value_enum)]
    mode: SieveMode,
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// Sample sizes; one output row each.
    #[arg(long, value_delimiter = ',', default_value = "1000")]
    n: Vec<f64>,
    #[arg(long, default_value_t = 0.3)]
    epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Sieve-size constant C in H = floor(C n eps^2 / log n).
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    #[arg(long, default_value_t = 1.0)]
    c2: f64,
    #[arg(long, default_value_t = 1.0)]
    c3: f64,
    /// Entropy constant C1.
    #[arg(long, default_value_t = 1.0)]
    c_entropy: f64,
    /// Override the derived number of components H.
    #[arg(long)]
    h: Option<usize>,
    /// Override the derived eigenvalue ladder length M.
    #[arg(long)]
    m: Option<f64>,
    /// Override the derived eigenvalue floor sigma.
    #[arg(long)]
    sigma: Option<f64>,
    /// entropy: outer location radius.
    #[arg(long, default_value_t = 1.0)]
    a_upper: f64,
    /// entropy: inner location radius.
    #[arg(long, default_value_t = 0.0)]
    a_lower: f64,
    /// entropy: condition-number cap.
    #[arg(long, default_value_t = 1.0)]
    u: f64,
    /// summability: location tail parameter r.
    #[arg(long, default_value_t = 2.0)]
    r: f64,
    /// summability: condition-number tail exponent.
    #[arg(long, default_value_t = 5.0)]
    kappa: f64,
    /// summability: the c in exp(-(4 - c) n eps^2).
    #[arg(long, default_value_t = 1.0)]
    c_rate: f64,
    #[arg(long, default_value_t = DEFAULT_TRUNCATION.0)]
    j_max: usize,
    #[arg(long, default_value_t = DEFAULT_TRUNCATION.1)]
    l_max: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    /// The data file has a header row.
    #[arg(long)]
    header: bool,
    #[arg(long)]
    prior: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Stick-breaking truncation H; defaults to ceil(5 alpha log n) capped at 200.
    #[arg(long)]
    trunc: Option<usize>,
    #[arg(long, default_value_t = 2000)]
    iters: usize,
    #[arg(long, default_value_t = 500)]
    burnin: usize,
    #[arg(long, default_value_t = 10)]
    thin: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fit on standardized coordinates and map the draws back.
    #[arg(long)]
    standardize: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct CheckF0Args {
    #[arg(long)]
    f0: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    /// Claimed bound on sup f0; omitted means any finite bound.
    #[arg(long)]
    m_bound: Option<f64>,
    #[arg(long, default_value_t = 20_000)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(clap::Args)]
struct ConstraintsArgs {
    #[arg(long)]
    prior: PathBuf,
}

#[derive(clap::Args)]
struct ConsistencyArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Write 0 in the seconds column so the outputs are byte-reproducible.
    #[arg(long)]
    no_timing: bool,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn tails(a: TailsArgs) -> Result<()> {
    let spec = PriorConfig::load(&a.prior)?.to_spec()?;
    let grid = parse_grid(&a.grid)?;
    let est = estimate_survival(&spec, a.statistic, &grid, a.samples, a.seed)?;
    let analytic = match a.statistic {
        Statistic::ConditionNumber => analytic_condition_number_exponent(&spec.covariance),
        _ => None,
    };
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(output(a.out.as_deref())?);
    w.write_record(["x", "survival", "stderr"])?;
    for i in 0..est.grid.len() {
        w.write_record([est.grid[i].to_string(), est.survival[i].to_string(), est.stderr[i].to_string()])?;
    }
    w.write_record(["slope", "slope_stderr", "analytic_exponent"])?;
    w.write_record([opt(est.fitted_slope), opt(est.slope_stderr), opt(analytic)])?;
    w.flush()?;
    Ok(())
}

fn distance(a: DistanceArgs) -> Result<()> {
    let f = read_mixture(&a.f).with_context(|| format!("reading {}", a.f.display()))?;
    let g = read_mixture(&a.g).with_context(|| format!("reading {}", a.g.display()))?;
    let est = if a.quadrature {
        match a.metric {
            Metric::Hellinger => distances::hellinger_quadrature(&f, &g)?,
            Metric::L1 => distances::l1_quadrature(&f, &g)?,
            Metric::Kl => distances::kl_quadrature(&f, &g)?,
        }
    } else {
        distances::estimate(a.metric, &f, &g, a.budget, &mut stream(a.seed, 0))?
    };
    let out = json!({
        "metric": a.metric.to_string(),
        "value": est.value,
        "stderr": est.stderr,
        "method": format!("{:?}", est.method),
        "n_evals": est.n_evals,
    });
    out!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn sieve_params(a: &SieveArgs, n: f64) -> Result<SieveParams> {
    let mut p = SieveParams::with_constants(a.d, n, a.epsilon, a.alpha, a.c, a.c1, a.c2, a.c3)?;
    p.c_entropy = a.c_entropy;
    if let Some(h) = a.h {
        p.h = h;
    }
    if let Some(m) = a.m {
        p.m = m;
    }
    if let Some(s) = a.sigma {
        p.sigma = s;
    }
    p.validate()?;
    Ok(p)
}

fn sieve(a: SieveArgs) -> Result<()> {
    if a.n.is_empty() {
        bail!("--n needs at least one value");
    }
    let mut w = csv::Writer::from_writer(output(a.out.as_deref())?);
    match a.mode {
        SieveMode::Entropy => {
            w.write_record(["n", "d", "h", "m", "sigma", "epsilon", "log_covering_bound"])?;
            for &n in &a.n {
                let p = sieve_params(&a, n)?;
                let g = EntropyParams::uniform(p.d, p.h, p.m, p.sigma, p.epsilon, a.a_upper, a.a_lower, a.u);
                let v = entropy_bound(&g, p.c_entropy)?;
                w.write_record([n.to_string(), p.d.to_string(), p.h.to_string(), p.m.to_string(), p.sigma.to_string(), p.epsilon.to_string(), v.to_string()])?;
            }
        }
        SieveMode::Complement => {
            w.write_record(["n", "h", "stick_term", "atom_term", "total", "log_total", "max_rate"])?;
            for &n in &a.n {
                let p = sieve_params(&a, n)?;
                let b = prior_complement_bound(&p)?;
                w.write_record([
                    n.to_string(),
                    p.h.to_string(),
                    b.stick_term.to_string(),
                    b.atom_term.to_string(),
                    b.total.to_string(),
                    b.log_total.to_string(),
                    b.max_rate.to_string(),
                ])?;
            }
        }
        SieveMode::Summability => {
            let req = TailRequirements { c1: a.c1, c2: a.c2, c3: a.c3, ..TailRequirements::new(a.d, a.r, a.kappa) };
            w.write_record(["n", "h", "diverges", "log_value", "log_partial", "j_tail", "l_tail", "c4", "c_max"])?;
            for &n in &a.n {
                let p = sieve_params(&a, n)?;
                let s = summability_series(&p, &req, a.c_rate, (a.j_max, a.l_max))?;
                for r in &s.reasons {
                    eprintln!("diverges: {r}");
                }
                w.write_record([
                    n.to_string(),
                    p.h.to_string(),
                    s.diverges.to_string(),
                    s.log_value.to_string(),
                    s.log_partial.to_string(),
                    s.j_tail.to_string(),
                    s.l_tail.to_string(),
                    s.c4.to_string(),
                    s.c_max.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn fit_cmd(a: FitArgs) -> Result<()> {
    let spec = PriorConfig::load(&a.prior)?.to_spec()?;
    let data = harness::ingest_data(&a.data, a.header).with_context(|| format!("reading {}", a.data.display()))?;
    let model = match a.trunc {
        Some(h) => DpMixtureModel::new(a.alpha, spec, h)?,
        None => DpMixtureModel::with_default_truncation(a.alpha, spec, data.rows())?,
    };
    let cfg = McmcConfig { iterations: a.iters, burn_in: a.burnin, thin: a.thin, seed: a.seed, standardize: a.standardize };
    let draws = fit(&data, &model, &cfg)?;
    match a.out {
        Some(p) => write_posterior(&p, &draws)?,
        None => out!("{}", serde_json::to_string_pretty(&PosteriorJson::from_draws(&draws))?),
    }
    let occ = draws.occupied.iter().sum::<usize>() as f64 / draws.len().max(1) as f64;
    eprintln!("{} snapshots, truncation {}, mean occupied components {:.2}", draws.len(), model.truncation, occ);
    Ok(())
}

fn check_f0(a: CheckF0Args) -> Result<()> {
    let density = read_mixture(&a.f0).with_context(|| format!("reading {}", a.f0.display()))?;
    let spec = F0Spec { density, eta: a.eta, delta: a.delta, m_bound: a.m_bound.unwrap_or(f64::INFINITY) };
    spec.validate()?;
    let r = check_all(&spec, a.budget, a.seed)?;
    let c = |c: &lsmix::f0::CheckResult| json!({"estimate": c.estimate, "stderr": c.stderr, "pass": c.pass});
    let out = json!({
        "bounded": c(&r.bounded),
        "entropy": c(&r.entropy),
        "local_log_ratio": c(&r.local_log_ratio),
        "moment": c(&r.moment),
        "pass": r.pass(),
        "failures": r.failures(),
    });
    out!("{}", serde_json::to_string_pretty(&out)?);
    if !r.pass() {
        io::stdout().flush()?;
        std::process::exit(1);
    }
    Ok(())
}

fn constraints(a: ConstraintsArgs) -> Result<()> {
    let spec = PriorConfig::load(&a.prior)?.to_spec()?;
    let r = check_consistency_constraints(&spec);
    for c in &r.checks {
        out!("{}\t{}: value {} threshold {} margin {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold, c.margin);
    }
    out!("{}", if r.pass { "all constraints hold" } else { "constraints violated" });
    Ok(())
}

fn consistency(a: ConsistencyArgs) -> Result<()> {
    let cfg = ExperimentConfig::load(&a.config).with_context(|| format!("loading {}", a.config.display()))?;
    let f0 = harness::enforce_f0(&cfg)?;
    let result = harness::run(&cfg, a.workers)?;
    std::fs::create_dir_all(&a.out_dir)?;
    let timing = !a.no_timing;
    harness::write_results(File::create(a.out_dir.join("results.csv"))?, &result, timing)?;
    harness::write_manifest(File::create(a.out_dir.join("manifest.json"))?, &cfg, &result, &f0, a.workers, timing)?;
    out!("n\treplicates\tmedian_distance\tiqr\tmedian_exceedance");
    for s in harness::summarize(&result)? {
        out!("{}\t{}\t{:.5}\t{:.5}\t{:.3}", s.n, s.replicates, s.median_distance, s.iqr_distance, s.median_exceedance);
    }
    Ok(())
}

fn main() -> Result<()> {
    let r = match Cli::parse().cmd {
        Cmd::Tails(a) => tails(a),
        Cmd::Distance(a) => distance(a),
        Cmd::Sieve(a) => sieve(a),
        Cmd::Fit(a) => fit_cmd(a),
        Cmd::CheckF0(a) => check_f0(a),
        Cmd::Constraints(a) => constraints(a),
        Cmd::Consistency(a) => consistency(a),
    };
    // a closed downstream pipe (`lsmix ... | head`) is not an error
    match r {
        Err(e) if e.downcast_ref::<io::Error>().is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) => Ok(()),
        r => r,
    }
}
