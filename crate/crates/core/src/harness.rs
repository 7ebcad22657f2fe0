//! Empirical posterior-consistency experiments: simulate from a checked f₀,
//! fit across an n-grid, and record how much posterior mass stays outside
//! an ε-ball around f₀.
//!
//! Experiment file (TOML):
//!
//! ```toml
//! [f0]
//! weights = [1.0]
//! means = [[0.0]]
//! covs = [[[1.0]]]
//! eta = 1.0            # optional, default 1
//! delta = 0.5          # optional, default 0.5
//! # m_bound = 0.5      # optional claimed sup bound
//!
//! [prior]              # as in a prior config file
//! family = "iw"
//! d = 1
//! nu = 8.0
//!
//! # [location]         # optional, as in a prior config file
//!
//! [mcmc]
//! iterations = 1500
//! burn_in = 500
//! thin = 10
//! alpha = 1.0          # optional, default 1
//! # truncation = 30    # optional, default ⌈5α log n⌉ capped at 200
//! standardize = false  # optional
//!
//! [experiment]
//! n_grid = [100, 500, 2000]
//! replicates = 5
//! epsilon = 0.3
//! seed = 42
//! metric = "hellinger"       # hellinger | l1
//! distance_method = "auto"   # auto (quadrature when d = 1) | mc | quadrature
//! distance_budget = 20000    # Monte Carlo points per distance
//! f0_check_budget = 20000
//! ```
//!
//! Each (n, replicate) job draws a job seed from stream (n, replicate) of the
//! master seed; the job then uses stream 0 of the job seed for MCMC, 1 for
//! data and 2 for distances. The `seed` column of the results is that job
//! seed.

use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distances::{hellinger_quadrature, l1_distance, l1_quadrature, Metric};
use crate::error::{input, param, Error, Result};
use crate::f0::{check_all, F0Report, F0Spec, DEFAULT_DELTA, DEFAULT_ETA};
use crate::io::MixtureJson;
use crate::linalg::Matrix;
use crate::priors::{BaseMeasureSpec, LocationSection, PriorConfig, PriorSection};
use crate::rng::{stream, stream2};
use crate::sampler::{fit, posterior_distance_trace, DpMixtureModel, McmcConfig, PosteriorDraws};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct F0Section {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covs: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcSection {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    #[serde(default)]
    pub standardize: bool,
}

fn one() -> f64 {
    1.0
}

fn default_metric() -> String {
    "hellinger".into()
}

fn default_method() -> String {
    "auto".into()
}

fn default_budget() -> usize {
    20_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub epsilon: f64,
    pub seed: u64,
    #[serde(default = "default_metric")]
    pub metric: String,
    #[serde(default = "default_method")]
    pub distance_method: String,
    #[serde(default = "default_budget")]
    pub distance_budget: usize,
    #[serde(default = "default_budget")]
    pub f0_check_budget: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub f0: F0Section,
    pub prior: PriorSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<LocationSection>,
    pub mcmc: McmcSection,
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceMethodChoice {
    Auto,
    MonteCarlo,
    Quadrature,
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub file: ExperimentFile,
    pub f0: F0Spec,
    pub base: BaseMeasureSpec<f64>,
    pub alpha: f64,
    pub truncation: Option<usize>,
    /// MCMC settings; the seed is replaced per job.
    pub mcmc: McmcConfig,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub metric: Metric,
    pub method: DistanceMethodChoice,
    pub distance_budget: usize,
    pub f0_check_budget: usize,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let file: ExperimentFile = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(&self.file).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(file: ExperimentFile) -> Result<Self> {
        let cfg = |m: String| Error::Config(m);
        let mj = MixtureJson { weights: file.f0.weights.clone(), means: file.f0.means.clone(), covs: file.f0.covs.clone(), remainder: None };
        let f0 = F0Spec {
            density: mj.to_mixture()?,
            eta: file.f0.eta.unwrap_or(DEFAULT_ETA),
            delta: file.f0.delta.unwrap_or(DEFAULT_DELTA),
            m_bound: file.f0.m_bound.unwrap_or(f64::INFINITY),
        };
        f0.validate()?;
        let base = PriorConfig { prior: file.prior.clone(), location: file.location.clone() }.to_spec()?;
        if base.dim() != f0.dim() {
            return Err(cfg(format!("f0 has dimension {}, prior has {}", f0.dim(), base.dim())));
        }
        let m = &file.mcmc;
        let mcmc = McmcConfig { iterations: m.iterations, burn_in: m.burn_in, thin: m.thin, seed: 0, standardize: m.standardize };
        mcmc.validate()?;
        if !(m.alpha > 0.0) {
            return Err(cfg("mcmc.alpha must be positive".into()));
        }
        if m.truncation == Some(0) {
            return Err(cfg("mcmc.truncation must be at least 1".into()));
        }
        let e = &file.experiment;
        if e.n_grid.is_empty() || e.n_grid[0] == 0 || e.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(cfg("experiment.n_grid must be nonempty, positive and strictly ascending".into()));
        }
        if e.replicates < 1 {
            return Err(cfg("experiment.replicates must be at least 1".into()));
        }
        if !(e.epsilon > 0.0 && e.epsilon.is_finite()) {
            return Err(cfg("experiment.epsilon must be positive".into()));
        }
        let metric: Metric = e.metric.parse()?;
        if metric == Metric::Kl {
            return Err(cfg("experiment.metric must be hellinger or l1".into()));
        }
        let method = match e.distance_method.as_str() {
            "auto" => DistanceMethodChoice::Auto,
            "mc" => DistanceMethodChoice::MonteCarlo,
            "quadrature" => DistanceMethodChoice::Quadrature,
            other => return Err(cfg(format!("unknown distance_method `{other}`"))),
        };
        if method == DistanceMethodChoice::Quadrature && f0.dim() > 2 {
            return Err(cfg("quadrature distances need d <= 2".into()));
        }
        Ok(ExperimentConfig {
            f0,
            base,
            alpha: m.alpha,
            truncation: m.truncation,
            mcmc,
            n_grid: e.n_grid.clone(),
            replicates: e.replicates,
            epsilon: e.epsilon,
            seed: e.seed,
            metric,
            method,
            distance_budget: e.distance_budget,
            f0_check_budget: e.f0_check_budget,
            file,
        })
    }

    fn use_quadrature(&self) -> bool {
        match self.method {
            DistanceMethodChoice::Auto => self.f0.dim() == 1,
            DistanceMethodChoice::MonteCarlo => false,
            DistanceMethodChoice::Quadrature => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub n: usize,
    pub replicate: usize,
    /// Posterior mean distance to f₀ under the configured metric.
    pub hellinger_mean: f64,
    /// Fraction of snapshots farther than ε from f₀.
    pub exceedance_frac: f64,
    pub seconds: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
}

/// f₀ must pass every regularity check before an experiment runs.
pub fn enforce_f0(cfg: &ExperimentConfig) -> Result<F0Report> {
    let report = check_all(&cfg.f0, cfg.f0_check_budget, cfg.seed)?;
    if !report.pass() {
        return Err(Error::Precondition(format!("f0 fails checks: {}", report.failures().join(", "))));
    }
    Ok(report)
}

/// Everything one (n, replicate) job produced.
#[derive(Debug, Clone)]
pub struct JobOutput {
    pub row: ResultRow,
    pub distances: Vec<f64>,
    pub draws: PosteriorDraws<f64>,
}

pub fn job_seed(master: u64, n: usize, replicate: usize) -> u64 {
    stream2(master, n as u64, replicate as u64).random()
}

/// Run a single job of the grid, without the f₀ gate.
pub fn run_job(cfg: &ExperimentConfig, n: usize, replicate: usize) -> Result<JobOutput> {
    let start = Instant::now();
    let seed = job_seed(cfg.seed, n, replicate);
    let d = cfg.f0.dim();
    let mut data_rng = stream(seed, 1);
    let mut values = Vec::with_capacity(n * d);
    for _ in 0..n {
        values.extend(cfg.f0.density.sample(&mut data_rng));
    }
    let data = Matrix::from_vec(n, d, values);
    let h = cfg.truncation.unwrap_or_else(|| DpMixtureModel::<f64>::default_truncation(cfg.alpha, n));
    let model = DpMixtureModel::new(cfg.alpha, cfg.base.clone(), h)?;
    let draws = fit(&data, &model, &McmcConfig { seed, ..cfg.mcmc.clone() })?;
    let mut dist_rng = stream(seed, 2);
    let f0 = &cfg.f0.density;
    let distances: Vec<f64> = match (cfg.metric, cfg.use_quadrature()) {
        (Metric::Hellinger, true) => draws.snapshots.iter().map(|s| hellinger_quadrature(f0, s).map(|e| e.value)).collect::<Result<_>>()?,
        (Metric::L1, true) => draws.snapshots.iter().map(|s| l1_quadrature(f0, s).map(|e| e.value)).collect::<Result<_>>()?,
        (Metric::Hellinger, false) => {
            posterior_distance_trace(&draws, f0, cfg.distance_budget, &mut dist_rng)?.iter().map(|e| e.value).collect()
        }
        (Metric::L1, false) => draws
            .snapshots
            .iter()
            .map(|s| l1_distance(f0, s, cfg.distance_budget, &mut dist_rng).map(|e| e.value))
            .collect::<Result<_>>()?,
        (Metric::Kl, _) => return Err(param("KL is not a consistency metric here")),
    };
    let k = distances.len() as f64;
    let row = ResultRow {
        n,
        replicate,
        hellinger_mean: distances.iter().sum::<f64>() / k,
        exceedance_frac: distances.iter().filter(|&&v| v > cfg.epsilon).count() as f64 / k,
        seconds: start.elapsed().as_secs_f64(),
        seed,
    };
    Ok(JobOutput { row, distances, draws })
}

/// The full grid on a pool of `workers` threads, rows ordered by (n, replicate).
pub fn run(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentResult> {
    enforce_f0(cfg)?;
    let jobs: Vec<(usize, usize)> = cfg.n_grid.iter().flat_map(|&n| (0..cfg.replicates).map(move |r| (n, r))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    let outs: Vec<Result<ResultRow>> = pool.install(|| jobs.par_iter().map(|&(n, r)| run_job(cfg, n, r).map(|o| o.row)).collect());
    Ok(ExperimentResult { rows: outs.into_iter().collect::<Result<_>>()? })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    pub n: usize,
    pub replicates: usize,
    pub median_distance: f64,
    pub iqr_distance: f64,
    pub median_exceedance: f64,
}

/// Sample quantile with linear interpolation between order statistics
/// (R's type 7).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(result: &ExperimentResult) -> Result<Vec<SummaryRow>> {
    if result.rows.is_empty() {
        return Err(input("empty result"));
    }
    let mut ns: Vec<usize> = result.rows.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    Ok(ns
        .into_iter()
        .map(|n| {
            let rows: Vec<&ResultRow> = result.rows.iter().filter(|r| r.n == n).collect();
            let mut dist: Vec<f64> = rows.iter().map(|r| r.hellinger_mean).collect();
            let mut exc: Vec<f64> = rows.iter().map(|r| r.exceedance_frac).collect();
            dist.sort_by(f64::total_cmp);
            exc.sort_by(f64::total_cmp);
            SummaryRow {
                n,
                replicates: rows.len(),
                median_distance: quantile(&dist, 0.5),
                iqr_distance: quantile(&dist, 0.75) - quantile(&dist, 0.25),
                median_exceedance: quantile(&exc, 0.5),
            }
        })
        .collect())
}

/// Write `n,replicate,hellinger_mean,exceedance_frac,seconds,seed`; with
/// `timing = false` the seconds column is 0 so equal runs give equal bytes.
pub fn write_results<W: Write>(out: W, result: &ExperimentResult, timing: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in &result.rows {
        let row = if timing { *r } else { ResultRow { seconds: 0.0, ..*r } };
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results<R: Read>(input_: R) -> Result<ExperimentResult> {
    let mut rd = csv::Reader::from_reader(input_);
    let mut rows = Vec::new();
    for rec in rd.deserialize() {
        rows.push(rec.map_err(csv_err)?);
    }
    Ok(ExperimentResult { rows })
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse { line, msg: e.to_string() }
}

#[derive(Debug, Clone, Serialize)]
struct Manifest<'a> {
    version: &'static str,
    config: &'a ExperimentFile,
    workers: usize,
    jobs: usize,
    timing_included: bool,
    results: &'static str,
    f0_checks: serde_json::Value,
    summary: Vec<serde_json::Value>,
}

pub fn write_manifest<W: Write>(out: W, cfg: &ExperimentConfig, result: &ExperimentResult, f0: &F0Report, workers: usize, timing: bool) -> Result<()> {
    let chk = |c: &crate::f0::CheckResult| serde_json::json!({"estimate": c.estimate, "stderr": c.stderr, "pass": c.pass});
    let m = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        config: &cfg.file,
        workers,
        jobs: result.rows.len(),
        timing_included: timing,
        results: "results.csv",
        f0_checks: serde_json::json!({
            "bounded": chk(&f0.bounded),
            "entropy": chk(&f0.entropy),
            "local_log_ratio": chk(&f0.local_log_ratio),
            "moment": chk(&f0.moment),
        }),
        summary: summarize(result)?
            .iter()
            .map(|s| {
                serde_json::json!({
                    "n": s.n,
                    "replicates": s.replicates,
                    "median_distance": s.median_distance,
                    "iqr_distance": s.iqr_distance,
                    "median_exceedance": s.median_exceedance,
                })
            })
            .collect(),
    };
    serde_json::to_writer_pretty(out, &m)?;
    Ok(())
}

/// Numeric CSV with a constant number of columns, one point per row.
pub fn ingest_data(path: impl AsRef<Path>, header: bool) -> Result<Matrix<f64>> {
    ingest_reader(std::fs::File::open(path)?, header)
}

pub fn ingest_reader<R: Read>(src: R, header: bool) -> Result<Matrix<f64>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(header).flexible(true).trim(csv::Trim::All).from_reader(src);
    let mut cols = None;
    let mut values = Vec::new();
    let mut rows = 0usize;
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        match cols {
            None => cols = Some(rec.len()),
            Some(c) if c != rec.len() => {
                return Err(Error::Parse { line, msg: format!("expected {c} fields, found {}", rec.len()) });
            }
            _ => {}
        }
        for field in rec.iter() {
            let v: f64 = field.parse().map_err(|_| Error::Parse { line, msg: format!("not a number: `{field}`") })?;
            if !v.is_finite() {
                return Err(Error::Parse { line, msg: format!("non-finite value `{field}`") });
            }
            values.push(v);
        }
        rows += 1;
    }
    let Some(c) = cols else {
        return Err(Error::Parse { line: 1, msg: "no data rows".into() });
    };
    Ok(Matrix::from_vec(rows, c, values))
}
