use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn lsmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lsmix")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = lsmix(args);
    assert!(out.status.success(), "lsmix {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const STD: &str = r#"{"weights":[1.0],"means":[[0.0]],"covs":[[[1.0]]]}"#;
const SHIFT: &str = r#"{"weights":[1.0],"means":[[1.0]],"covs":[[[1.0]]]}"#;

const EXPERIMENT: &str = r#"
[f0]
weights = [1.0]
means = [[0.0]]
covs = [[[1.0]]]

[prior]
family = "iw"
d = 1
nu = 8.0

[mcmc]
iterations = 120
burn_in = 40
thin = 8

[experiment]
n_grid = [30, 60]
replicates = 2
epsilon = 0.3
seed = 5
f0_check_budget = 2000
"#;

#[test]
fn tails_csv_has_footer() {
    let dir = TempDir::new().unwrap();
    let prior = write(dir.path(), "p.toml", "[prior]\nfamily = \"iw\"\nd = 2\nnu = 8.0\n");
    let out = dir.path().join("t.csv");
    ok(&["tails", "--prior", &prior, "--grid", "1:1000:20", "--samples", "20000", "--seed", "3", "--out", out.to_str().unwrap()]);
    let text = std::fs::read_to_string(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,survival,stderr");
    assert_eq!(lines.len(), 1 + 20 + 2);
    assert_eq!(lines[21], "slope,slope_stderr,analytic_exponent");
    let footer: Vec<&str> = lines[22].split(',').collect();
    let slope: f64 = footer[0].parse().unwrap();
    assert_eq!(footer[2].parse::<f64>().unwrap(), 3.5);
    assert!(slope < 0.0);
    assert_eq!(lines[1].split(',').next().unwrap(), "1");
}

#[test]
fn distance_json() {
    let dir = TempDir::new().unwrap();
    let f = write(dir.path(), "f.json", STD);
    let g = write(dir.path(), "g.json", SHIFT);
    let v: serde_json::Value = serde_json::from_str(&ok(&["distance", "--f", &f, "--g", &g, "--metric", "kl", "--quadrature"])).unwrap();
    assert!((v["value"].as_f64().unwrap() - 0.5).abs() < 1e-8);
    let a = ok(&["distance", "--f", &f, "--g", &g, "--budget", "10000", "--seed", "9"]);
    let b = ok(&["distance", "--f", &f, "--g", &g, "--budget", "10000", "--seed", "9"]);
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert!((v["value"].as_f64().unwrap() - 0.48477).abs() < 5.0 * v["stderr"].as_f64().unwrap() + 1e-3);
}

#[test]
fn distance_rejects_bad_input() {
    let dir = TempDir::new().unwrap();
    let f = write(dir.path(), "f.json", STD);
    let bad = write(dir.path(), "bad.json", r#"{"weights":[1.0],"means":[[0.0, 1.0]],"covs":[[[1.0]]]}"#);
    assert!(!lsmix(&["distance", "--f", &f, "--g", &bad]).status.success());
    assert!(!lsmix(&["distance", "--f", &f, "--g", &f, "--metric", "tv"]).status.success());
    assert!(!lsmix(&["distance", "--f", &f, "--g", &f, "--budget", "10"]).status.success());
}

#[test]
fn sieve_modes() {
    let s = ok(&["sieve", "--mode", "summability", "--d", "2", "--n", "1000,10000", "--r", "2", "--kappa", "5", "--c", "0.1"]);
    let rows: Vec<Vec<String>> = s.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 2);
    let (a, b): (f64, f64) = (rows[0][3].parse().unwrap(), rows[1][3].parse().unwrap());
    assert!(b < a);
    let s = ok(&["sieve", "--mode", "summability", "--d", "2", "--kappa", "1"]);
    assert!(s.lines().nth(1).unwrap().contains("true"));
    let s = ok(&["sieve", "--mode", "complement", "--n", "500", "--h", "5", "--epsilon", "0.1"]);
    assert_eq!(s.lines().count(), 2);
    let s = ok(&["sieve", "--mode", "entropy", "--d", "1", "--n", "10", "--h", "1", "--m", "1", "--sigma", "1", "--epsilon", "0.5", "--a-upper", "1"]);
    let v: f64 = s.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    // ln 2 + ln 2 from the ladder and weights, ln(5 − (−1)) from the shell
    assert!((v - 24f64.ln()).abs() < 1e-12);
}

#[test]
fn fit_writes_snapshots() {
    let dir = TempDir::new().unwrap();
    let prior = write(dir.path(), "p.toml", "[prior]\nfamily = \"iw\"\nd = 1\nnu = 6.0\n");
    let body: String = (0..40).map(|i| format!("{}\n", (i as f64 * 0.37).sin())).collect();
    let data = write(dir.path(), "x.csv", &format!("x\n{body}"));
    let out = dir.path().join("post.json");
    ok(&["fit", "--data", &data, "--header", "--prior", &prior, "--trunc", "8", "--iters", "60", "--burnin", "20", "--thin", "4", "--out", out.to_str().unwrap()]);
    let post = lsmix::io::read_posterior(&out).unwrap();
    assert_eq!(post.snapshots.len(), 10);
    for m in post.mixtures().unwrap() {
        assert_eq!(m.len(), 8);
        assert!((m.total_mass() + m.remainder() - 1.0).abs() < 1e-9);
    }
    // Without --header the text header is a parse error.
    assert!(!lsmix(&["fit", "--data", &data, "--prior", &prior, "--iters", "10", "--burnin", "0", "--thin", "1"]).status.success());
}

#[test]
fn check_f0_reports() {
    let dir = TempDir::new().unwrap();
    let f = write(dir.path(), "f.json", STD);
    let v: serde_json::Value = serde_json::from_str(&ok(&["check-f0", "--f0", &f, "--budget", "4000"])).unwrap();
    assert_eq!(v["pass"], true);
    assert!((v["entropy"]["estimate"].as_f64().unwrap() + 1.41894).abs() < 0.05);
    let unnormalized = write(dir.path(), "u.json", r#"{"weights":[0.5],"means":[[0.0]],"covs":[[[1.0]]]}"#);
    assert!(!lsmix(&["check-f0", "--f0", &unnormalized]).status.success());
    let out = lsmix(&["check-f0", "--f0", &f, "--m-bound", "0.1", "--budget", "4000"]);
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["failures"], serde_json::json!(["bounded"]));
}

#[test]
fn consistency_outputs_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "exp.toml", EXPERIMENT);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["consistency", "--config", &cfg, "--out-dir", a.to_str().unwrap(), "--workers", "1", "--no-timing"]);
    ok(&["consistency", "--config", &cfg, "--out-dir", b.to_str().unwrap(), "--workers", "3", "--no-timing"]);
    let ra = std::fs::read(a.join("results.csv")).unwrap();
    assert_eq!(ra, std::fs::read(b.join("results.csv")).unwrap());
    let text = String::from_utf8(ra).unwrap();
    assert!(text.starts_with("n,replicate,hellinger_mean,exceedance_frac,seconds,seed"));
    assert_eq!(text.lines().count(), 5);
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["jobs"], 4);
    assert_eq!(manifest["summary"].as_array().unwrap().len(), 2);
}

#[test]
fn consistency_stops_on_bad_f0() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "exp.toml", &EXPERIMENT.replace("[f0]\n", "[f0]\nm_bound = 0.1\n"));
    let out = lsmix(&["consistency", "--config", &cfg, "--out-dir", dir.path().join("o").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(!dir.path().join("o").join("results.csv").exists());
}

#[test]
fn constraints_table() {
    let dir = TempDir::new().unwrap();
    let good = write(dir.path(), "g.toml", "[prior]\nfamily = \"iw\"\nd = 2\nnu = 6.0\n");
    let bad = write(dir.path(), "b.toml", "[prior]\nfamily = \"spectral\"\nd = 3\na = 5.0\n");
    assert!(ok(&["constraints", "--prior", &good]).contains("all constraints hold"));
    assert!(ok(&["constraints", "--prior", &bad]).contains("FAIL"));
}
