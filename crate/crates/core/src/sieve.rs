//! Covering-number machinery for the sieve
//! F_n = {Σ_h π_h φ_{θ_h,Σ_h} : Σ_{h>H} π_h ≤ ε, ‖θ_h‖ ≤ a, σ² ≤ λ(Σ_h), λ₁/λ_d ≤ u_h}
//! and its partition into cells F_{n,j,l}.
//!
//! All logs are natural. Bounds that can under- or overflow are computed in
//! log space; `log_*` variants return the log directly.

use crate::error::{param, Result};
use crate::tails::TailRequirements;

fn check_pos(v: f64, name: &str) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(param(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(param(format!("epsilon must lie in (0, 1), got {eps}")))
    }
}

/// Parameters of one sieve set: H components in dimension d, an M-step
/// eigenvalue ladder above σ², and per-component location radii
/// a̲_h < ‖θ_h‖ ≤ ā_h and condition-number caps u_h.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyParams {
    pub d: usize,
    pub m: f64,
    pub sigma: f64,
    pub epsilon: f64,
    pub a_upper: Vec<f64>,
    pub a_lower: Vec<f64>,
    pub u: Vec<f64>,
}

impl EntropyParams {
    /// H identical components.
    #[allow(clippy::too_many_arguments)]
    pub fn uniform(d: usize, h: usize, m: f64, sigma: f64, epsilon: f64, a_upper: f64, a_lower: f64, u: f64) -> Self {
        EntropyParams { d, m, sigma, epsilon, a_upper: vec![a_upper; h], a_lower: vec![a_lower; h], u: vec![u; h] }
    }

    pub fn h(&self) -> usize {
        self.a_upper.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(param("d must be at least 1"));
        }
        let h = self.h();
        if h == 0 || self.a_lower.len() != h || self.u.len() != h {
            return Err(param("a_upper, a_lower and u must have the same nonzero length"));
        }
        check_pos(self.sigma, "sigma")?;
        check_pos(self.epsilon, "epsilon")?;
        if !(self.m >= 1.0) {
            return Err(param(format!("M must be at least 1, got {}", self.m)));
        }
        for i in 0..h {
            check_pos(self.a_upper[i], "a_upper")?;
            if !(self.a_lower[i] >= 0.0 && self.a_lower[i] <= self.a_upper[i]) {
                return Err(param(format!("need 0 <= a_lower <= a_upper at component {i}")));
            }
            if !(self.u[i] >= 1.0 && self.u[i].is_finite()) {
                return Err(param(format!("u must be at least 1 at component {i}")));
            }
        }
        Ok(())
    }
}

/// Log covering-number bound, with a = max_h ā_h:
///
/// ```text
/// dH(log(a/(σε)) + log M) + H log(C₁/ε)
///   + Σ_h [log{(ā_h/(σε/2)+1)^d − (a̲_h/(σε/2)−1)^d} + d(d−1)/2 · log(2d u_h/ε²)]
/// ```
pub fn entropy_bound(g: &EntropyParams, c1: f64) -> Result<f64> {
    g.validate()?;
    check_pos(c1, "C1")?;
    let d = g.d as f64;
    let h = g.h() as f64;
    let eps = g.epsilon;
    let a = g.a_upper.iter().copied().fold(0.0, f64::max);
    let mut out = d * h * ((a / (g.sigma * eps)).ln() + g.m.ln()) + h * (c1 / eps).ln();
    let rot = d * (d - 1.0) / 2.0;
    for i in 0..g.h() {
        out += log_shell_net_size_bound(g.d, g.a_upper[i], g.a_lower[i], g.sigma, eps)?;
        if rot > 0.0 {
            out += rot * (2.0 * d * g.u[i] / (eps * eps)).ln();
        }
    }
    Ok(out)
}

/// (ā/(σε/2)+1)^d − (a̲/(σε/2)−1)^d.
pub fn shell_net_size_bound(d: usize, a_upper: f64, a_lower: f64, sigma: f64, epsilon: f64) -> Result<f64> {
    Ok(log_shell_net_size_bound(d, a_upper, a_lower, sigma, epsilon)?.exp())
}

pub fn log_shell_net_size_bound(d: usize, a_upper: f64, a_lower: f64, sigma: f64, epsilon: f64) -> Result<f64> {
    check_pos(a_upper, "a_upper")?;
    check_pos(sigma, "sigma")?;
    check_pos(epsilon, "epsilon")?;
    if d == 0 || !(a_lower >= 0.0 && a_lower <= a_upper) {
        return Err(param("need d >= 1 and 0 <= a_lower <= a_upper"));
    }
    let s = sigma * epsilon / 2.0;
    let hi = a_upper / s + 1.0;
    let lo = a_lower / s - 1.0;
    // hi^d − lo^d = hi^d (1 − (lo/hi)^d) with |lo| < hi
    let ratio = (lo / hi).powi(d as i32);
    Ok(d as f64 * hi.ln() + (-ratio).ln_1p())
}

/// δ^{−d(d−1)/2}.
pub fn orthogonal_net_size_bound(d: usize, delta: f64) -> Result<f64> {
    check_pos(delta, "delta")?;
    let k = (d * d.saturating_sub(1)) as f64 / 2.0;
    Ok(delta.powf(-k))
}

/// ℓ¹ covering radius of the lattice {k/K} on the H-simplex, in units of 1/K.
fn lattice_radius(h: usize) -> f64 {
    2.0 * ((h / 2) * h.div_ceil(2)) as f64 / h as f64
}

fn lattice_resolution(h: usize, epsilon: f64) -> Result<usize> {
    if h == 0 {
        return Err(param("H must be at least 1"));
    }
    check_pos(epsilon, "epsilon")?;
    let k = (lattice_radius(h) / epsilon).ceil().max(1.0);
    if k > 1e9 {
        return Err(param("epsilon too small for a lattice net"));
    }
    Ok(k as usize)
}

/// Number of points of the lattice ε-net of the H-simplex in ℓ¹,
/// C(K+H−1, H−1).
pub fn simplex_net_size(h: usize, epsilon: f64) -> Result<u128> {
    let k = lattice_resolution(h, epsilon)? as u128;
    let mut c: u128 = 1;
    for i in 1..h as u128 {
        c = c.checked_mul(k + i).ok_or_else(|| param("net size overflows"))? / i;
    }
    Ok(c)
}

/// Largest net [`simplex_net`] will materialize.
pub const MAX_NET_POINTS: u128 = 10_000_000;

/// The lattice {k/K : Σk = K} with K = ⌈r_H/ε⌉, where r_H = 2⌊H/2⌋⌈H/2⌉/H
/// is the lattice's ℓ¹ covering radius in units of 1/K.
pub fn simplex_net(h: usize, epsilon: f64) -> Result<Vec<Vec<f64>>> {
    let size = simplex_net_size(h, epsilon)?;
    if size > MAX_NET_POINTS {
        return Err(param(format!("net of {size} points is too large to build")));
    }
    let k = lattice_resolution(h, epsilon)?;
    let mut out = Vec::with_capacity(size as usize);
    let mut cur = vec![0usize; h];
    fn rec(pos: usize, left: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if pos + 1 == cur.len() {
            cur[pos] = left;
            out.push(cur.iter().map(|&c| c as f64 / k as f64).collect());
            return;
        }
        for v in 0..=left {
            cur[pos] = v;
            rec(pos + 1, left - v, k, cur, out);
        }
    }
    rec(0, k, k, &mut cur, &mut out);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum NetSpec {
    Simplex { h: usize, epsilon: f64 },
    Orthogonal { d: usize, delta: f64 },
    LocationShell { d: usize, a_upper: f64, a_lower: f64, sigma: f64, epsilon: f64 },
    /// d eigenvalues each picked from an M-step ladder.
    EigenLadder { d: usize, m: f64 },
}

impl NetSpec {
    pub fn log_size(&self) -> Result<f64> {
        match *self {
            NetSpec::Simplex { h, epsilon } => Ok((simplex_net_size(h, epsilon)? as f64).ln()),
            NetSpec::Orthogonal { d, delta } => Ok(orthogonal_net_size_bound(d, delta)?.ln()),
            NetSpec::LocationShell { d, a_upper, a_lower, sigma, epsilon } => log_shell_net_size_bound(d, a_upper, a_lower, sigma, epsilon),
            NetSpec::EigenLadder { d, m } => {
                if !(m >= 1.0) {
                    return Err(param("M must be at least 1"));
                }
                Ok(d as f64 * m.ln())
            }
        }
    }
}

/// Sieve at sample size n.
#[derive(Debug, Clone, PartialEq)]
pub struct SieveParams {
    pub d: usize,
    pub epsilon: f64,
    pub h: usize,
    pub m: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Sieve-size constant C in H_n = ⌊Cnε²/log n⌋.
    pub c: f64,
    /// C₁ of the entropy bound.
    pub c_entropy: f64,
    pub n: f64,
}

impl SieveParams {
    /// M_n = σ_n^{−2c₂} = n, H_n = max(1, ⌊Cnε²/log n⌋), with c₁ = c₂ = c₃ = C₁ = 1.
    pub fn for_sample_size(d: usize, n: f64, epsilon: f64, alpha: f64, c: f64) -> Result<Self> {
        Self::with_constants(d, n, epsilon, alpha, c, 1.0, 1.0, 1.0)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_constants(d: usize, n: f64, epsilon: f64, alpha: f64, c: f64, c1: f64, c2: f64, c3: f64) -> Result<Self> {
        if !(n > 1.0) {
            return Err(param(format!("n must exceed 1, got {n}")));
        }
        check_pos(c, "C")?;
        check_pos(c2, "c2")?;
        let h = ((c * n * epsilon * epsilon / n.ln()).floor()).max(1.0) as usize;
        let p = SieveParams { d, epsilon, h, m: n, sigma: n.powf(-1.0 / (2.0 * c2)), alpha, c1, c2, c3, c, c_entropy: 1.0, n };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_eps(self.epsilon)?;
        if self.d == 0 || self.h == 0 {
            return Err(param("d and H must be at least 1"));
        }
        if !(self.m >= 1.0) {
            return Err(param("M must be at least 1"));
        }
        if !(self.n > 1.0) {
            return Err(param("n must exceed 1"));
        }
        for (v, name) in [
            (self.sigma, "sigma"),
            (self.alpha, "alpha"),
            (self.c1, "c1"),
            (self.c2, "c2"),
            (self.c3, "c3"),
            (self.c, "C"),
            (self.c_entropy, "C1"),
        ] {
            check_pos(v, name)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplementBound {
    /// {eα/H · log(1/ε)}^H.
    pub stick_term: f64,
    /// H[e^{−c₁σ^{−2c₂}} + σ^{−2c₃}(1+ε/√d)^{−c₃M}].
    pub atom_term: f64,
    pub total: f64,
    pub log_total: f64,
    /// Prior complement mass decays like e^{−bn} for any b below this.
    pub max_rate: f64,
}

fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

pub fn prior_complement_bound(p: &SieveParams) -> Result<ComplementBound> {
    p.validate()?;
    let h = p.h as f64;
    let d = p.d as f64;
    let log_stick = h * (std::f64::consts::E * p.alpha / h * (1.0 / p.epsilon).ln()).ln();
    let s2 = p.sigma.powf(-2.0 * p.c2);
    let la = -p.c1 * s2;
    let lb = -2.0 * p.c3 * p.sigma.ln() - p.c3 * p.m * (p.epsilon / d.sqrt()).ln_1p();
    let log_atom = h.ln() + logaddexp(la, lb);
    let log_total = logaddexp(log_stick, log_atom);
    let max_rate = (p.c * p.epsilon * p.epsilon / 2.0).min(p.c1).min(p.c3 * (p.epsilon / d.sqrt()).ln_1p());
    Ok(ComplementBound { stick_term: log_stick.exp(), atom_term: log_atom.exp(), total: log_total.exp(), log_total, max_rate })
}

/// Partition cell F_{n,j,l}: component h has √n(j_h−1) < ‖θ_h‖ ≤ √n j_h and
/// condition number in (n^{2^{l_h−1}}, n^{2^{l_h}}] for l_h ≥ 1, [1, n] for l_h = 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SieveCell {
    pub j: Vec<u64>,
    pub l: Vec<u32>,
}

impl SieveCell {
    pub fn new(j: Vec<u64>, l: Vec<u32>) -> Result<Self> {
        if j.is_empty() || j.len() != l.len() {
            return Err(param("j and l must have the same nonzero length"));
        }
        if j.contains(&0) {
            return Err(param("j entries must be positive"));
        }
        Ok(SieveCell { j, l })
    }

    pub fn h(&self) -> usize {
        self.j.len()
    }

    /// (lower, upper] bounds on ‖θ_h‖; j = 1 includes 0.
    pub fn location_shell(&self, h: usize, n: f64) -> (f64, f64) {
        let s = n.sqrt();
        (s * (self.j[h] - 1) as f64, s * self.j[h] as f64)
    }

    /// Bounds on the condition number of Σ_h; l = 0 includes 1.
    pub fn condition_shell(&self, h: usize, n: f64) -> (f64, f64) {
        let l = self.l[h];
        let hi = n.powf(2f64.powi(l as i32));
        let lo = if l == 0 { 1.0 } else { n.powf(2f64.powi(l as i32 - 1)) };
        (lo, hi)
    }

    pub fn contains(&self, theta_norms: &[f64], conds: &[f64], n: f64) -> bool {
        if theta_norms.len() != self.h() || conds.len() != self.h() {
            return false;
        }
        (0..self.h()).all(|h| {
            let (a, b) = self.location_shell(h, n);
            let (lo, hi) = self.condition_shell(h, n);
            let t = theta_norms[h];
            let z = conds[h];
            let loc_ok = if self.j[h] == 1 { t >= 0.0 && t <= b } else { t > a && t <= b };
            let cond_ok = if self.l[h] == 0 { z >= 1.0 && z <= hi } else { z > lo && z <= hi };
            loc_ok && cond_ok
        })
    }
}

/// The cell holding components with the given location norms and
/// condition numbers.
pub fn cell_of(theta_norms: &[f64], conds: &[f64], n: f64) -> Result<SieveCell> {
    if !(n > 1.0) {
        return Err(param("n must exceed 1"));
    }
    if theta_norms.len() != conds.len() || conds.is_empty() {
        return Err(param("norms and condition numbers must have the same nonzero length"));
    }
    let s = n.sqrt();
    let mut j = Vec::with_capacity(conds.len());
    let mut l = Vec::with_capacity(conds.len());
    for (&t, &z) in theta_norms.iter().zip(conds) {
        if !(t >= 0.0 && t.is_finite()) || !(z >= 1.0 && z.is_finite()) {
            return Err(param(format!("need finite norm >= 0 and condition number >= 1, got ({t}, {z})")));
        }
        let mut jj = ((t / s).ceil() as u64).max(1);
        // correct the float division at shell edges
        while jj > 1 && t <= s * (jj - 1) as f64 {
            jj -= 1;
        }
        while t > s * jj as f64 {
            jj += 1;
        }
        j.push(jj);
        let mut ll = 0u32;
        while z > n.powf(2f64.powi(ll as i32)) {
            ll += 1;
        }
        l.push(ll);
    }
    SieveCell::new(j, l)
}

/// log of ∏_h [√n(j_h−1)]^{−2(r+1)} · n^{−1(l_h≥1) 2^{l_h−1} κ}, each
/// factor multiplied by its tail constant and capped at 1; j_h = 1 gives 1.
pub fn log_cell_prior_mass_bound(cell: &SieveCell, req: &TailRequirements, n: f64) -> Result<f64> {
    if !(n > 1.0) {
        return Err(param("n must exceed 1"));
    }
    check_pos(req.loc_const, "loc_const")?;
    check_pos(req.cond_const, "cond_const")?;
    let mut out = 0.0;
    for h in 0..cell.h() {
        if cell.j[h] >= 2 {
            let x = n.sqrt() * (cell.j[h] - 1) as f64;
            out += (req.loc_const.ln() - 2.0 * (req.r + 1.0) * x.ln()).min(0.0);
        }
        if cell.l[h] >= 1 {
            let e = 2f64.powi(cell.l[h] as i32 - 1) * req.kappa;
            out += (req.cond_const.ln() - e * n.ln()).min(0.0);
        }
    }
    Ok(out)
}

pub fn cell_prior_mass_bound(cell: &SieveCell, req: &TailRequirements, n: f64) -> Result<f64> {
    Ok(log_cell_prior_mass_bound(cell, req, n)?.exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummabilityReport {
    /// r ≤ (d−1)/2 or κ ≤ d(d−1): the series diverges and the logs are +∞.
    pub diverges: bool,
    pub reasons: Vec<String>,
    /// log of the bounding series, truncated sums plus analytic tails.
    pub log_value: f64,
    /// log of the truncated sums alone.
    pub log_partial: f64,
    /// Tail bounds on the j and l sums beyond the truncation.
    pub j_tail: f64,
    pub l_tail: f64,
    /// c₄ = 1/2 + 1/(2c₂).
    pub c4: f64,
    /// 2(4−c)/(c₄d + (d−1)(d+1)/2); the series vanishes as n → ∞ when C < C_max.
    pub c_max: f64,
}

impl SummabilityReport {
    pub fn c_ok(&self, c: f64) -> bool {
        c < self.c_max
    }
}

/// Bound on Σ_{j,l} √N(2ε, F_{n,j,l}) √Π(F_{n,j,l}) e^{−(4−c)nε²}.
///
/// The cell sum factorizes over components, so with c₄ = 1/2 + 1/(2c₂)
/// log S = −(4−c)nε² + (dH/2) log n + (H/2) log(C₁/ε) + H log A_j + H log A_l,
/// A_j = (n^{c₄d}/ε^d)^{1/2} [1 + n^{−(r+1)/2} Σ_{j≥2} j^{(d−1)/2}(j−1)^{−(r+1)}],
/// A_l = (2d/ε²)^{d(d−1)/4} Σ_{l≥0} n^{2^l d(d−1)/4 − 1(l≥1) 2^{l−2} κ}.
/// The sums run to `j_max` and `l_max`, and the tails beyond them are bounded
/// by 2^{(d−1)/2}(J^{−p} + J^{1−p}/(p−1)) with p = r+1−(d−1)/2, and by
/// e^{−q(L+1)}/(1−e^{−q}) with q = (κ−d(d−1))/2 · log n.
pub fn summability_series(p: &SieveParams, req: &TailRequirements, c: f64, truncation: (usize, usize)) -> Result<SummabilityReport> {
    p.validate()?;
    let (j_max, l_max) = truncation;
    if j_max < 1 || l_max < 1 {
        return Err(param("truncation must be at least 1 in both indices"));
    }
    if p.d != req.d {
        return Err(param(format!("dimension mismatch: sieve d = {}, requirements d = {}", p.d, req.d)));
    }
    if !(c.is_finite() && c < 4.0) {
        return Err(param(format!("c must be below 4, got {c}")));
    }
    let d = p.d as f64;
    let c4 = 0.5 + 1.0 / (2.0 * p.c2);
    let c_max = 2.0 * (4.0 - c) / (c4 * d + (d - 1.0) * (d + 1.0) / 2.0);
    let mut reasons = Vec::new();
    if !req.r_ok() {
        reasons.push(format!("r = {} <= (d-1)/2 = {}", req.r, req.r_threshold()));
    }
    if !req.kappa_ok() {
        reasons.push(format!("kappa = {} <= d(d-1) = {}", req.kappa, req.kappa_threshold()));
    }
    if !reasons.is_empty() {
        return Ok(SummabilityReport {
            diverges: true,
            reasons,
            log_value: f64::INFINITY,
            log_partial: f64::INFINITY,
            j_tail: f64::INFINITY,
            l_tail: f64::INFINITY,
            c4,
            c_max,
        });
    }
    let n = p.n;
    let ln_n = n.ln();
    let eps = p.epsilon;
    let h = p.h as f64;
    let r1 = req.r + 1.0;

    let jsum: f64 = (2..=j_max).map(|j| (j as f64).powf((d - 1.0) / 2.0) * ((j - 1) as f64).powf(-r1)).sum();
    let pexp = r1 - (d - 1.0) / 2.0;
    let jj = j_max as f64;
    let j_tail = 2f64.powf((d - 1.0) / 2.0) * (jj.powf(-pexp) + jj.powf(1.0 - pexp) / (pexp - 1.0));
    let log_aj_base = 0.5 * (c4 * d * ln_n - d * eps.ln());
    let damp = (-r1 / 2.0 * ln_n).exp();
    let log_aj_partial = log_aj_base + (damp * jsum).ln_1p();
    let log_aj = log_aj_base + (damp * (jsum + j_tail)).ln_1p();

    let rot = d * (d - 1.0) / 4.0;
    let lterm = |l: usize| -> f64 {
        let pw = 2f64.powi(l as i32);
        let dec = if l >= 1 { pw / 4.0 * req.kappa } else { 0.0 };
        (rot * pw - dec) * ln_n
    };
    let log_lsum = (0..=l_max).map(lterm).fold(f64::NEG_INFINITY, logaddexp);
    let q = (req.kappa - d * (d - 1.0)) / 2.0 * ln_n;
    let l_tail = (-q * (l_max as f64 + 1.0)).exp() / (-(-q).exp_m1());
    let log_al_base = rot * (2.0 * d / (eps * eps)).ln();
    let log_al_partial = log_al_base + log_lsum;
    let log_al = log_al_base + logaddexp(log_lsum, l_tail.ln());

    let common = -(4.0 - c) * n * eps * eps + 0.5 * d * h * ln_n + 0.5 * h * (p.c_entropy / eps).ln();
    Ok(SummabilityReport {
        diverges: false,
        reasons,
        log_value: common + h * (log_aj + log_al),
        log_partial: common + h * (log_aj_partial + log_al_partial),
        j_tail,
        l_tail,
        c4,
        c_max,
    })
}

/// Default truncation of the series.
pub const DEFAULT_TRUNCATION: (usize, usize) = (50, 10);
