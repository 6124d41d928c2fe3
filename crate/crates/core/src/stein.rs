//! Bilateral birth–death machinery behind the Stein equation for `Ψ_κ(μ, σ²)`.
//!
//! The generator is `A g(i) = α_i (g(i+1) − g(i)) + β_i (g(i−1) − g(i))` with
//!
//! ```text
//! α_i = σ²            i ≥ κ        β_i = σ² + i − μ   i ≥ κ
//! α_i = σ² + μ − i    i ≤ κ − 1    β_i = σ²           i ≤ κ − 1
//! ```
//!
//! and `Ψ_κ(μ, σ²)` satisfies detailed balance `α_i π_i = β_{i+1} π_{i+1}`.
//! Solutions of `A g_A = 1_A − P(S ∈ A)` are tabulated through their first
//! differences `f_A(i) = g_A(i) − g_A(i−1)`, which have a closed form in
//! partial sums of `π`. Infinite partial sums use the represented window plus
//! the rigorous tail bound of the computed law, so they err on the large side.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;

use crate::dist::IntDist;
use crate::error::{Error, Result};
use crate::numeric::{csum, CompensatedSum};
use crate::psi::{Psi, PsiParams};

/// Birth and death rates of the chain whose stationary law is `Ψ_κ(μ, σ²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BDRates {
    pub params: PsiParams,
}

impl BDRates {
    /// Birth rate `α_i`.
    pub fn alpha(&self, i: i64) -> f64 {
        let p = &self.params;
        if i >= p.kappa {
            p.sigma2
        } else {
            p.sigma2 + p.mu - i as f64
        }
    }

    /// Death rate `β_i`.
    pub fn beta(&self, i: i64) -> f64 {
        let p = &self.params;
        if i == p.kappa {
            p.beta_at_kappa()
        } else if i > p.kappa {
            p.sigma2 + i as f64 - p.mu
        } else {
            p.sigma2
        }
    }

    pub fn is_ergodic(&self) -> bool {
        self.params.is_ergodic()
    }
}

pub fn rates(p: &PsiParams) -> BDRates {
    BDRates { params: *p }
}

/// Largest relative violation of `α_i π_i = β_{i+1} π_{i+1}` across the
/// window of `pi`.
pub fn balance_residual(r: &BDRates, pi: &IntDist) -> f64 {
    let mut worst: f64 = 0.0;
    for i in pi.min_support()..pi.max_support() {
        let lhs = r.alpha(i) * pi.pmf(i);
        let rhs = r.beta(i + 1) * pi.pmf(i + 1);
        worst = worst.max((lhs - rhs).abs() / (lhs + f64::MIN_POSITIVE));
    }
    worst
}

pub fn check_balance(p: &PsiParams) -> Result<f64> {
    let psi = Psi::new(*p)?;
    Ok(balance_residual(&rates(p), psi.dist()))
}

/// Target set for the Stein equation: a finite set or the complement of one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "points", rename_all = "lowercase")]
pub enum TargetSet {
    Finite(BTreeSet<i64>),
    Cofinite(BTreeSet<i64>),
}

impl TargetSet {
    pub fn finite(points: impl IntoIterator<Item = i64>) -> Self {
        TargetSet::Finite(points.into_iter().collect())
    }

    /// Everything except `points`.
    pub fn complement_of(points: impl IntoIterator<Item = i64>) -> Self {
        TargetSet::Cofinite(points.into_iter().collect())
    }

    pub fn all() -> Self {
        TargetSet::Cofinite(BTreeSet::new())
    }

    pub fn contains(&self, i: i64) -> bool {
        match self {
            TargetSet::Finite(s) => s.contains(&i),
            TargetSet::Cofinite(s) => !s.contains(&i),
        }
    }

    pub fn complement(&self) -> Self {
        match self {
            TargetSet::Finite(s) => TargetSet::Cofinite(s.clone()),
            TargetSet::Cofinite(s) => TargetSet::Finite(s.clone()),
        }
    }
}

/// Tabulated Stein solution for one parameter set and target.
#[derive(Debug, Clone, Serialize)]
pub struct SteinTable {
    pub params: PsiParams,
    pub target: TargetSet,
    /// `f`, `g` are indexed by `i_min..=i_max`.
    pub i_min: i64,
    pub i_max: i64,
    pub f: Vec<f64>,
    /// `delta_f[k] = f[k+1] − f[k]`, indexed by `i_min..i_max`.
    pub delta_f: Vec<f64>,
    /// `g(i_min) = 0`, `g(i) − g(i−1) = f(i)`.
    pub g: Vec<f64>,
    /// `P(S ∈ A)` over the window.
    pub prob_target: f64,
}

impl SteinTable {
    pub fn f_at(&self, i: i64) -> Option<f64> {
        (self.i_min..=self.i_max).contains(&i).then(|| self.f[(i - self.i_min) as usize])
    }

    pub fn delta_f_at(&self, i: i64) -> Option<f64> {
        (self.i_min..self.i_max).contains(&i).then(|| self.delta_f[(i - self.i_min) as usize])
    }

    /// `h_A(i) = 1_A(i) − P(S ∈ A)`.
    pub fn h(&self, i: i64) -> f64 {
        (if self.target.contains(i) { 1.0 } else { 0.0 }) - self.prob_target
    }

    /// Largest `|A g(i) − h_A(i)|` over interior points `i_min < i < i_max`.
    pub fn identity_residual(&self) -> f64 {
        let r = rates(&self.params);
        let g = |i: i64| self.g[(i - self.i_min) as usize];
        ((self.i_min + 1)..self.i_max)
            .map(|i| {
                let ag = r.alpha(i) * (g(i + 1) - g(i)) + r.beta(i) * (g(i - 1) - g(i));
                (ag - self.h(i)).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Partial sums of the computed stationary law over its window.
struct Sums {
    lo: i64,
    pi: Vec<f64>,
    /// `Σ_{l ≤ lo + k} π_l` plus the lower tail bound.
    below: Vec<f64>,
    /// `Σ_{l ≥ lo + k} π_l` plus the upper tail bound.
    above: Vec<f64>,
}

impl Sums {
    fn new(psi: &Psi) -> Self {
        let d = psi.dist();
        let pi = d.weights().to_vec();
        let n = pi.len();
        let mut below = vec![0.0; n];
        let mut acc = CompensatedSum::new();
        acc.add(psi.tail_below());
        for k in 0..n {
            acc.add(pi[k]);
            below[k] = acc.value();
        }
        let mut above = vec![0.0; n];
        let mut acc = CompensatedSum::new();
        acc.add(psi.tail_above());
        for k in (0..n).rev() {
            acc.add(pi[k]);
            above[k] = acc.value();
        }
        Self { lo: d.min_support(), pi, below, above }
    }
}

fn require_ergodic(p: &PsiParams) -> Result<()> {
    if p.is_ergodic() {
        Ok(())
    } else {
        Err(Error::NonErgodic)
    }
}

/// First differences of `g_A` for a finite target, over `lo+1..=hi`.
fn f_finite(points: &BTreeSet<i64>, sums: &Sums, r: &BDRates) -> (Vec<f64>, f64) {
    let n = sums.pi.len();
    let in_a: Vec<f64> = (0..n)
        .map(|k| if points.contains(&(sums.lo + k as i64)) { sums.pi[k] } else { 0.0 })
        .collect();
    // a_ge[k] = Σ_{j ∈ A, j ≥ lo+k} π_j, a_lt[k] = Σ_{j ∈ A, j < lo+k} π_j
    let mut a_ge = vec![0.0; n + 1];
    let mut acc = CompensatedSum::new();
    for k in (0..n).rev() {
        acc.add(in_a[k]);
        a_ge[k] = acc.value();
    }
    let mut a_lt = vec![0.0; n + 1];
    let mut acc = CompensatedSum::new();
    for k in 0..n {
        a_lt[k] = acc.value();
        acc.add(in_a[k]);
    }
    let prob = acc.value();
    let f = (1..n)
        .map(|k| {
            let i = sums.lo + k as i64;
            let down = a_ge[k] * sums.below[k - 1] / (r.alpha(i - 1) * sums.pi[k - 1]);
            let up = a_lt[k] * sums.above[k] / (r.beta(i) * sums.pi[k]);
            up - down
        })
        .collect();
    (f, prob)
}

/// Tabulate the Stein solution for target `a` over the represented window.
/// Window cutoff for stationary tables behind Stein solutions. `f_A` only
/// involves ratios such as `Σ_{l ≥ i} π_l / π_i`, which stay well conditioned
/// far into the tails, so the table reaches much further than a plain pmf.
pub const STEIN_EPS: f64 = 1e-250;

fn stein_psi(p: &PsiParams) -> Result<Psi> {
    Psi::new(p.with_eps(p.eps.min(STEIN_EPS))?)
}

pub fn stein_solution(p: &PsiParams, a: &TargetSet) -> Result<SteinTable> {
    require_ergodic(p)?;
    stein_solution_for(&stein_psi(p)?, a)
}

pub fn stein_solution_for(psi: &Psi, a: &TargetSet) -> Result<SteinTable> {
    let p = *psi.params();
    require_ergodic(&p)?;
    let sums = Sums::new(psi);
    if sums.pi.len() < 3 {
        return Err(Error::InvalidTarget("stationary window has fewer than three points".into()));
    }
    let r = rates(&p);
    let (f, prob_target) = match a {
        TargetSet::Finite(s) => f_finite(s, &sums, &r),
        TargetSet::Cofinite(s) => {
            // h over the whole line vanishes, so f for a complement is −f.
            let (f, prob) = f_finite(s, &sums, &r);
            (f.into_iter().map(|v| -v).collect(), 1.0 - prob)
        }
    };
    let i_min = sums.lo + 1;
    let i_max = sums.lo + sums.pi.len() as i64 - 1;
    let delta_f = f.windows(2).map(|w| w[1] - w[0]).collect();
    let mut g = Vec::with_capacity(f.len());
    let mut acc = CompensatedSum::new();
    g.push(0.0);
    for v in &f[1..] {
        acc.add(*v);
        g.push(acc.value());
    }
    Ok(SteinTable { params: p, target: a.clone(), i_min, i_max, f, delta_f, g, prob_target })
}

/// `(1 − π_i)/(α_i ∧ β_i) ∧ 1/α_i ∧ 1/β_i`.
pub fn stein_factor_bound(r: &BDRates, pi_i: f64, i: i64) -> f64 {
    let (a, b) = (r.alpha(i), r.beta(i));
    ((1.0 - pi_i) / a.min(b)).min(1.0 / a).min(1.0 / b)
}

/// Outcome of comparing `|Δf_A|` with the Stein factor bounds.
#[derive(Debug, Clone, Serialize)]
pub struct SteinFactorReport {
    pub params: PsiParams,
    #[serde(rename = "A")]
    pub target: TargetSet,
    /// `max_i |Δf_A(i)|`.
    pub max_delta_f: f64,
    /// Bound at the point where the ratio peaks.
    pub bound: f64,
    /// `max_i |Δf_A(i)| / bound_i`.
    pub ratio: f64,
    /// Same ratio against the weaker `(1 − π_i)/σ²`.
    pub weak_ratio: f64,
    pub holds: bool,
}

/// Relative slack allowed when comparing against the Stein factor bound.
pub const STEIN_FACTOR_TOL: f64 = 1e-10;

pub fn stein_factor_check(p: &PsiParams, a: &TargetSet) -> Result<SteinFactorReport> {
    if !p.is_default_kappa() {
        return Err(Error::NonDefaultKappa { kappa: p.kappa, default: crate::psi::default_kappa(p.mu) });
    }
    let psi = stein_psi(p)?;
    let table = stein_solution_for(&psi, a)?;
    Ok(factor_report(&psi, &table))
}

pub(crate) fn factor_report(psi: &Psi, table: &SteinTable) -> SteinFactorReport {
    let p = *psi.params();
    let r = rates(&p);
    let mut max_delta_f: f64 = 0.0;
    let mut ratio: f64 = 0.0;
    let mut bound_at = f64::INFINITY;
    let mut weak_ratio: f64 = 0.0;
    for (k, df) in table.delta_f.iter().enumerate() {
        let i = table.i_min + k as i64;
        let pi_i = psi.pi(i);
        let b = stein_factor_bound(&r, pi_i, i);
        let q = df.abs() / b;
        if q > ratio {
            ratio = q;
            bound_at = b;
        }
        max_delta_f = max_delta_f.max(df.abs());
        weak_ratio = weak_ratio.max(df.abs() / ((1.0 - pi_i) / p.sigma2));
    }
    SteinFactorReport {
        params: p,
        target: table.target.clone(),
        max_delta_f,
        bound: bound_at,
        ratio,
        weak_ratio,
        holds: ratio <= 1.0 + STEIN_FACTOR_TOL && weak_ratio <= 1.0 + STEIN_FACTOR_TOL,
    }
}

/// Which neighbour ends the excursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Until the chain first hits `i + 1`.
    Up,
    /// Until the chain first hits `i − 1`.
    Down,
}

/// Expected time the chain started at `i` spends in `[k1, k2]` before it
/// first hits `i − 1` (down) or `i + 1` (up). `None` bounds are infinite.
pub fn occupation_time(p: &PsiParams, i: i64, dir: Direction, k1: Option<i64>, k2: Option<i64>) -> Result<f64> {
    require_ergodic(p)?;
    if let (Some(a), Some(b)) = (k1, k2) {
        if a > b {
            return Err(Error::InvalidArgument(format!("empty window [{a}, {b}]")));
        }
    }
    let psi = Psi::new(*p)?;
    let d = psi.dist();
    let (lo, hi) = (d.min_support(), d.max_support());
    if i < lo || i > hi {
        return Err(Error::OutsideWindow { state: i, lo, hi });
    }
    let r = rates(p);
    let pi_i = d.pmf(i);
    let window_sum = |from: i64, to: i64| -> f64 {
        let (a, b) = (from.max(lo), to.min(hi));
        if a > b {
            0.0
        } else {
            csum((a..=b).map(|l| d.pmf(l)))
        }
    };
    Ok(match dir {
        Direction::Down => {
            if k2.is_some_and(|k2| i > k2) {
                return Ok(0.0);
            }
            let from = k1.map_or(i, |k1| k1.max(i));
            let mut s = window_sum(from, k2.unwrap_or(hi));
            if k2.is_none() {
                s += psi.tail_above();
            }
            s / (r.beta(i) * pi_i)
        }
        Direction::Up => {
            if k1.is_some_and(|k1| i < k1) {
                return Ok(0.0);
            }
            let to = k2.map_or(i, |k2| k2.min(i));
            let mut s = window_sum(k1.unwrap_or(lo), to);
            if k1.is_none() {
                s += psi.tail_below();
            }
            s / (r.alpha(i) * pi_i)
        }
    })
}

/// Where each simulated replica starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Start {
    State(i64),
    /// Drawn from the stationary law.
    Stationary,
}

/// When a replica stops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StopRule {
    /// First visit to `start − 1`.
    HitBelow,
    /// First visit to `start + 1`.
    HitAbove,
    /// Fixed time horizon; the estimate is the occupied fraction of it.
    Horizon(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BDPSimConfig {
    pub seed: u64,
    pub replicas: usize,
    pub start: Start,
    pub stop: StopRule,
    /// Occupation window; `None` ends are infinite.
    pub k1: Option<i64>,
    pub k2: Option<i64>,
    /// Replicas may not move further than this from `κ`.
    pub state_cap: i64,
}

pub const DEFAULT_STATE_CAP: i64 = 10_000;

impl BDPSimConfig {
    pub fn new(seed: u64, replicas: usize, start: Start, stop: StopRule) -> Self {
        Self { seed, replicas, start, stop, k1: None, k2: None, state_cap: DEFAULT_STATE_CAP }
    }

    pub fn window(mut self, k1: Option<i64>, k2: Option<i64>) -> Self {
        self.k1 = k1;
        self.k2 = k2;
        self
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub seed: u64,
    pub replicas: usize,
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replica `index` under root seed `seed`.
pub fn replica_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_mul(GOLDEN_GAMMA)))
}

fn sample_stationary(d: &IntDist, rng: &mut ChaCha8Rng) -> i64 {
    let u: f64 = rng.random::<f64>() * d.total_mass();
    let mut acc = 0.0;
    for (j, p) in d.iter() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    d.max_support()
}

fn run_replica(r: &BDRates, cfg: &BDPSimConfig, stationary: Option<&IntDist>, index: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(replica_seed(cfg.seed, index));
    let start = match (cfg.start, stationary) {
        (Start::State(s), _) => s,
        (Start::Stationary, Some(d)) => sample_stationary(d, &mut rng),
        (Start::Stationary, None) => unreachable!("stationary law prepared by caller"),
    };
    let in_window = |s: i64| cfg.k1.is_none_or(|k| s >= k) && cfg.k2.is_none_or(|k| s <= k);
    let kappa = r.params.kappa;
    let mut state = start;
    let mut t = 0.0;
    let mut occupied = 0.0;
    loop {
        let (a, b) = (r.alpha(state), r.beta(state));
        let total = a + b;
        let hold = rng.sample::<f64, _>(Exp1) / total;
        if let StopRule::Horizon(h) = cfg.stop {
            if t + hold >= h {
                if in_window(state) {
                    occupied += h - t;
                }
                return Ok(occupied / h);
            }
        }
        if in_window(state) {
            occupied += hold;
        }
        t += hold;
        let u: f64 = rng.random();
        state += if u * total < a { 1 } else { -1 };
        if (state - kappa).abs() > cfg.state_cap {
            return Err(Error::StateCapExceeded { state, cap: cfg.state_cap });
        }
        match cfg.stop {
            StopRule::HitBelow if state == start - 1 => return Ok(occupied),
            StopRule::HitAbove if state == start + 1 => return Ok(occupied),
            _ => {}
        }
    }
}

/// Simulate the chain and estimate the configured occupation time.
/// Replica `k` draws from its own stream seeded by [`replica_seed`], and the
/// results are combined in replica order, so output depends only on the seed.
pub fn bdp_simulate(p: &PsiParams, cfg: &BDPSimConfig) -> Result<SimEstimate> {
    require_ergodic(p)?;
    if cfg.replicas == 0 {
        return Err(Error::ZeroReplicas);
    }
    if let StopRule::Horizon(h) = cfg.stop {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {h}")));
        }
    }
    let r = rates(p);
    let stationary = match cfg.start {
        Start::Stationary => Some(Psi::new(*p)?.into_dist()),
        Start::State(_) => None,
    };
    let samples = (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|k| run_replica(&r, cfg, stationary.as_ref(), k))
        .collect::<Result<Vec<f64>>>()?;
    let n = samples.len() as f64;
    let mean = csum(samples.iter().copied()) / n;
    let var = if samples.len() > 1 { csum(samples.iter().map(|x| (x - mean) * (x - mean))) / (n - 1.0) } else { 0.0 };
    Ok(SimEstimate { estimate: mean, std_error: (var / n).sqrt(), seed: cfg.seed, replicas: cfg.replicas })
}
