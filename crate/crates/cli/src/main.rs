use std::fmt;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use discrete_clt::bounds::{bound_report, fmt_real, BoundOptions, BoundReport, CSV_COLUMNS};
use discrete_clt::dist::{set_support_cap, IntDist};
use discrete_clt::psi::{Psi, PsiParams, DEFAULT_EPS};
use discrete_clt::stein::{
    bdp_simulate, occupation_time, stein_factor_check, BDPSimConfig, Direction, SteinFactorReport, Start, StopRule,
    TargetSet,
};
use discrete_clt::zero_bias::{sum_zero_bias, zero_bias, ComponentSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

const EXIT_FAILURE: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_SUPPORT_CAP: u8 = 3;

#[derive(Parser)]
#[command(name = "discrete-clt", version, about = "Discrete CLT approximations on the integers")]
struct Cli {
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the pmf of Ψ_κ(μ, σ²).
    Psi(PsiArgs),
    /// Zero-biased law of a component sum, or of Ψ itself.
    ZeroBias(ZeroBiasArgs),
    /// Compare Stein solutions against the Stein factor bounds.
    SteinCheck(SteinArgs),
    /// All bounds and exact distances for a component set.
    Bound(BoundArgs),
    /// Bounds over a grid of indicator sums.
    Sweep(SweepArgs),
    /// Monte Carlo estimate of an occupation time of the birth-death chain.
    Simulate(SimArgs),
}

#[derive(Args, Clone)]
struct ParamArgs {
    #[arg(long, allow_hyphen_values = true)]
    mu: f64,
    #[arg(long, allow_hyphen_values = true)]
    sigma2: f64,
    #[arg(long, allow_hyphen_values = true)]
    kappa: Option<i64>,
    #[arg(long, default_value_t = DEFAULT_EPS)]
    eps: f64,
}

impl ParamArgs {
    fn params(&self) -> discrete_clt::Result<PsiParams> {
        let p = match self.kappa {
            Some(k) => PsiParams::with_kappa(self.mu, self.sigma2, k)?,
            None => PsiParams::new(self.mu, self.sigma2)?,
        };
        p.with_eps(self.eps)
    }
}

#[derive(Args)]
struct PsiArgs {
    #[command(flatten)]
    p: ParamArgs,
}

#[derive(Args)]
struct ZeroBiasArgs {
    /// JSON file with the components (see README).
    #[arg(long, conflicts_with_all = ["mu", "sigma2"])]
    components: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true, requires = "sigma2")]
    mu: Option<f64>,
    #[arg(long, allow_hyphen_values = true, requires = "mu")]
    sigma2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    kappa: Option<i64>,
    #[arg(long, default_value_t = DEFAULT_EPS)]
    eps: f64,
}

#[derive(Args)]
struct SteinArgs {
    #[command(flatten)]
    p: ParamArgs,
    /// Number of random target sets.
    #[arg(long, conflicts_with = "set")]
    random_sets: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Explicit target set, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    set: Option<String>,
    /// Use the complement of the given set.
    #[arg(long, requires = "set")]
    complement: bool,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long)]
    components: PathBuf,
    /// Truncation level; omitted means infinite.
    #[arg(long = "K")]
    k: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_EPS)]
    eps: f64,
}

#[derive(Args)]
struct SweepArgs {
    /// Sums of iid indicators (the only sweep family).
    #[arg(long, required = true)]
    bernoulli: bool,
    /// Numbers of summands, comma separated.
    #[arg(long)]
    n: String,
    /// Success probabilities: `start:end:step` (inclusive) or a comma list.
    #[arg(long)]
    p: String,
    #[arg(long = "K")]
    k: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_EPS)]
    eps: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Stop {
    /// Until the first visit to state − 1.
    Down,
    /// Until the first visit to state + 1.
    Up,
    /// Fixed horizon; estimates the occupied fraction.
    Horizon,
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    p: ParamArgs,
    /// Start state; omitted means a stationary start.
    #[arg(long, allow_hyphen_values = true)]
    state: Option<i64>,
    #[arg(long, value_enum, default_value = "down")]
    stop: Stop,
    #[arg(long, default_value_t = 10.0)]
    horizon: f64,
    #[arg(long, allow_hyphen_values = true)]
    k1: Option<i64>,
    #[arg(long, allow_hyphen_values = true)]
    k2: Option<i64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    replicas: usize,
}

/// A malformed request, as opposed to a failed computation.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage_err(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ComponentFile {
    List(Vec<IntDist>),
    Wrapped { components: Vec<IntDist> },
    Iid { iid: IntDist, n: usize },
}

fn load_components(path: &PathBuf) -> Result<ComponentSet> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let parsed: ComponentFile = serde_json::from_str(&text)
        .map_err(|e| usage_err(format!("{}: not a component list of integer laws ({e})", path.display())))?;
    let comps = match parsed {
        ComponentFile::List(v) | ComponentFile::Wrapped { components: v } => v,
        ComponentFile::Iid { iid, n } => vec![iid; n],
    };
    Ok(ComponentSet::new(comps)?)
}

/// First 16 hex digits of the SHA-256 of the components' canonical JSON.
fn component_hash(cs: &ComponentSet) -> String {
    let bytes = serde_json::to_vec(cs.components()).expect("serializable");
    let digest = format!("{:x}", Sha256::digest(&bytes));
    digest[..16].to_string()
}

fn to_csv<R, F>(header: &[&str], rows: R) -> Result<String>
where
    R: IntoIterator<Item = F>,
    F: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    let v = s
        .split(',')
        .map(|x| x.trim().parse::<T>().map_err(|_| usage_err(format!("bad {what} value {x:?}"))))
        .collect::<Result<Vec<T>>>()?;
    if v.is_empty() {
        return Err(usage_err(format!("empty {what} grid")));
    }
    Ok(v)
}

/// `start:end:step` with the end included when within 1e-12 of a grid point.
fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 1 {
        return parse_list(s, "grid");
    }
    if parts.len() != 3 {
        return Err(usage_err(format!("grid {s:?} is not start:end:step")));
    }
    let num = |x: &str| x.trim().parse::<f64>().map_err(|_| usage_err(format!("bad grid number {x:?}")));
    let (a, b, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
    if !(step > 0.0) || !a.is_finite() || !b.is_finite() || b < a {
        return Err(usage_err(format!("empty or invalid grid {s:?}")));
    }
    let count = ((b - a) / step + 1e-12).floor() as usize + 1;
    Ok((0..count)
        .map(|k| {
            let x = a + k as f64 * step;
            // Strip accumulated representation error so 0.1:0.9:0.1 yields 0.3, not 0.30000000000000004.
            format!("{x:.12}").parse().unwrap()
        })
        .collect())
}

struct Emitted {
    json: serde_json::Value,
    csv: String,
}

fn dist_csv(d: &IntDist) -> Result<String> {
    to_csv(&["j", "pmf"], d.iter().map(|(j, p)| [j.to_string(), fmt_real(p)]))
}

fn dist_json(d: &IntDist) -> serde_json::Value {
    serde_json::to_value(d).expect("serializable")
}

fn run_psi(a: &PsiArgs) -> Result<Emitted> {
    let psi = Psi::new(a.p.params()?)?;
    let mut v = dist_json(psi.dist());
    v["metadata"] = serde_json::to_value(psi.metadata())?;
    Ok(Emitted { json: v, csv: dist_csv(psi.dist())? })
}

fn run_zero_bias(a: &ZeroBiasArgs) -> Result<Emitted> {
    let d = match (&a.components, a.mu, a.sigma2) {
        (Some(path), _, _) => {
            let cs = load_components(path)?;
            if cs.len() == 1 {
                zero_bias(&cs.components()[0])?
            } else {
                sum_zero_bias(&cs)?
            }
        }
        (None, Some(mu), Some(s2)) => {
            let p = match a.kappa {
                Some(k) => PsiParams::with_kappa(mu, s2, k)?,
                None => PsiParams::new(mu, s2)?,
            };
            Psi::new(p.with_eps(a.eps)?)?.zero_bias()?
        }
        _ => return Err(usage_err("zero-bias needs --components or --mu and --sigma2")),
    };
    Ok(Emitted { json: dist_json(&d), csv: dist_csv(&d)? })
}

#[derive(Serialize)]
struct SteinSummary {
    mu: f64,
    sigma2: f64,
    kappa: i64,
    seed: Option<u64>,
    checked: usize,
    violations: usize,
    holds: bool,
    max_ratio: f64,
    max_weak_ratio: f64,
    worst: SteinFactorReport,
}

fn random_target(rng: &mut ChaCha8Rng, p: &PsiParams) -> TargetSet {
    let spread = (3.0 * p.sigma2.sqrt()).ceil() as i64 + 2;
    let k = rng.random_range(1..=8);
    let pts: Vec<i64> = (0..k).map(|_| p.kappa + rng.random_range(-spread..=spread)).collect();
    if rng.random_bool(0.3) {
        TargetSet::complement_of(pts)
    } else {
        TargetSet::finite(pts)
    }
}

fn run_stein(a: &SteinArgs) -> Result<Emitted> {
    let p = a.p.params()?;
    let (targets, seed) = match (&a.set, a.random_sets) {
        (Some(s), _) => {
            let pts = parse_list::<i64>(s, "set")?;
            let t = if a.complement { TargetSet::complement_of(pts) } else { TargetSet::finite(pts) };
            (vec![t], None)
        }
        (None, Some(0)) => return Err(usage_err("--random-sets must be positive")),
        (None, Some(n)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            ((0..n).map(|_| random_target(&mut rng, &p)).collect(), Some(a.seed))
        }
        (None, None) => return Err(usage_err("stein-check needs --set or --random-sets")),
    };
    let reports = targets
        .par_iter()
        .map(|t| stein_factor_check(&p, t))
        .collect::<discrete_clt::Result<Vec<_>>>()?;
    let worst = reports
        .iter()
        .max_by(|x, y| x.ratio.total_cmp(&y.ratio))
        .cloned()
        .expect("at least one target");
    let s = SteinSummary {
        mu: p.mu,
        sigma2: p.sigma2,
        kappa: p.kappa,
        seed,
        checked: reports.len(),
        violations: reports.iter().filter(|r| !r.holds).count(),
        holds: reports.iter().all(|r| r.holds),
        max_ratio: worst.ratio,
        max_weak_ratio: reports.iter().map(|r| r.weak_ratio).fold(0.0, f64::max),
        worst,
    };
    let csv = to_csv(
        &["mu", "sigma2", "kappa", "checked", "violations", "holds", "max_ratio", "max_weak_ratio"],
        [[
            fmt_real(s.mu),
            fmt_real(s.sigma2),
            s.kappa.to_string(),
            s.checked.to_string(),
            s.violations.to_string(),
            s.holds.to_string(),
            fmt_real(s.max_ratio),
            fmt_real(s.max_weak_ratio),
        ]],
    )?;
    Ok(Emitted { json: serde_json::to_value(&s)?, csv })
}

fn options(k: Option<f64>, eps: f64) -> Result<BoundOptions> {
    let k = k.unwrap_or(f64::INFINITY);
    if !(k > 0.0) {
        return Err(usage_err(format!("--K must be positive, got {k}")));
    }
    Ok(BoundOptions { k, eps })
}

fn report_json(r: &BoundReport) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(r)?)
}

fn run_bound(a: &BoundArgs) -> Result<Emitted> {
    let cs = load_components(&a.components)?;
    let r = bound_report(&cs, &options(a.k, a.eps)?)?;
    let csv = to_csv(&CSV_COLUMNS, [r.csv_record(&component_hash(&cs))])?;
    let mut v = report_json(&r)?;
    v["component_hash"] = json!(component_hash(&cs));
    v["K"] = json!(a.k);
    Ok(Emitted { json: v, csv })
}

fn run_sweep(a: &SweepArgs) -> Result<Emitted> {
    let ns = parse_list::<usize>(&a.n, "n")?;
    let ps = parse_grid(&a.p)?;
    if let Some(p) = ps.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
        return Err(usage_err(format!("probability {p} outside (0, 1)")));
    }
    if let Some(n) = ns.iter().find(|n| **n == 0) {
        return Err(usage_err(format!("n = {n} summands")));
    }
    let opts = options(a.k, a.eps)?;
    let grid: Vec<(usize, f64)> = ns.iter().flat_map(|&n| ps.iter().map(move |&p| (n, p))).collect();
    let reports = grid
        .par_iter()
        .map(|&(n, p)| {
            let cs = ComponentSet::iid(IntDist::bernoulli(p)?, n)?;
            bound_report(&cs, &opts)
        })
        .collect::<discrete_clt::Result<Vec<_>>>()?;
    let csv = to_csv(&CSV_COLUMNS, grid.iter().zip(&reports).map(|(&(_, p), r)| r.csv_record(&fmt_real(p))))?;
    let mut rows = Vec::new();
    for (&(n, p), r) in grid.iter().zip(&reports) {
        let mut v = report_json(r)?;
        v["p"] = json!(p);
        v["n"] = json!(n);
        rows.push(v);
    }
    Ok(Emitted { json: serde_json::Value::Array(rows), csv })
}

fn run_simulate(a: &SimArgs) -> Result<Emitted> {
    let p = a.p.params()?;
    let (start, stop) = match (a.state, a.stop) {
        (Some(s), Stop::Down) => (Start::State(s), StopRule::HitBelow),
        (Some(s), Stop::Up) => (Start::State(s), StopRule::HitAbove),
        (Some(s), Stop::Horizon) => (Start::State(s), StopRule::Horizon(a.horizon)),
        (None, Stop::Horizon) => (Start::Stationary, StopRule::Horizon(a.horizon)),
        (None, _) => return Err(usage_err("hitting-time runs need --state")),
    };
    let cfg = BDPSimConfig::new(a.seed, a.replicas, start, stop).window(a.k1, a.k2);
    let est = bdp_simulate(&p, &cfg)?;
    let closed = match (a.state, a.stop) {
        (Some(s), Stop::Down) => Some(occupation_time(&p, s, Direction::Down, a.k1, a.k2)?),
        (Some(s), Stop::Up) => Some(occupation_time(&p, s, Direction::Up, a.k1, a.k2)?),
        (None, Stop::Horizon) => {
            let psi = Psi::new(p)?;
            let d = psi.dist();
            let lo = a.k1.unwrap_or(i64::MIN);
            let hi = a.k2.unwrap_or(i64::MAX);
            Some(d.iter().filter(|(j, _)| (lo..=hi).contains(j)).map(|(_, w)| w).sum())
        }
        _ => None,
    };
    let v = json!({
        "mu": p.mu,
        "sigma2": p.sigma2,
        "kappa": p.kappa,
        "config": cfg,
        "estimate": est.estimate,
        "std_error": est.std_error,
        "closed_form": closed,
        "z": closed.map(|c| (est.estimate - c) / est.std_error),
    });
    let csv = to_csv(
        &["seed", "replicas", "estimate", "std_error", "closed_form"],
        [[
            est.seed.to_string(),
            est.replicas.to_string(),
            fmt_real(est.estimate),
            fmt_real(est.std_error),
            closed.map(fmt_real).unwrap_or_default(),
        ]],
    )?;
    Ok(Emitted { json: v, csv })
}

fn exit_code(e: &anyhow::Error) -> u8 {
    use discrete_clt::Error as E;
    if e.downcast_ref::<UsageError>().is_some() {
        return EXIT_INVALID;
    }
    match e.downcast_ref::<E>() {
        Some(E::SupportCap { .. }) => EXIT_SUPPORT_CAP,
        Some(
            E::NegativeWeight { .. }
            | E::NonFiniteWeight { .. }
            | E::EmptyWeights
            | E::ZeroMass
            | E::MassOutOfTolerance { .. }
            | E::NonPositiveSigma2(_)
            | E::NonFiniteMu(_)
            | E::KappaOutOfDomain { .. }
            | E::InvalidEps(_)
            | E::ZeroVariance
            | E::EmptyComponents
            | E::AllDegenerate
            | E::NonDefaultKappa { .. }
            | E::NonErgodic
            | E::OutsideWindow { .. }
            | E::InvalidTarget(_)
            | E::ZeroReplicas
            | E::InvalidArgument(_),
        ) => EXIT_INVALID,
        _ => EXIT_FAILURE,
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Ok(v) = std::env::var("DISCRETE_CLT_SUPPORT_CAP") {
        let cap = v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|c| *c > 0)
            .ok_or_else(|| usage_err(format!("DISCRETE_CLT_SUPPORT_CAP={v:?} is not a positive integer")))?;
        set_support_cap(cap);
    }
    let default_format = match cli.cmd {
        Command::Sweep(_) => Format::Csv,
        _ => Format::Json,
    };
    let out = match &cli.cmd {
        Command::Psi(a) => run_psi(a)?,
        Command::ZeroBias(a) => run_zero_bias(a)?,
        Command::SteinCheck(a) => run_stein(a)?,
        Command::Bound(a) => run_bound(a)?,
        Command::Sweep(a) => run_sweep(a)?,
        Command::Simulate(a) => run_simulate(a)?,
    };
    let text = match cli.format.unwrap_or(default_format) {
        Format::Json => serde_json::to_string_pretty(&out.json)? + "\n",
        Format::Csv => out.csv,
    };
    match &cli.output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
