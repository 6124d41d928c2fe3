//! Total variation bounds for approximating integer laws by `Ψ(μ, σ²)`
//! (always with the default `κ = min{i : i ≥ μ}`), evaluated next to exact
//! distances so that each bound can be confronted with the truth.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::dist::{tv_distance, tv_slack, IntDist};
use crate::error::{Error, Result};
use crate::numeric::csum;
use crate::psi::{default_kappa, discrete_normal_pmf, truncated_fixed_point_pmf, Psi, PsiParams, TruncatedFixedPoint};
use crate::zero_bias::{optimal_coupling, zero_bias, ComponentSet, Coupling};

/// Bound from the distance between `Y` and its zero-biased law:
/// `Σ_{i ≥ κ} |P(Y = i) − P(Y* = i)| + Σ_{i < κ} |P(Y = i) − P(Y* + 1 = i)|`.
pub fn thm41_bound(y: &IntDist) -> Result<f64> {
    let star = zero_bias(y)?;
    let kappa = default_kappa(y.mean());
    let lo = y.min_support().min(star.min_support());
    let hi = y.max_support().max(star.max_support() + 1);
    Ok(csum((lo..=hi).map(|i| {
        if i >= kappa {
            (y.pmf(i) - star.pmf(i)).abs()
        } else {
            (y.pmf(i) - star.pmf(i - 1)).abs()
        }
    })))
}

/// `d_TV(L(W_i), L(W_i + 1))`.
pub fn dplus_exact(cs: &ComponentSet, i: usize) -> Result<f64> {
    let w_i = cs.leave_one_out(i)?;
    Ok(tv_distance(&w_i, &w_i.shift(1)))
}

/// Every `d₊^{(i)}`.
pub fn dplus_all(cs: &ComponentSet) -> Result<Vec<f64>> {
    Ok(cs.leave_one_out_all()?.iter().map(|w| tv_distance(w, &w.shift(1))).collect())
}

/// One component's share of the sum bound.
#[derive(Debug, Clone, Serialize)]
pub struct ComponentTerm {
    pub index: usize,
    pub variance: f64,
    pub dplus: f64,
    /// `E(|ξ − ξ*| ∧ K)`.
    pub e_gap: f64,
    /// `E(|ξ − ξ* − 1| ∧ K)`.
    pub e_gap_shift: f64,
    /// `P(|ξ − ξ*| > K)`.
    pub tail_gap: f64,
    /// `P(|ξ − ξ* − 1| > K)`.
    pub tail_gap_shift: f64,
    /// `(2σ_i²/σ²)(d₊ (e_gap + e_gap_shift) + tail_gap + tail_gap_shift)`.
    pub contribution: f64,
}

/// Sum bound with its per-component breakdown.
#[derive(Debug, Clone, Serialize)]
pub struct Thm42 {
    pub bound: f64,
    pub k: f64,
    pub terms: Vec<ComponentTerm>,
}

/// Bound for `W = Σ ξ_i` with truncation level `K` (`f64::INFINITY` allowed),
/// using the quantile coupling of each `(ξ_i, ξ_i*)`.
pub fn thm42_bound(cs: &ComponentSet, k: f64) -> Result<f64> {
    Ok(thm42_with(cs, k, &optimal_coupling)?.bound)
}

/// As [`thm42_bound`] with a caller-chosen coupling of `ξ_i` and `ξ_i*`.
pub fn thm42_with(cs: &ComponentSet, k: f64, couple: &dyn Fn(&IntDist, &IntDist) -> Coupling) -> Result<Thm42> {
    let dplus = dplus_all(cs)?;
    thm42_from_parts(cs, k, &dplus, couple)
}

fn thm42_from_parts(
    cs: &ComponentSet,
    k: f64,
    dplus: &[f64],
    couple: &dyn Fn(&IntDist, &IntDist) -> Coupling,
) -> Result<Thm42> {
    if !(k > 0.0) {
        return Err(Error::InvalidArgument(format!("K must be positive, got {k}")));
    }
    let total_var = cs.total_variance();
    if !(total_var > 0.0) {
        return Err(Error::AllDegenerate);
    }
    let mut terms = Vec::new();
    for (i, xi) in cs.components().iter().enumerate() {
        let v = cs.variances()[i];
        if v <= 0.0 {
            continue;
        }
        let c = couple(xi, &zero_bias(xi)?);
        let capped = |d: i64| (d.abs() as f64).min(k);
        let beyond = |d: i64| if (d.abs() as f64) > k { 1.0 } else { 0.0 };
        let e_gap = c.expect(|x, y| capped(x - y));
        let e_gap_shift = c.expect(|x, y| capped(x - y - 1));
        let tail_gap = c.expect(|x, y| beyond(x - y));
        let tail_gap_shift = c.expect(|x, y| beyond(x - y - 1));
        let contribution =
            2.0 * v / total_var * (dplus[i] * (e_gap + e_gap_shift) + tail_gap + tail_gap_shift);
        terms.push(ComponentTerm {
            index: i,
            variance: v,
            dplus: dplus[i],
            e_gap,
            e_gap_shift,
            tail_gap,
            tail_gap_shift,
            contribution,
        });
    }
    let bound = csum(terms.iter().map(|t| t.contribution));
    Ok(Thm42 { bound, k, terms })
}

/// Smoothness estimate from the components' own shift distances.
#[derive(Debug, Clone, Serialize)]
pub struct Prop44 {
    /// `u_i = 1 − d_TV(L(ξ_i), L(ξ_i + 1))`.
    pub u: Vec<f64>,
    /// `U = Σ min(u_i, ½)`.
    pub big_u: f64,
    /// `U^{−1/2}`, bounding `d_TV(L(W), L(W + 1))`.
    pub bound_w: f64,
    /// `(U − 1)^{−1/2}`, bounding every `d₊^{(i)}`; absent when `U ≤ 1`.
    pub bound_wi: Option<f64>,
}

pub fn dplus_prop44(cs: &ComponentSet) -> Result<Prop44> {
    let u: Vec<f64> = cs.components().iter().map(|x| 1.0 - tv_distance(x, &x.shift(1))).collect();
    let big_u = csum(u.iter().map(|v| v.min(0.5)));
    if !(big_u > 0.0) {
        return Err(Error::Vacuous("U = 0: every component is periodic".into()));
    }
    let bound_wi = (big_u > 1.0).then(|| (big_u - 1.0).powf(-0.5));
    Ok(Prop44 { u, big_u, bound_w: big_u.powf(-0.5), bound_wi })
}

/// `1/ϑ` with `ϑ² = σ² − max_i p_i(1 − p_i)` for a sum of indicators.
/// Returns `(bound, ϑ²)`.
pub fn cor43_bound(ps: &[f64]) -> Result<(f64, f64)> {
    if let Some(p) = ps.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
        return Err(Error::InvalidArgument(format!("indicator probability {p} outside (0, 1)")));
    }
    let var: Vec<f64> = ps.iter().map(|p| p * (1.0 - p)).collect();
    let sigma2 = csum(var.iter().copied());
    let worst = var.iter().copied().fold(0.0, f64::max);
    let vartheta2 = sigma2 - worst;
    if !(vartheta2 > 0.0) {
        return Err(Error::Vacuous(format!("vartheta^2 = {vartheta2} is not positive")));
    }
    Ok((vartheta2.powf(-0.5), vartheta2))
}

/// Options for [`bound_report`].
#[derive(Debug, Clone, Copy)]
pub struct BoundOptions {
    pub k: f64,
    pub eps: f64,
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self { k: f64::INFINITY, eps: crate::psi::DEFAULT_EPS }
    }
}

/// All bounds and exact distances for one component set.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub n: usize,
    pub mu: f64,
    pub sigma2: f64,
    pub kappa: i64,
    /// Variance of the fitted `Ψ`, which differs from `σ²` by `(σ² + κ − μ) π_κ`.
    pub var_psi: f64,
    pub actual_tv: f64,
    pub thm41_bound: Option<f64>,
    pub thm42_bound: Option<f64>,
    pub thm42_terms: Vec<ComponentTerm>,
    pub cor43_bound: Option<f64>,
    pub vartheta2: Option<f64>,
    pub dplus_exact: Vec<f64>,
    pub dplus_max: f64,
    /// Exact `d_TV(L(W), L(W + 1))`.
    pub dplus_w: f64,
    /// `(U − 1)^{−1/2}`, the uniform estimate of every `d₊^{(i)}`.
    pub dplus_prop44: Option<f64>,
    pub prop44: Option<Prop44>,
    pub baselines: BTreeMap<String, f64>,
    pub tail_slack: f64,
    pub lattice_span: u64,
    pub periodic: bool,
    pub notes: Vec<String>,
}

pub const BASELINE_DISCRETE_NORMAL: &str = "discrete_normal";
pub const BASELINE_TRANSLATED_POISSON: &str = "translated_poisson";

fn indicator_p(d: &IntDist) -> Option<f64> {
    (d.offset() == 0 && d.len() == 2).then(|| d.weights()[1])
}

pub fn bound_report(cs: &ComponentSet, opts: &BoundOptions) -> Result<BoundReport> {
    let w = cs.sum()?;
    let (mu, sigma2) = (cs.total_mean(), cs.total_variance());
    let params = PsiParams::new(mu, sigma2)?.with_eps(opts.eps)?;
    let psi = Psi::new(params)?;
    let actual_tv = tv_distance(&w, psi.dist());
    let mut tail_slack = tv_slack(&w, psi.dist());
    let mut notes = Vec::new();

    let thm41 = thm41_bound(&w).ok();
    let dplus = dplus_all(cs)?;
    let dplus_max = dplus.iter().copied().fold(0.0, f64::max);
    let thm42 = thm42_from_parts(cs, opts.k, &dplus, &optimal_coupling)?;

    let ps: Option<Vec<f64>> = cs.components().iter().map(indicator_p).collect();
    let (cor43, vartheta2) = match ps.as_deref().map(cor43_bound) {
        Some(Ok((b, v))) => (Some(b), Some(v)),
        _ => (None, None),
    };

    let prop44 = match dplus_prop44(cs) {
        Ok(p) => Some(p),
        Err(e) => {
            notes.push(e.to_string());
            None
        }
    };

    let mut baselines = BTreeMap::new();
    let normal = discrete_normal_pmf(mu, sigma2, opts.eps)?;
    baselines.insert(BASELINE_DISCRETE_NORMAL.to_string(), tv_distance(&w, &normal));
    let tp = truncated_fixed_point_pmf(&TruncatedFixedPoint::new(mu, sigma2)?, opts.eps)?;
    baselines.insert(BASELINE_TRANSLATED_POISSON.to_string(), tv_distance(&w, &tp));
    tail_slack = tail_slack.max(tv_slack(&w, &normal)).max(tv_slack(&w, &tp));

    let lattice_span = w.lattice_span();
    let periodic = lattice_span > 1;
    if periodic {
        notes.push(format!("periodic (support on a lattice of span {lattice_span}) — approximation fails"));
    }
    if prop44.as_ref().is_none_or(|p| p.u.iter().all(|&u| u == 0.0)) {
        notes.push("every u_i = 0: no component smooths the unit lattice".into());
    }
    if !params.is_default_kappa() {
        notes.push("non-default kappa".into());
    }

    Ok(BoundReport {
        n: cs.len(),
        mu,
        sigma2,
        kappa: params.kappa,
        var_psi: psi.dist().variance(),
        actual_tv,
        thm41_bound: thm41,
        thm42_bound: Some(thm42.bound),
        thm42_terms: thm42.terms,
        cor43_bound: cor43,
        vartheta2,
        dplus_w: tv_distance(&w, &w.shift(1)),
        dplus_exact: dplus,
        dplus_max,
        dplus_prop44: prop44.as_ref().and_then(|p| p.bound_wi),
        prop44,
        baselines,
        tail_slack,
        lattice_span,
        periodic,
        notes,
    })
}

/// Column order of sweep CSV output.
pub const CSV_COLUMNS: [&str; 14] = [
    "n",
    "p",
    "mu",
    "sigma2",
    "kappa",
    "actual_tv",
    "cor43",
    "thm41",
    "thm42",
    "dplus_max",
    "prop44",
    "tv_discrete_normal",
    "tv_translated_poisson",
    "tail_slack",
];

/// Real number with 17 significant digits. Non-finite values are a bug.
pub fn fmt_real(x: f64) -> String {
    assert!(x.is_finite(), "non-finite value {x} in numeric output");
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_real).unwrap_or_default()
}

impl BoundReport {
    /// Fields of one CSV row in [`CSV_COLUMNS`] order; `label` fills the `p`
    /// column (a probability or a component-set hash).
    pub fn csv_record(&self, label: &str) -> [String; 14] {
        [
            self.n.to_string(),
            label.to_string(),
            fmt_real(self.mu),
            fmt_real(self.sigma2),
            self.kappa.to_string(),
            fmt_real(self.actual_tv),
            fmt_opt(self.cor43_bound),
            fmt_opt(self.thm41_bound),
            fmt_opt(self.thm42_bound),
            fmt_real(self.dplus_max),
            fmt_opt(self.dplus_prop44),
            fmt_opt(self.baselines.get(BASELINE_DISCRETE_NORMAL).copied()),
            fmt_opt(self.baselines.get(BASELINE_TRANSLATED_POISSON).copied()),
            fmt_real(self.tail_slack),
        ]
    }
}
