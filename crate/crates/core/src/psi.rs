//! The two-parameter approximating family `Ψ_κ(μ, σ²)` on the integers,
//! together with the comparison laws used as baselines: the truncated
//! near-fixed point of discrete zero biasing (a translated Poisson when
//! `μ − σ²` is an integer) and the integerized normal.
//!
//! `Ψ_κ(μ, σ²)` is the stationary law of a bilateral birth–death chain whose
//! birth rate is `σ²` above `κ` and `σ² + μ − i` below it, and whose death
//! rate is `σ² + i − μ` from `κ` upward and `σ²` below. The pmf is built
//! outward from `κ` by the ratio recursion those rates imply:
//!
//! ```text
//! π_j / π_{j-1}   = σ² / (σ² + j − μ)                    j ≥ κ + 1
//! π_{κ-1} / π_κ   = (σ² + κ − μ) / (σ² + μ − κ + 1)
//! π_j / π_{j+1}   = σ² / (σ² + μ − j)                    j ≤ κ − 2
//! ```
//!
//! Both tails decay faster than geometrically, so the window stops once the
//! next term is below `eps` times the largest term and the ratio has turned
//! below one. The discarded mass is bounded by a geometric series using that
//! first sub-unit ratio, which dominates every later ratio.

use serde::Serialize;

use crate::dist::IntDist;
use crate::error::{Error, Result};
use crate::numeric::{ceil_snapped, csum, normal_cdf, normal_interval, normal_sf};

/// Default truncation tolerance for the represented window.
pub const DEFAULT_EPS: f64 = 1e-15;

const MAX_WINDOW: usize = 20_000_000;

/// Default `κ = min{i : i ≥ μ}`.
pub fn default_kappa(mu: f64) -> i64 {
    ceil_snapped(mu)
}

/// Parameters `(μ, σ², κ)` of one member of the family, plus the window
/// truncation tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiParams {
    pub mu: f64,
    pub sigma2: f64,
    pub kappa: i64,
    pub eps: f64,
}

impl PsiParams {
    /// Parameters with the default `κ`.
    pub fn new(mu: f64, sigma2: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::NonFiniteMu(mu));
        }
        Self::with_kappa(mu, sigma2, default_kappa(mu))
    }

    /// Parameters with an explicit `κ`, which must satisfy
    /// `μ − σ² ≤ κ < μ + σ² + 1`.
    pub fn with_kappa(mu: f64, sigma2: f64, kappa: i64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::NonFiniteMu(mu));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::NonPositiveSigma2(sigma2));
        }
        let lo = mu - sigma2;
        let hi = mu + sigma2 + 1.0;
        let k = kappa as f64;
        let slack = 1e-12 * lo.abs().max(1.0);
        if k < lo - slack || k >= hi {
            return Err(Error::KappaOutOfDomain { kappa, lo, hi });
        }
        Ok(Self { mu, sigma2, kappa, eps: DEFAULT_EPS })
    }

    pub fn with_eps(mut self, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidEps(eps));
        }
        self.eps = eps;
        Ok(self)
    }

    pub fn is_default_kappa(&self) -> bool {
        self.kappa == default_kappa(self.mu)
    }

    /// `σ² + κ − μ`, the death rate at `κ`. Values within rounding of zero
    /// are reported as exactly zero.
    pub fn beta_at_kappa(&self) -> f64 {
        let b = self.sigma2 + self.kappa as f64 - self.mu;
        if b.abs() <= 1e-12 * self.mu.abs().max(self.sigma2).max(1.0) {
            0.0
        } else {
            b.max(0.0)
        }
    }

    /// All birth and death rates are positive (`μ − σ² < κ`).
    pub fn is_ergodic(&self) -> bool {
        self.beta_at_kappa() > 0.0
    }

    /// Human-readable caveats attached to non-standard parameter choices.
    pub fn flags(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.is_default_kappa() {
            out.push("non-default kappa: Stein factor bounds not guaranteed");
        }
        if !self.is_ergodic() {
            out.push("non-ergodic: kappa = mu - sigma2, law is a translated Poisson");
        }
        out
    }

    /// `π_j / π_{j-1}` for `j ≥ κ + 1`.
    fn ratio_up(&self, j: i64) -> f64 {
        self.sigma2 / (self.sigma2 + j as f64 - self.mu)
    }

    /// `π_j / π_{j+1}` for `j ≤ κ − 1`.
    fn ratio_down(&self, j: i64) -> f64 {
        if j == self.kappa - 1 {
            self.beta_at_kappa() / (self.sigma2 + self.mu - self.kappa as f64 + 1.0)
        } else {
            self.sigma2 / (self.sigma2 + self.mu - j as f64)
        }
    }
}

/// Relative terms on one side of the anchor, and a bound on the excluded
/// remainder in the same relative units.
struct Side {
    terms: Vec<f64>,
    tail: f64,
}

/// Walk away from an anchor term of 1 using `ratio(step)`, where `ratio(s)`
/// is the factor from term `s − 1` to term `s`. Each ratio sequence used here
/// is eventually decreasing, so once it dips below one it stays there.
fn extend_side(eps: f64, ratio: impl Fn(usize) -> f64) -> Result<Side> {
    let mut terms = Vec::new();
    let mut prev = 1.0f64;
    let mut max_term = 1.0f64;
    let mut step = 1usize;
    loop {
        let r = ratio(step);
        let t = prev * r;
        if !t.is_finite() {
            return Err(Error::Numerical("pmf term overflowed while building window".into()));
        }
        let q = ratio(step + 1);
        if t < eps * max_term && q < 1.0 {
            let tail = if t == 0.0 { 0.0 } else { t / (1.0 - q) };
            return Ok(Side { terms, tail });
        }
        terms.push(t);
        max_term = max_term.max(t);
        prev = t;
        step += 1;
        if step > MAX_WINDOW {
            return Err(Error::Numerical("pmf window exceeded its size limit".into()));
        }
    }
}

/// A computed member of the family with its tail bounds split by side.
#[derive(Debug, Clone)]
pub struct Psi {
    params: PsiParams,
    dist: IntDist,
    tail_below: f64,
    tail_above: f64,
    pi_kappa: f64,
}

/// Moments of a computed law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiMoments {
    pub mean: f64,
    pub variance: f64,
    pub pi_kappa: f64,
}

/// Metadata block emitted next to the pmf.
#[derive(Debug, Clone, Serialize)]
pub struct PsiMetadata {
    pub mu: f64,
    pub sigma2: f64,
    pub kappa: i64,
    #[serde(rename = "var_S")]
    pub var_s: f64,
    pub pi_kappa: f64,
    pub tail_bound: f64,
    pub flags: Vec<&'static str>,
}

impl Psi {
    pub fn new(params: PsiParams) -> Result<Self> {
        let up = extend_side(params.eps, |s| params.ratio_up(params.kappa + s as i64))?;
        let down = extend_side(params.eps, |s| params.ratio_down(params.kappa - s as i64))?;

        let mut rel = Vec::with_capacity(down.terms.len() + 1 + up.terms.len());
        rel.extend(down.terms.iter().rev());
        rel.push(1.0);
        rel.extend(up.terms.iter());
        // Normalizing by window mass plus the tail bound keeps the
        // represented weights plus tail_mass equal to one.
        let norm = csum(rel.iter().copied()) + down.tail + up.tail;
        let weights: Vec<f64> = rel.iter().map(|t| t / norm).collect();
        let offset = params.kappa - down.terms.len() as i64;
        let tail_below = down.tail / norm;
        let tail_above = up.tail / norm;
        let dist = IntDist::from_trusted(offset, weights, tail_below + tail_above)?;
        Ok(Self { params, dist, tail_below, tail_above, pi_kappa: 1.0 / norm })
    }

    pub fn params(&self) -> &PsiParams {
        &self.params
    }

    pub fn dist(&self) -> &IntDist {
        &self.dist
    }

    pub fn into_dist(self) -> IntDist {
        self.dist
    }

    pub fn pi(&self, j: i64) -> f64 {
        self.dist.pmf(j)
    }

    pub fn pi_kappa(&self) -> f64 {
        self.pi_kappa
    }

    /// Bound on the mass below the represented window.
    pub fn tail_below(&self) -> f64 {
        self.tail_below
    }

    /// Bound on the mass above the represented window.
    pub fn tail_above(&self) -> f64 {
        self.tail_above
    }

    /// Mean and variance of the computed pmf.
    pub fn moments(&self) -> PsiMoments {
        PsiMoments { mean: self.dist.mean(), variance: self.dist.variance(), pi_kappa: self.pi_kappa }
    }

    /// `σ² + (σ² + κ − μ) π_κ`.
    pub fn variance_formula(&self) -> f64 {
        self.params.sigma2 + self.params.beta_at_kappa() * self.pi_kappa
    }

    /// Zero-biased law, built from the three-branch closed form in
    /// `σ² / Var(S)`.
    pub fn zero_bias(&self) -> Result<IntDist> {
        let p = &self.params;
        let var = self.dist.variance();
        let scale = p.sigma2 / var;
        let lo = self.dist.min_support().min(p.kappa) - 1;
        let hi = self.dist.max_support();
        let mut w = Vec::with_capacity((hi - lo + 1) as usize);
        for j in lo..=hi {
            let v = if j >= p.kappa {
                scale * self.dist.pmf(j)
            } else if j == p.kappa - 1 {
                ((var - p.sigma2) / var).max(0.0)
            } else {
                scale * self.dist.pmf(j + 1)
            };
            w.push(v);
        }
        IntDist::from_trusted(lo, w, scale * self.dist.tail_mass())
    }

    /// Stein operator of the family applied to `f` at `i`:
    /// `σ²Δf(i) − (i − μ) f(i)` for `i ≥ κ` and `σ²Δf(i) − (i − μ) f(i + 1)`
    /// below.
    pub fn operator(&self, f: impl Fn(i64) -> f64, i: i64) -> f64 {
        let p = &self.params;
        let d = f(i + 1) - f(i);
        let x = i as f64 - p.mu;
        if i >= p.kappa {
            p.sigma2 * d - x * f(i)
        } else {
            p.sigma2 * d - x * f(i + 1)
        }
    }

    /// `|E B f(S)|` over the represented window, for `f` vanishing outside
    /// `[start, start + values.len())`.
    pub fn characterization_residual(&self, start: i64, values: &[f64]) -> f64 {
        let f = |i: i64| {
            let k = i - start;
            if k < 0 || k >= values.len() as i64 {
                0.0
            } else {
                values[k as usize]
            }
        };
        csum(self.dist.iter().map(|(i, pi)| pi * self.operator(f, i))).abs()
    }

    pub fn metadata(&self) -> PsiMetadata {
        PsiMetadata {
            mu: self.params.mu,
            sigma2: self.params.sigma2,
            kappa: self.params.kappa,
            var_s: self.dist.variance(),
            pi_kappa: self.pi_kappa,
            tail_bound: self.dist.tail_mass(),
            flags: self.params.flags(),
        }
    }
}

/// The pmf of `Ψ_κ(μ, σ²)`.
pub fn psi_pmf(p: &PsiParams) -> Result<IntDist> {
    Ok(Psi::new(*p)?.into_dist())
}

pub fn psi_moments(p: &PsiParams) -> Result<PsiMoments> {
    Ok(Psi::new(*p)?.moments())
}

pub fn psi_zero_bias(p: &PsiParams) -> Result<IntDist> {
    Psi::new(*p)?.zero_bias()
}

/// Parameters of the law truncated at `κ̃ = min{i : i ≥ μ − σ²}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncatedFixedPoint {
    pub mu: f64,
    pub sigma2: f64,
    pub kappa_tilde: i64,
}

impl TruncatedFixedPoint {
    pub fn new(mu: f64, sigma2: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::NonFiniteMu(mu));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::NonPositiveSigma2(sigma2));
        }
        Ok(Self { mu, sigma2, kappa_tilde: ceil_snapped(mu - sigma2) })
    }
}

/// Pmf supported on `[κ̃, ∞)` with `P(j)/P(j−1) = σ²/(σ² + j − μ)`; a
/// translated Poisson when `μ − σ²` is an integer.
pub fn truncated_fixed_point_pmf(t: &TruncatedFixedPoint, eps: f64) -> Result<IntDist> {
    if !(t.sigma2 > 0.0) {
        return Err(Error::NonPositiveSigma2(t.sigma2));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidEps(eps));
    }
    let up = extend_side(eps, |s| {
        let j = t.kappa_tilde + s as i64;
        t.sigma2 / (t.sigma2 + j as f64 - t.mu)
    })?;
    let mut rel = Vec::with_capacity(up.terms.len() + 1);
    rel.push(1.0);
    rel.extend(up.terms.iter());
    let norm = csum(rel.iter().copied()) + up.tail;
    let weights = rel.iter().map(|x| x / norm).collect();
    IntDist::from_trusted(t.kappa_tilde, weights, up.tail / norm)
}

/// Integerized normal: `P(Y = j) = P(j − ½ < Z ≤ j + ½)` with
/// `Z ~ N(μ, σ²)`, truncated where each outer tail falls below `eps / 2`.
pub fn discrete_normal_pmf(mu: f64, sigma2: f64, eps: f64) -> Result<IntDist> {
    if !mu.is_finite() {
        return Err(Error::NonFiniteMu(mu));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::NonPositiveSigma2(sigma2));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidEps(eps));
    }
    let sd = sigma2.sqrt();
    let z = |x: f64| (x - mu) / sd;
    let centre = mu.round() as i64;
    let mut hi = centre;
    while normal_sf(z(hi as f64 + 0.5)) > eps / 2.0 {
        hi += 1;
    }
    let mut lo = centre;
    while normal_cdf(z(lo as f64 - 0.5)) > eps / 2.0 {
        lo -= 1;
    }
    let weights = (lo..=hi).map(|j| normal_interval(z(j as f64 - 0.5), z(j as f64 + 0.5))).collect();
    let tail = normal_cdf(z(lo as f64 - 0.5)) + normal_sf(z(hi as f64 + 0.5));
    IntDist::from_trusted(lo, weights, tail)
}
