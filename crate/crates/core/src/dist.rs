//! Finite-support probability mass functions on the integers.
//!
//! [`IntDist`] stores a dense weight vector over a contiguous window starting
//! at `offset`, together with the mass that was discarded when an infinite
//! law was truncated to that window. Sparse supports (say, a law on `{0, 3}`)
//! carry explicit zeros in between. Every other module computes with this
//! type and checks its results against exact convolutions and distances
//! defined here.

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{csum, CompensatedSum};

/// Default upper limit on the number of support points a convolution may produce.
pub const DEFAULT_SUPPORT_CAP: usize = 10_000_000;

/// Tolerance on the total mass accepted by [`IntDist::from_pmf`].
pub const INPUT_MASS_TOL: f64 = 1e-9;

/// Tolerance on `sum(weights) + tail_mass` for a constructed distribution.
pub const MASS_TOL: f64 = 1e-12;

/// Weights below this are stored as exact zeros.
const ZERO_WEIGHT: f64 = 5e-324;

static SUPPORT_CAP: AtomicUsize = AtomicUsize::new(DEFAULT_SUPPORT_CAP);

/// Current process-wide convolution cap.
pub fn support_cap() -> usize {
    SUPPORT_CAP.load(Ordering::Relaxed)
}

/// Override the process-wide convolution cap used by [`convolve`].
pub fn set_support_cap(cap: usize) {
    SUPPORT_CAP.store(cap.max(1), Ordering::Relaxed);
}

/// A probability mass function on a contiguous integer window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntDist {
    offset: i64,
    weights: Vec<f64>,
    tail_mass: f64,
}

#[derive(Deserialize)]
struct RawIntDist {
    offset: i64,
    weights: Vec<f64>,
    #[serde(default)]
    tail_mass: f64,
}

impl<'de> Deserialize<'de> for IntDist {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        let raw = RawIntDist::deserialize(deserializer)?;
        match IntDist::from_parts(raw.offset, raw.weights.clone(), raw.tail_mass) {
            // Hand-written files with no tail get the from_pmf tolerance.
            Err(Error::MassOutOfTolerance { .. }) if raw.tail_mass == 0.0 => {
                IntDist::from_pmf(raw.offset, raw.weights)
            }
            other => other,
        }
        .map_err(serde::de::Error::custom)
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::EmptyWeights);
    }
    for (index, &w) in weights.iter().enumerate() {
        if !w.is_finite() {
            return Err(Error::NonFiniteWeight { index });
        }
        if w < 0.0 {
            return Err(Error::NegativeWeight { index, value: w });
        }
    }
    Ok(())
}

/// Zero out sub-threshold weights and drop leading and trailing zeros.
fn trim(offset: i64, mut weights: Vec<f64>) -> Result<(i64, Vec<f64>)> {
    for w in weights.iter_mut() {
        if *w < ZERO_WEIGHT {
            *w = 0.0;
        }
    }
    let first = weights.iter().position(|&w| w > 0.0).ok_or(Error::ZeroMass)?;
    let last = weights.iter().rposition(|&w| w > 0.0).unwrap();
    weights.truncate(last + 1);
    weights.drain(..first);
    Ok((offset + first as i64, weights))
}

impl IntDist {
    /// Build a distribution from raw probabilities, renormalizing them to one.
    pub fn from_pmf(offset: i64, weights: Vec<f64>) -> Result<Self> {
        check_weights(&weights)?;
        let total = csum(weights.iter().copied());
        if total <= 0.0 {
            return Err(Error::ZeroMass);
        }
        if (total - 1.0).abs() > INPUT_MASS_TOL {
            return Err(Error::MassOutOfTolerance { total });
        }
        let (offset, weights) = trim(offset, weights)?;
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { offset, weights, tail_mass: 0.0 })
    }

    /// Build a distribution without renormalizing. The weights plus
    /// `tail_mass` must already sum to one within [`MASS_TOL`].
    pub fn from_parts(offset: i64, weights: Vec<f64>, tail_mass: f64) -> Result<Self> {
        check_weights(&weights)?;
        if !tail_mass.is_finite() || tail_mass < 0.0 {
            return Err(Error::Numerical(format!("invalid tail mass {tail_mass}")));
        }
        let total = csum(weights.iter().copied());
        if total <= 0.0 {
            return Err(Error::ZeroMass);
        }
        if (total + tail_mass - 1.0).abs() > MASS_TOL {
            return Err(Error::MassOutOfTolerance { total: total + tail_mass });
        }
        let (offset, weights) = trim(offset, weights)?;
        Ok(Self { offset, weights, tail_mass })
    }

    pub fn point_mass(at: i64) -> Self {
        Self { offset: at, weights: vec![1.0], tail_mass: 0.0 }
    }

    /// Indicator with success probability `p`.
    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("bernoulli p = {p} outside [0, 1]")));
        }
        Self::from_pmf(0, vec![1.0 - p, p])
    }

    /// Uniform law on the listed points (duplicates add up).
    pub fn uniform_on(points: &[i64]) -> Result<Self> {
        let lo = *points.iter().min().ok_or(Error::EmptyWeights)?;
        let hi = *points.iter().max().unwrap();
        let mut w = vec![0.0; (hi - lo + 1) as usize];
        let each = 1.0 / points.len() as f64;
        for &x in points {
            w[(x - lo) as usize] += each;
        }
        Self::from_pmf(lo, w)
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Smallest represented support point.
    pub fn min_support(&self) -> i64 {
        self.offset
    }

    /// Largest represented support point.
    pub fn max_support(&self) -> i64 {
        self.offset + self.weights.len() as i64 - 1
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `P(X = j)`; zero outside the represented window.
    pub fn pmf(&self, j: i64) -> f64 {
        let k = j - self.offset;
        if k < 0 || k >= self.weights.len() as i64 {
            0.0
        } else {
            self.weights[k as usize]
        }
    }

    /// `(j, P(X = j))` pairs over the window, zeros included.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.weights.iter().enumerate().map(move |(k, &w)| (self.offset + k as i64, w))
    }

    pub fn total_mass(&self) -> f64 {
        csum(self.weights.iter().copied())
    }

    pub fn is_point_mass(&self) -> bool {
        self.weights.len() == 1
    }

    pub fn mean(&self) -> f64 {
        let rel = csum(self.weights.iter().enumerate().map(|(k, &w)| k as f64 * w));
        self.offset as f64 * self.total_mass() + rel
    }

    pub fn variance(&self) -> f64 {
        let total = self.total_mass();
        let rel_mean = csum(self.weights.iter().enumerate().map(|(k, &w)| k as f64 * w)) / total;
        let v = csum(self.weights.iter().enumerate().map(|(k, &w)| {
            let d = k as f64 - rel_mean;
            d * d * w
        }));
        v.max(0.0)
    }

    /// Largest point probability.
    pub fn max_pmf(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    /// `P(X <= j)`.
    pub fn cdf(&self, j: i64) -> f64 {
        if j < self.offset {
            return 0.0;
        }
        let upto = ((j - self.offset) as usize).min(self.weights.len() - 1);
        csum(self.weights[..=upto].iter().copied())
    }

    /// Law of `X + c`.
    pub fn shift(&self, c: i64) -> Self {
        Self { offset: self.offset + c, weights: self.weights.clone(), tail_mass: self.tail_mass }
    }

    /// Greatest common divisor of the gaps between support points. A value
    /// above one means the mass sits on a sublattice of that span.
    pub fn lattice_span(&self) -> u64 {
        let mut g = 0u64;
        let mut prev: Option<i64> = None;
        for (j, w) in self.iter() {
            if w > 0.0 {
                if let Some(p) = prev {
                    g = gcd(g, (j - p) as u64);
                }
                prev = Some(j);
            }
        }
        g
    }

    /// Drop support points from both ends until the dropped mass on each
    /// side would exceed `eps`; the dropped mass moves into `tail_mass`.
    pub fn truncate_tails(&self, eps: f64) -> Self {
        let mut lo = 0;
        let mut acc = 0.0;
        while lo + 1 < self.weights.len() && acc + self.weights[lo] <= eps {
            acc += self.weights[lo];
            lo += 1;
        }
        let mut hi = self.weights.len() - 1;
        let mut acc_hi = 0.0;
        while hi > lo && acc_hi + self.weights[hi] <= eps {
            acc_hi += self.weights[hi];
            hi -= 1;
        }
        Self {
            offset: self.offset + lo as i64,
            weights: self.weights[lo..=hi].to_vec(),
            tail_mass: self.tail_mass + acc + acc_hi,
        }
    }

    /// Internal constructor for values known to be valid up to rounding.
    pub(crate) fn from_trusted(offset: i64, weights: Vec<f64>, tail_mass: f64) -> Result<Self> {
        let (offset, weights) = trim(offset, weights)?;
        Ok(Self { offset, weights, tail_mass })
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Exact law of the sum of two independent variables, subject to the
/// process-wide support cap.
pub fn convolve(a: &IntDist, b: &IntDist) -> Result<IntDist> {
    convolve_with_cap(a, b, support_cap())
}

pub fn convolve_with_cap(a: &IntDist, b: &IntDist, cap: usize) -> Result<IntDist> {
    let size = a.len() + b.len() - 1;
    if size > cap {
        return Err(Error::SupportCap { size, cap });
    }
    let mut acc = vec![CompensatedSum::new(); size];
    for (i, &wa) in a.weights.iter().enumerate() {
        if wa == 0.0 {
            continue;
        }
        for (j, &wb) in b.weights.iter().enumerate() {
            acc[i + j].add(wa * wb);
        }
    }
    let weights = acc.iter().map(CompensatedSum::value).collect();
    IntDist::from_trusted(a.offset + b.offset, weights, a.tail_mass + b.tail_mass)
}

/// Convolution of every distribution in `dists`; the empty sum is `δ₀`.
pub fn convolve_all<'a, I>(dists: I) -> Result<IntDist>
where
    I: IntoIterator<Item = &'a IntDist>,
{
    dists.into_iter().try_fold(IntDist::point_mass(0), |acc, d| convolve(&acc, d))
}

/// Total variation distance of the represented masses: half the L1 distance
/// over the union of the two windows. Truncated tails are not included; see
/// [`tv_slack`].
pub fn tv_distance(a: &IntDist, b: &IntDist) -> f64 {
    let lo = a.min_support().min(b.min_support());
    let hi = a.max_support().max(b.max_support());
    let l1 = csum((lo..=hi).map(|j| (a.pmf(j) - b.pmf(j)).abs()));
    (0.5 * l1).clamp(0.0, 1.0)
}

/// Worst-case change in [`tv_distance`] from the truncated tails of `a` and `b`.
pub fn tv_slack(a: &IntDist, b: &IntDist) -> f64 {
    0.5 * (a.tail_mass + b.tail_mass)
}
