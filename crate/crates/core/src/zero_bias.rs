//! Discrete zero-bias and size-bias transformations.
//!
//! For an integer variable `Y` with mean `μ` and variance `σ²`, the zero-biased
//! law `Y*` is the unique law with `E[(Y − μ) f(Y)] = σ² E Δf(Y*)` for all
//! bounded `f`; explicitly `P(Y* = j − 1) = E[(Y − μ) 1(Y ≥ j)] / σ²`.
//! For independent sums the transform replaces one summand, picked with
//! probability proportional to its variance, by its own zero-biased version.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::dist::{convolve, convolve_all, IntDist};
use crate::error::{Error, Result};
use crate::numeric::{csum, CompensatedSum};

/// Negative partial sums above this (after scaling) are rounding noise.
const NEG_CLAMP: f64 = -1e-14;

fn has_spread(d: &IntDist) -> bool {
    d.weights().iter().filter(|&&w| w > 0.0).count() >= 2
}

/// Zero-biased law of `d`.
pub fn zero_bias(d: &IntDist) -> Result<IntDist> {
    if !has_spread(d) {
        return Err(Error::ZeroVariance);
    }
    let w = d.weights();
    let total = d.total_mass();
    let rel_mean = csum(w.iter().enumerate().map(|(k, &p)| k as f64 * p)) / total;
    let var = d.variance();
    if var <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let n = w.len();
    // out[k] = P(Y* = offset + k) = E[(Y − μ) 1(Y ≥ offset + k + 1)] / σ², k < n − 1.
    // Above the mean the upper partial sum has no cancellation; below it the
    // equal lower partial sum E[(μ − Y) 1(Y ≤ offset + k)] is used instead.
    let mut out = vec![0.0; n - 1];
    let mut upper = CompensatedSum::new();
    for k in (1..n).rev() {
        upper.add((k as f64 - rel_mean) * w[k]);
        if k as f64 > rel_mean {
            out[k - 1] = upper.value();
        }
    }
    let mut lower = CompensatedSum::new();
    for k in 0..n - 1 {
        lower.add((rel_mean - k as f64) * w[k]);
        if (k + 1) as f64 <= rel_mean {
            out[k] = lower.value();
        }
    }
    for (k, v) in out.iter_mut().enumerate() {
        *v /= var;
        if *v < 0.0 {
            if *v >= NEG_CLAMP {
                *v = 0.0;
            } else {
                return Err(Error::Numerical(format!(
                    "zero-bias mass {v} at {} is negative beyond rounding",
                    d.offset() + k as i64
                )));
            }
        }
    }
    IntDist::from_trusted(d.offset(), out, d.tail_mass())
}

/// A real function tabulated on `[start, start + values.len())`.
#[derive(Debug, Clone, PartialEq)]
pub struct FnTable {
    pub start: i64,
    pub values: Vec<f64>,
}

impl FnTable {
    pub fn new(start: i64, values: Vec<f64>) -> Self {
        Self { start, values }
    }

    pub fn end(&self) -> i64 {
        self.start + self.values.len() as i64 - 1
    }

    pub fn covers(&self, lo: i64, hi: i64) -> bool {
        !self.values.is_empty() && self.start <= lo && self.end() >= hi
    }

    pub fn get(&self, i: i64) -> Option<f64> {
        let k = i - self.start;
        (k >= 0 && k < self.values.len() as i64).then(|| self.values[k as usize])
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `|E[(Y − μ) f(Y)] − σ² E Δf(Y*)|` for the tabulated `f`, which must cover
/// the support of `d` (that also covers `Y*` and `Y* + 1`).
pub fn verify_characterization(d: &IntDist, f: &FnTable) -> Result<f64> {
    let (lo, hi) = (d.min_support(), d.max_support());
    if !f.covers(lo, hi) {
        return Err(Error::UncoveredWindow { start: f.start, end: f.end(), need_lo: lo, need_hi: hi });
    }
    let star = zero_bias(d)?;
    let mu = d.mean();
    let var = d.variance();
    let at = |i| f.get(i).unwrap();
    let lhs = csum(d.iter().map(|(y, p)| (y as f64 - mu) * at(y) * p));
    let rhs = var * csum(star.iter().map(|(j, p)| (at(j + 1) - at(j)) * p));
    Ok((lhs - rhs).abs())
}

/// Size-biased law, `P(X^s = k) = k P(X = k) / μ`.
pub fn size_bias(d: &IntDist) -> Result<IntDist> {
    if d.offset() < 0 {
        return Err(Error::NegativeSupport(d.offset()));
    }
    let mean = d.mean();
    if !(mean > 0.0) {
        return Err(Error::ZeroMean);
    }
    let w = d.iter().map(|(k, p)| k as f64 * p / mean).collect();
    IntDist::from_trusted(d.offset(), w, d.tail_mass())
}

/// Independent summands `ξ₁, …, ξₙ` with cached moments.
#[derive(Debug, Clone)]
pub struct ComponentSet {
    components: Vec<IntDist>,
    means: Vec<f64>,
    variances: Vec<f64>,
    total_mean: f64,
    total_variance: f64,
}

impl ComponentSet {
    pub fn new(components: Vec<IntDist>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::EmptyComponents);
        }
        let means: Vec<f64> = components.iter().map(IntDist::mean).collect();
        let variances: Vec<f64> =
            components.iter().map(|c| if has_spread(c) { c.variance() } else { 0.0 }).collect();
        if variances.iter().all(|&v| v <= 0.0) {
            return Err(Error::AllDegenerate);
        }
        let total_mean = csum(means.iter().copied());
        let total_variance = csum(variances.iter().copied());
        Ok(Self { components, means, variances, total_mean, total_variance })
    }

    /// `n` copies of the same law.
    pub fn iid(d: IntDist, n: usize) -> Result<Self> {
        Self::new(vec![d; n])
    }

    pub fn components(&self) -> &[IntDist] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn total_mean(&self) -> f64 {
        self.total_mean
    }

    pub fn total_variance(&self) -> f64 {
        self.total_variance
    }

    /// Law of `W = Σ ξ_i`.
    pub fn sum(&self) -> Result<IntDist> {
        convolve_all(&self.components)
    }

    /// Law of `W_i = W − ξ_i`.
    pub fn leave_one_out(&self, i: usize) -> Result<IntDist> {
        if i >= self.len() {
            return Err(Error::IndexOutOfRange { index: i, len: self.len() });
        }
        convolve_all(self.components.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, c)| c))
    }

    /// Every `W_i`, via prefix and suffix convolutions.
    pub fn leave_one_out_all(&self) -> Result<Vec<IntDist>> {
        let n = self.len();
        let mut prefix = Vec::with_capacity(n + 1);
        prefix.push(IntDist::point_mass(0));
        for c in &self.components {
            let next = convolve(prefix.last().unwrap(), c)?;
            prefix.push(next);
        }
        let mut suffix = vec![IntDist::point_mass(0); n + 1];
        for i in (0..n).rev() {
            suffix[i] = convolve(&suffix[i + 1], &self.components[i])?;
        }
        (0..n).map(|i| convolve(&prefix[i], &suffix[i + 1])).collect()
    }

    /// The same components in a different order.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let comps = order
            .iter()
            .map(|&i| self.components.get(i).cloned().ok_or(Error::IndexOutOfRange { index: i, len: self.len() }))
            .collect::<Result<Vec<_>>>()?;
        Self::new(comps)
    }
}

/// Zero-biased law of `W`, formed as the variance-weighted mixture of
/// `W_i + ξ_i*` over the components.
pub fn sum_zero_bias(cs: &ComponentSet) -> Result<IntDist> {
    let total_var = cs.total_variance();
    if !(total_var > 0.0) {
        return Err(Error::AllDegenerate);
    }
    let loo = cs.leave_one_out_all()?;
    let mut terms = Vec::new();
    for (i, w_i) in loo.iter().enumerate() {
        let v = cs.variances()[i];
        if v <= 0.0 {
            continue;
        }
        let star = zero_bias(&cs.components()[i])?;
        terms.push((v / total_var, convolve(w_i, &star)?));
    }
    let lo = terms.iter().map(|(_, t)| t.min_support()).min().unwrap();
    let hi = terms.iter().map(|(_, t)| t.max_support()).max().unwrap();
    let mut acc = vec![CompensatedSum::new(); (hi - lo + 1) as usize];
    let mut tail = 0.0;
    for (weight, t) in &terms {
        for (j, p) in t.iter() {
            acc[(j - lo) as usize].add(weight * p);
        }
        tail += weight * t.tail_mass();
    }
    IntDist::from_trusted(lo, acc.iter().map(CompensatedSum::value).collect(), tail)
}

/// A joint law of two integer variables with fixed marginals.
#[derive(Debug, Clone, Serialize)]
pub struct Coupling {
    pub joint: BTreeMap<(i64, i64), f64>,
    pub marginal_x: IntDist,
    pub marginal_y: IntDist,
}

impl Coupling {
    /// `E φ(X, Y)` under the joint law.
    pub fn expect(&self, phi: impl Fn(i64, i64) -> f64) -> f64 {
        csum(self.joint.iter().map(|(&(x, y), &p)| phi(x, y) * p))
    }

    /// Largest deviation between the joint's margins and the stored marginals.
    pub fn marginal_error(&self) -> f64 {
        let mut rows: BTreeMap<i64, f64> = BTreeMap::new();
        let mut cols: BTreeMap<i64, f64> = BTreeMap::new();
        for (&(x, y), &p) in &self.joint {
            *rows.entry(x).or_default() += p;
            *cols.entry(y).or_default() += p;
        }
        let dev = |m: &BTreeMap<i64, f64>, d: &IntDist| {
            let mut worst: f64 = 0.0;
            for (j, p) in d.iter() {
                worst = worst.max((m.get(&j).copied().unwrap_or(0.0) - p).abs());
            }
            for (j, v) in m {
                if d.pmf(*j) == 0.0 {
                    worst = worst.max(v.abs());
                }
            }
            worst
        };
        dev(&rows, &self.marginal_x).max(dev(&cols, &self.marginal_y))
    }
}

/// Comonotone (quantile) coupling of `a` and `b`. It minimizes `E c(X − Y)`
/// for every convex cost `c`, in particular `|X − Y| + |X − Y − 1|`.
pub fn optimal_coupling(a: &IntDist, b: &IntDist) -> Coupling {
    let atoms = |d: &IntDist| d.iter().filter(|(_, p)| *p > 0.0).collect::<Vec<_>>();
    let xa = atoms(a);
    let xb = atoms(b);
    let (na, nb) = (xa.len(), xb.len());
    let mut joint = BTreeMap::new();
    let (mut i, mut j) = (0usize, 0usize);
    let (mut ca, mut cb) = (xa[0].1, xb[0].1);
    let mut lo = 0.0f64;
    loop {
        if i == na - 1 && j == nb - 1 {
            let mass = ca.max(cb) - lo;
            if mass > 0.0 {
                *joint.entry((xa[i].0, xb[j].0)).or_insert(0.0) += mass;
            }
            break;
        }
        let advance_a = if i == na - 1 {
            false
        } else if j == nb - 1 {
            true
        } else {
            ca <= cb
        };
        let hi = if advance_a { ca } else { cb };
        let mass = hi - lo;
        if mass > 0.0 {
            *joint.entry((xa[i].0, xb[j].0)).or_insert(0.0) += mass;
            lo = hi;
        }
        if advance_a {
            i += 1;
            ca += xa[i].1;
        } else {
            j += 1;
            cb += xb[j].1;
        }
    }
    Coupling { joint, marginal_x: a.clone(), marginal_y: b.clone() }
}
