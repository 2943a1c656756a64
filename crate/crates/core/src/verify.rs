//! Statistical verification of sampler output against exact
//! probabilities.
//!
//! The checks are deliberately boring frequentist machinery: total
//! variation distance for an effect-size readout, a goodness-of-fit
//! chi-square against an exact outcome table, a two-sample chi-square
//! for comparing samplers against each other, and a collision audit that
//! holds the observed duplicate rate against its analytic bound. Small
//! expected counts are pooled in table order before the chi-square so
//! the asymptotic distribution is trustworthy.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use crate::distribution::{collision_bound, ModeMultiset, OutcomeTable};
use crate::error::Error;
use crate::linalg::ComplexMatrix;
use crate::sampler::SampleRecord;
use crate::Result;

/// Default pooling threshold: cells are merged until each pooled cell
/// expects at least this many counts.
pub const DEFAULT_MIN_EXPECTED: f64 = 5.0;

/// Default significance level for pass/fail verdicts.
pub const DEFAULT_SIGNIFICANCE: f64 = 0.001;

/// Counted outcomes, keyed by multiset in lexicographic order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Histogram {
    counts: BTreeMap<ModeMultiset, u64>,
    total: u64,
}

impl Histogram {
    pub fn new() -> Self {
        Histogram::default()
    }

    pub fn add(&mut self, z: ModeMultiset) {
        self.add_count(z, 1);
    }

    pub fn add_count(&mut self, z: ModeMultiset, count: u64) {
        *self.counts.entry(z).or_default() += count;
        self.total += count;
    }

    pub fn from_outcomes(outcomes: impl IntoIterator<Item = ModeMultiset>) -> Self {
        let mut h = Histogram::new();
        for z in outcomes {
            h.add(z);
        }
        h
    }

    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a SampleRecord>) -> Self {
        Self::from_outcomes(records.into_iter().map(|r| r.z.clone()))
    }

    /// Folds another histogram into this one. Merging partial histograms
    /// from independent workers gives the same result as counting
    /// everything in one pass.
    pub fn merge(&mut self, other: Histogram) {
        for (z, c) in other.counts {
            *self.counts.entry(z).or_default() += c;
        }
        self.total += other.total;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of distinct outcomes observed.
    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn count_of(&self, z: &ModeMultiset) -> u64 {
        self.counts.get(z).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ModeMultiset, u64)> {
        self.counts.iter().map(|(z, &c)| (z, c))
    }
}

/// Upper-tail probability of the chi-square distribution with `dof`
/// degrees of freedom, via the regularized upper incomplete gamma
/// function.
pub fn chi_square_sf(statistic: f64, dof: usize) -> Result<f64> {
    if dof == 0 {
        return Err(Error::invalid("chi-square needs at least 1 degree of freedom"));
    }
    if !statistic.is_finite() || statistic < 0.0 {
        return Err(Error::invalid(format!(
            "chi-square statistic must be finite and non-negative, got {statistic}"
        )));
    }
    if statistic == 0.0 {
        return Ok(1.0);
    }
    Ok(gamma_ur(dof as f64 / 2.0, statistic / 2.0))
}

/// Outcome of a statistical test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Result of a distribution test: the statistic, its tail probability,
/// the degrees of freedom after pooling, the total variation distance as
/// an effect-size readout, and the verdict at the chosen significance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: f64,
    pub p_value: f64,
    pub dof: usize,
    pub tvd: f64,
    pub verdict: Verdict,
}

/// Checks that every observed outcome is part of the table's space.
fn check_histogram_against_table(exact: &OutcomeTable, emp: &Histogram) -> Result<()> {
    if emp.is_empty() {
        return Err(Error::invalid("empty histogram"));
    }
    for (z, _) in emp.iter() {
        if z.len() != exact.n() {
            return Err(Error::invalid(format!(
                "observed outcome {:?} has {} photons, table expects {}",
                z.values(),
                z.len(),
                exact.n()
            )));
        }
        if exact.probability_of(z).is_none() {
            return Err(Error::invalid(format!(
                "observed outcome {:?} is not in the outcome table",
                z.values()
            )));
        }
    }
    Ok(())
}

/// Total variation distance between the exact distribution and the
/// empirical frequencies: half the sum of absolute differences over the
/// whole outcome space.
pub fn tvd(exact: &OutcomeTable, emp: &Histogram) -> Result<f64> {
    check_histogram_against_table(exact, emp)?;
    let n = emp.total() as f64;
    let sum: f64 = exact
        .entries()
        .iter()
        .map(|(z, q)| (emp.count_of(z) as f64 / n - q).abs())
        .sum();
    Ok(sum / 2.0)
}

/// Greedy pooling in cell order: cells accumulate until the pooled
/// expectation clears `min_expected` (both expectations, for the
/// two-sample case), and a trailing remainder folds into the last
/// closed bucket.
fn pool_cells(cells: &[(f64, f64)], closing: impl Fn(f64) -> bool) -> Vec<(f64, f64)> {
    let mut buckets: Vec<(f64, f64)> = Vec::new();
    let mut cur = (0.0f64, 0.0f64);
    for &(o, e) in cells {
        cur.0 += o;
        cur.1 += e;
        if closing(cur.1) {
            buckets.push(cur);
            cur = (0.0, 0.0);
        }
    }
    if cur.0 > 0.0 || cur.1 > 0.0 {
        if let Some(last) = buckets.last_mut() {
            last.0 += cur.0;
            last.1 += cur.1;
        } else {
            buckets.push(cur);
        }
    }
    buckets
}

/// Goodness-of-fit chi-square of an empirical histogram against an
/// exact outcome table.
///
/// Expected counts are taken over the whole table (unobserved outcomes
/// contribute zeros), pooled in table order until each pooled cell
/// expects at least `min_expected`, with any remainder folded into the
/// final cell. The verdict passes when the p-value is at least
/// `significance`.
pub fn chisq_exact(
    exact: &OutcomeTable,
    emp: &Histogram,
    min_expected: f64,
    significance: f64,
) -> Result<TestReport> {
    if !(min_expected > 0.0) {
        return Err(Error::invalid("min_expected must be positive"));
    }
    check_histogram_against_table(exact, emp)?;
    let n = emp.total() as f64;
    let cells: Vec<(f64, f64)> = exact
        .entries()
        .iter()
        .map(|(z, q)| (emp.count_of(z) as f64, q * n))
        .collect();
    let buckets = pool_cells(&cells, |e| e >= min_expected);
    if buckets.len() < 2 {
        return Err(Error::invalid(format!(
            "pooling at min_expected = {min_expected} leaves {} cell(s); need at least 2",
            buckets.len()
        )));
    }
    let statistic: f64 = buckets
        .iter()
        .map(|&(o, e)| (o - e) * (o - e) / e)
        .sum();
    let dof = buckets.len() - 1;
    let p_value = chi_square_sf(statistic, dof)?;
    Ok(TestReport {
        statistic,
        p_value,
        dof,
        tvd: tvd(exact, emp)?,
        verdict: if p_value >= significance {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
    })
}

/// Two-sample chi-square: are two histograms draws from one
/// distribution?
///
/// Expected counts come from the pooled proportions of the union of
/// outcomes, in lexicographic order; cells pool until both rows expect
/// at least `min_expected`. The `tvd` field reports the distance
/// between the two empirical distributions.
pub fn chisq_two_sample(
    h1: &Histogram,
    h2: &Histogram,
    min_expected: f64,
    significance: f64,
) -> Result<TestReport> {
    if !(min_expected > 0.0) {
        return Err(Error::invalid("min_expected must be positive"));
    }
    if h1.is_empty() || h2.is_empty() {
        return Err(Error::invalid("empty histogram"));
    }
    let keys: BTreeSet<ModeMultiset> = h1
        .iter()
        .map(|(z, _)| z.clone())
        .chain(h2.iter().map(|(z, _)| z.clone()))
        .collect();
    let photon_count = keys.iter().next().expect("at least one key").len();
    if keys.iter().any(|z| z.len() != photon_count) {
        return Err(Error::invalid("histograms mix outcomes of different photon counts"));
    }
    let (n1, n2) = (h1.total() as f64, h2.total() as f64);
    let mut cells1 = Vec::with_capacity(keys.len());
    let mut cells2 = Vec::with_capacity(keys.len());
    let mut tvd_sum = 0.0;
    for z in &keys {
        let o1 = h1.count_of(z) as f64;
        let o2 = h2.count_of(z) as f64;
        let share = (o1 + o2) / (n1 + n2);
        cells1.push((o1, share * n1));
        cells2.push((o2, share * n2));
        tvd_sum += (o1 / n1 - o2 / n2).abs();
    }
    // Pool both rows with one rule so the buckets stay aligned: a bucket
    // closes only when both rows clear the threshold. The smaller row
    // drives the rule, so closing on min(e1, e2) keeps alignment.
    let mut buckets: Vec<(f64, f64, f64, f64)> = Vec::new();
    let mut cur = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..cells1.len() {
        cur.0 += cells1[i].0;
        cur.1 += cells1[i].1;
        cur.2 += cells2[i].0;
        cur.3 += cells2[i].1;
        if cur.1 >= min_expected && cur.3 >= min_expected {
            buckets.push(cur);
            cur = (0.0, 0.0, 0.0, 0.0);
        }
    }
    if cur.0 > 0.0 || cur.1 > 0.0 || cur.2 > 0.0 || cur.3 > 0.0 {
        if let Some(last) = buckets.last_mut() {
            last.0 += cur.0;
            last.1 += cur.1;
            last.2 += cur.2;
            last.3 += cur.3;
        } else {
            buckets.push(cur);
        }
    }
    if buckets.len() < 2 {
        return Err(Error::invalid(format!(
            "pooling at min_expected = {min_expected} leaves {} cell(s); need at least 2",
            buckets.len()
        )));
    }
    let statistic: f64 = buckets
        .iter()
        .map(|&(o1, e1, o2, e2)| (o1 - e1) * (o1 - e1) / e1 + (o2 - e2) * (o2 - e2) / e2)
        .sum();
    let dof = buckets.len() - 1;
    let p_value = chi_square_sf(statistic, dof)?;
    Ok(TestReport {
        statistic,
        p_value,
        dof,
        tvd: tvd_sum / 2.0,
        verdict: if p_value >= significance {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
    })
}

/// Observed duplicate rate held against the analytic collision bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionReport {
    /// Number of outcomes audited.
    pub samples: u64,
    /// Fraction of outcomes with at least one doubly occupied mode.
    pub duplicate_frequency: f64,
    /// Analytic bound on the collision probability, clamped into [0, 1].
    pub bound: f64,
    /// The same bound before clamping; above 1 it carries no
    /// information.
    pub bound_raw: f64,
    /// Average value of the bound over Haar-random networks of the same
    /// shape: `n(n-1) / (m+1)`.
    pub haar_reference: f64,
    /// Binomial standard error of `duplicate_frequency`.
    pub standard_error: f64,
    /// True when the observed rate exceeds the bound by more than three
    /// standard errors, which a correct sampler should essentially never
    /// produce.
    pub violation: bool,
}

/// Audits outcomes of the network `a` for collision-rate consistency.
pub fn collision_audit(outcomes: &[ModeMultiset], a: &ComplexMatrix) -> Result<CollisionReport> {
    if outcomes.is_empty() {
        return Err(Error::invalid("no outcomes to audit"));
    }
    let (m, n) = (a.rows(), a.cols());
    for z in outcomes {
        if z.len() != n {
            return Err(Error::invalid(format!(
                "outcome {:?} has {} photons, matrix expects {n}",
                z.values(),
                z.len()
            )));
        }
        z.check_modes(m)?;
    }
    let samples = outcomes.len() as u64;
    let duplicates = outcomes.iter().filter(|z| z.has_collision()).count();
    let duplicate_frequency = duplicates as f64 / samples as f64;
    let bound = collision_bound(a);
    let standard_error =
        (duplicate_frequency * (1.0 - duplicate_frequency) / samples as f64).sqrt();
    Ok(CollisionReport {
        samples,
        duplicate_frequency,
        bound: bound.clamped,
        bound_raw: bound.raw,
        haar_reference: (n * n.saturating_sub(1)) as f64 / (m + 1) as f64,
        standard_error,
        violation: duplicate_frequency > bound.clamped + 3.0 * standard_error,
    })
}
