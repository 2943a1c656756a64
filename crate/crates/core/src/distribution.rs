//! Outcome spaces and exact probability mass functions.
//!
//! An experiment with `n` photons and `m` output modes produces a
//! multiset of `n` occupied modes. Two coupled sample spaces appear
//! throughout the crate:
//!
//! * the physical space of non-decreasing mode multisets
//!   ([`ModeMultiset`]), with mass `q(z) = |Per A_z|^2 / mu(z)`, and
//! * the expanded space of ordered mode arrays ([`ModeArray`]), with
//!   mass `p(r) = |Per A_r|^2 / n!`.
//!
//! Sorting an array drawn from `p` yields a multiset drawn from `q`,
//! which is what the chain samplers exploit. `A_z` is the square matrix
//! whose rows are the rows of the network matrix `A` selected by the
//! modes of `z`, repeats included.
//!
//! Mode values are 1-based: modes run from 1 to `m` inclusive.

use std::sync::atomic::{AtomicU64, Ordering};

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::linalg::ComplexMatrix;
use crate::permanent::permanent_glynn;
use crate::Result;

/// Default ceiling on the number of outcomes an enumeration may
/// materialize or stream.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

/// Combination count above which [`marginal_p`] refuses to sum.
pub const MARGINAL_MAX_PHOTONS: usize = 20;

static NEGATIVE_CLAMP_COUNT: AtomicU64 = AtomicU64::new(0);

/// How many probability evaluations have been clamped up to zero since
/// the process started. Squared moduli cannot go negative, so a nonzero
/// count indicates something numerically unexpected upstream.
pub fn negative_clamp_count() -> u64 {
    NEGATIVE_CLAMP_COUNT.load(Ordering::Relaxed)
}

pub(crate) fn clamp_probability(x: f64) -> f64 {
    if x < 0.0 {
        NEGATIVE_CLAMP_COUNT.fetch_add(1, Ordering::Relaxed);
        0.0
    } else {
        x
    }
}

/// `k!` as a float. Exact for `k <= 22`.
pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|x| x as f64).product()
}

/// A non-decreasing multiset of occupied output modes.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct ModeMultiset {
    values: Vec<usize>,
}

impl ModeMultiset {
    /// Builds a multiset for an `m`-mode experiment, checking ordering
    /// and range.
    pub fn new(values: Vec<usize>, m: usize) -> Result<Self> {
        let z = Self::from_values(values)?;
        z.check_modes(m)?;
        Ok(z)
    }

    /// Builds a multiset when the mode count is not yet known: entries
    /// must be positive and non-decreasing, range checks happen at use.
    pub fn from_values(values: Vec<usize>) -> Result<Self> {
        if values.iter().any(|&v| v == 0) {
            return Err(Error::invalid("mode values are 1-based and must be positive"));
        }
        if values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid(format!(
                "multiset values must be non-decreasing, got {values:?}"
            )));
        }
        Ok(ModeMultiset { values })
    }

    pub(crate) fn from_sorted_unchecked(values: Vec<usize>) -> Self {
        debug_assert!(values.windows(2).all(|w| w[0] <= w[1]));
        debug_assert!(values.iter().all(|&v| v >= 1));
        ModeMultiset { values }
    }

    pub(crate) fn check_modes(&self, m: usize) -> Result<()> {
        match self.values.last() {
            Some(&max) if max > m => Err(Error::invalid(format!(
                "mode {max} out of range for {m} modes"
            ))),
            _ => Ok(()),
        }
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Iterates over `(mode, multiplicity)` pairs.
    pub fn multiplicities(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.values
            .chunk_by(|a, b| a == b)
            .map(|run| (run[0], run.len()))
    }

    /// True when some mode holds more than one photon.
    pub fn has_collision(&self) -> bool {
        self.values.windows(2).any(|w| w[0] == w[1])
    }
}

impl TryFrom<Vec<usize>> for ModeMultiset {
    type Error = Error;

    fn try_from(values: Vec<usize>) -> Result<Self> {
        ModeMultiset::from_values(values)
    }
}

impl From<ModeMultiset> for Vec<usize> {
    fn from(z: ModeMultiset) -> Self {
        z.values
    }
}

/// An ordered array of output modes, one per photon.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct ModeArray {
    values: Vec<usize>,
}

impl ModeArray {
    /// Builds an array for an `m`-mode experiment, checking range.
    pub fn new(values: Vec<usize>, m: usize) -> Result<Self> {
        let r = Self::from_values(values)?;
        r.check_modes(m)?;
        Ok(r)
    }

    /// Builds an array without a known mode count; entries must be
    /// positive.
    pub fn from_values(values: Vec<usize>) -> Result<Self> {
        if values.iter().any(|&v| v == 0) {
            return Err(Error::invalid("mode values are 1-based and must be positive"));
        }
        Ok(ModeArray { values })
    }

    pub(crate) fn check_modes(&self, m: usize) -> Result<()> {
        match self.values.iter().max() {
            Some(&max) if max > m => Err(Error::invalid(format!(
                "mode {max} out of range for {m} modes"
            ))),
            _ => Ok(()),
        }
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sorts the photons into the physical multiset they occupy.
    pub fn sorted(&self) -> ModeMultiset {
        let mut v = self.values.clone();
        v.sort_unstable();
        ModeMultiset::from_sorted_unchecked(v)
    }
}

impl TryFrom<Vec<usize>> for ModeArray {
    type Error = Error;

    fn try_from(values: Vec<usize>) -> Result<Self> {
        ModeArray::from_values(values)
    }
}

impl From<ModeArray> for Vec<usize> {
    fn from(r: ModeArray) -> Self {
        r.values
    }
}

/// Product of factorials of the mode multiplicities of `z`.
///
/// This is the size of the fiber of ordered arrays that sort to `z`,
/// dividing `n!`. Exactly integral for any realistic photon count.
pub fn mu(z: &ModeMultiset) -> f64 {
    z.multiplicities().map(|(_, s)| factorial(s)).product()
}

/// Rows of `a` selected by `modes` (1-based, repeats allowed), all
/// columns. Callers validate the mode range first.
fn rows_matrix(a: &ComplexMatrix, modes: &[usize]) -> ComplexMatrix {
    ComplexMatrix::from_fn(modes.len(), a.cols(), |i, j| a.get(modes[i] - 1, j))
}

/// Probability of the physical outcome `z` under the network matrix `a`:
/// `|Per A_z|^2 / mu(z)`.
pub fn prob_q(a: &ComplexMatrix, z: &ModeMultiset) -> Result<f64> {
    if z.len() != a.cols() {
        return Err(Error::invalid(format!(
            "outcome has {} photons but the matrix has {} columns",
            z.len(),
            a.cols()
        )));
    }
    z.check_modes(a.rows())?;
    let per = permanent_glynn(&rows_matrix(a, z.values()))?;
    Ok(clamp_probability(per.norm_sqr() / mu(z)))
}

/// Probability of the ordered outcome `r` in the expanded space:
/// `|Per A_r|^2 / n!`.
pub fn prob_p(a: &ComplexMatrix, r: &ModeArray) -> Result<f64> {
    if r.len() != a.cols() {
        return Err(Error::invalid(format!(
            "outcome has {} photons but the matrix has {} columns",
            r.len(),
            a.cols()
        )));
    }
    r.check_modes(a.rows())?;
    let per = permanent_glynn(&rows_matrix(a, r.values()))?;
    Ok(clamp_probability(per.norm_sqr() / factorial(r.len())))
}

/// Sum of squared permanent moduli over all k-column subsets of `a`,
/// with rows fixed to `modes`. The workhorse behind [`marginal_p`] and
/// the per-stage weights of the marginal chain sampler.
pub(crate) fn prefix_weight(a: &ComplexMatrix, modes: &[usize]) -> Result<f64> {
    let k = modes.len();
    if k == 0 {
        return Ok(1.0);
    }
    let n = a.cols();
    let mut acc = 0.0;
    for cols in (0..n).combinations(k) {
        let sub = ComplexMatrix::from_fn(k, k, |i, j| a.get(modes[i] - 1, cols[j]));
        acc += permanent_glynn(&sub)?.norm_sqr();
    }
    Ok(acc)
}

/// Marginal probability that the first `k` photons of an expanded-space
/// outcome land on `prefix`, `k <= n`:
/// `((n-k)!/n!) * sum over k-column subsets of |Per A^c_prefix|^2`.
///
/// The sum has `C(n, k)` terms, so photon counts above
/// [`MARGINAL_MAX_PHOTONS`] are refused.
pub fn marginal_p(a: &ComplexMatrix, prefix: &ModeArray) -> Result<f64> {
    let n = a.cols();
    let k = prefix.len();
    if k > n {
        return Err(Error::invalid(format!(
            "prefix has {k} photons but the matrix has only {n} columns"
        )));
    }
    if n > MARGINAL_MAX_PHOTONS {
        return Err(Error::refused(format!(
            "marginal sums over binomial(n, k) subsets; n = {n} exceeds the limit of {MARGINAL_MAX_PHOTONS}"
        )));
    }
    prefix.check_modes(a.rows())?;
    let weight = prefix_weight(a, prefix.values())?;
    Ok(clamp_probability(weight * factorial(n - k) / factorial(n)))
}

/// Number of size-`n` multisets over `m` modes: `C(m + n - 1, n)`.
/// `None` when the count overflows a `u128`.
pub fn phi_cardinality(m: u64, n: u64) -> Option<u128> {
    if m == 0 || n == 0 {
        return None;
    }
    let mut c: u128 = 1;
    for i in 1..=n as u128 {
        c = c.checked_mul(m as u128 - 1 + i)? / i;
    }
    Some(c)
}

/// Streams every size-`n` multiset over `m` modes in lexicographic
/// order, refusing up front when the space is larger than `cap`.
pub fn enumerate_phi(m: usize, n: usize, cap: u64) -> Result<PhiIter> {
    if m == 0 || n == 0 {
        return Err(Error::invalid("enumeration requires m >= 1 and n >= 1"));
    }
    match phi_cardinality(m as u64, n as u64) {
        Some(card) if card <= cap as u128 => Ok(PhiIter {
            m,
            next: Some(vec![1; n]),
        }),
        Some(card) => Err(Error::refused(format!(
            "outcome space holds {card} multisets, above the cap of {cap}"
        ))),
        None => Err(Error::refused(format!(
            "outcome space for m = {m}, n = {n} does not fit in 128 bits"
        ))),
    }
}

/// Lexicographic stream over the multisets of an outcome space. Does not
/// materialize the space.
#[derive(Debug)]
pub struct PhiIter {
    m: usize,
    next: Option<Vec<usize>>,
}

impl Iterator for PhiIter {
    type Item = ModeMultiset;

    fn next(&mut self) -> Option<ModeMultiset> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut advanced = false;
        for i in (0..succ.len()).rev() {
            if succ[i] < self.m {
                let v = succ[i] + 1;
                for entry in succ.iter_mut().skip(i) {
                    *entry = v;
                }
                advanced = true;
                break;
            }
        }
        if advanced {
            self.next = Some(succ);
        }
        Some(ModeMultiset::from_sorted_unchecked(current))
    }
}

/// The fully enumerated outcome space of a network matrix, with the
/// exact probability of every multiset. Entries are in lexicographic
/// order.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeTable {
    m: usize,
    n: usize,
    entries: Vec<(ModeMultiset, f64)>,
}

impl OutcomeTable {
    /// Enumerates the outcome space of `a` and evaluates `q` on every
    /// multiset. Refuses when the space exceeds `cap`.
    pub fn build(a: &ComplexMatrix, cap: u64) -> Result<Self> {
        let (m, n) = (a.rows(), a.cols());
        if n > m {
            return Err(Error::invalid(format!(
                "network matrix must be tall, got {m} modes for {n} photons"
            )));
        }
        let mut entries = Vec::new();
        for z in enumerate_phi(m, n, cap)? {
            let p = prob_q(a, &z)?;
            entries.push((z, p));
        }
        Ok(OutcomeTable { m, n, entries })
    }

    /// Assembles a table from externally supplied entries, sorting them
    /// and rejecting duplicates, bad modes, and invalid probabilities.
    pub fn from_entries(m: usize, n: usize, mut entries: Vec<(ModeMultiset, f64)>) -> Result<Self> {
        for (z, p) in &entries {
            if z.len() != n {
                return Err(Error::invalid(format!(
                    "table entry {:?} has {} photons, expected {n}",
                    z.values(),
                    z.len()
                )));
            }
            z.check_modes(m)?;
            if !p.is_finite() || *p < 0.0 {
                return Err(Error::invalid(format!(
                    "table entry {:?} has invalid probability {p}",
                    z.values()
                )));
            }
        }
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("table contains duplicate outcomes"));
        }
        Ok(OutcomeTable { m, n, entries })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(ModeMultiset, f64)] {
        &self.entries
    }

    /// Probability of `z`, or `None` when `z` is not in the table.
    pub fn probability_of(&self, z: &ModeMultiset) -> Option<f64> {
        self.entries
            .binary_search_by(|(key, _)| key.cmp(z))
            .ok()
            .map(|i| self.entries[i].1)
    }

    /// Sum of all probabilities; 1 within rounding for a table built
    /// from a block of a unitary.
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }
}

/// Upper bound on the probability that an outcome has two photons in
/// one mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CollisionBound {
    /// The bound as computed; may exceed 1 for strongly focusing
    /// matrices, in which case it carries no information.
    pub raw: f64,
    /// The bound clamped into [0, 1] for reporting.
    pub clamped: f64,
}

/// Bounds the collision probability of the outcome distribution of `a`
/// by `2 * sum_i sum_{k<l} |a_ik a_il|^2`.
///
/// For an m x n block of a Haar unitary the bound averages to
/// `n(n-1) / (m+1)`.
pub fn collision_bound(a: &ComplexMatrix) -> CollisionBound {
    let n = a.cols();
    let mut acc = 0.0;
    for i in 0..a.rows() {
        let row = a.row(i);
        for k in 0..n {
            let nk = row[k].norm_sqr();
            for l in k + 1..n {
                acc += nk * row[l].norm_sqr();
            }
        }
    }
    let raw = 2.0 * acc;
    CollisionBound {
        raw,
        clamped: raw.clamp(0.0, 1.0),
    }
}
