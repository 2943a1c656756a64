//! Samplers for the outcome distribution of a network matrix.
//!
//! Three routes produce the same distribution at very different cost:
//!
//! * [`BruteForceSampler`] enumerates the whole outcome table and draws
//!   from it; exponential space, useful as ground truth on small
//!   problems.
//! * [`sample_a`] draws photons one at a time, weighting each candidate
//!   mode by a sum of squared permanents over all column subsets of the
//!   current size. No auxiliary randomness, but stage k costs
//!   `C(n, k)` permanent evaluations, for O(m n 3^n) total.
//! * [`sample_b`] first draws a uniform column permutation, then walks
//!   the same chain using only the leading columns of the permuted
//!   matrix. Each stage needs one batched minors sweep, so a whole
//!   sample costs about as much as two permanents of the full size plus
//!   O(m n^2) for the stage weights.
//!
//! Every sampler is deterministic given its generator. Batch entry
//! points give sample `i` its own counter-derived stream of the master
//! seed, so a batch is reproducible from `(master, i)` alone and the
//! parallel variant yields bit-identical output in the same order.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::{
    mu, prefix_weight, ModeMultiset, OutcomeTable, DEFAULT_ENUMERATION_CAP,
};
use crate::error::Error;
use crate::linalg::{Complex64, ComplexMatrix};
use crate::permanent::{minors_last_row, GLYNN_MAX_DIMENSION};
use crate::Result;

/// Photon count above which [`sample_a`] refuses to run; its stage sums
/// grow as 3^n. Use [`sample_a_with_limit`] to override deliberately.
pub const DEFAULT_MARGINAL_CHAIN_LIMIT: usize = 16;

/// Stage weights whose maximum falls below this threshold trigger a
/// warning: the next stages risk losing all precision to underflow.
pub const WEIGHT_UNDERFLOW_WARNING: f64 = 1e-280;

/// Default rejection budget for [`sample_collision_free`].
pub const DEFAULT_MAX_TRIES: u64 = 1000;

/// Which sampling route produced a record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplerKind {
    /// Full enumeration of the outcome table, then a table draw.
    #[serde(rename = "brute")]
    Brute,
    /// Stagewise chain with per-stage sums over all column subsets.
    A,
    /// Column-permuted chain with batched last-row minors.
    B,
}

/// A permutation of the columns `1..=n`, stored 1-based.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct ColumnPermutation(Vec<usize>);

impl ColumnPermutation {
    /// Builds a permutation, verifying that it is a bijection on
    /// `1..=values.len()`.
    pub fn new(values: Vec<usize>) -> Result<Self> {
        let n = values.len();
        let mut seen = vec![false; n + 1];
        for &v in &values {
            if v == 0 || v > n || seen[v] {
                return Err(Error::invalid(format!(
                    "{values:?} is not a permutation of 1..={n}"
                )));
            }
            seen[v] = true;
        }
        Ok(ColumnPermutation(values))
    }

    pub fn identity(n: usize) -> Self {
        ColumnPermutation((1..=n).collect())
    }

    pub fn values(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<usize>> for ColumnPermutation {
    type Error = Error;

    fn try_from(values: Vec<usize>) -> Result<Self> {
        ColumnPermutation::new(values)
    }
}

impl From<ColumnPermutation> for Vec<usize> {
    fn from(p: ColumnPermutation) -> Self {
        p.0
    }
}

/// Uniformly random permutation of `1..=n`.
pub fn random_permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ColumnPermutation {
    let mut values: Vec<usize> = (1..=n).collect();
    values.shuffle(rng);
    ColumnPermutation(values)
}

/// Identifies the exact generator state a batch sample was drawn from:
/// stream `stream` of the ChaCha generator seeded with `master`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamSeed {
    pub master: u64,
    pub stream: u64,
}

/// The generator for one slot of a batch: an independent, reproducible
/// stream derived from the master seed and the sample index.
pub fn stream_rng(master: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

/// One drawn outcome together with everything needed to audit it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    /// The sampled multiset of occupied modes.
    pub z: ModeMultiset,
    /// Exact probability of `z`, when the sampler computed it on the way.
    #[serde(rename = "prob", default, skip_serializing_if = "Option::is_none")]
    pub probability: Option<f64>,
    /// Route that produced the sample.
    pub sampler: SamplerKind,
    /// Column permutation used (permuted-chain samples only).
    #[serde(rename = "alpha", default, skip_serializing_if = "Option::is_none")]
    pub alpha_used: Option<ColumnPermutation>,
    /// Batch stream this sample came from, when drawn by a batch entry
    /// point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<StreamSeed>,
    /// Rejected draws before this one was accepted (collision-free
    /// sampling only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejections: Option<u64>,
}

/// Non-negative draw weights over candidate modes.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Builds a weight vector, rejecting empty, negative, or non-finite
    /// input. An all-zero vector is accepted here; it only becomes an
    /// error when a draw is attempted.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("weight vector must have at least one entry"));
        }
        if let Some(pos) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid(format!(
                "weight {} at index {pos} is not a finite non-negative number",
                weights[pos]
            )));
        }
        Ok(WeightVector(weights))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Draws a 1-based index with probability proportional to its weight.
///
/// A single uniform variate is scanned against the cumulative weights.
/// A variate landing exactly on a bucket boundary resolves to the lower
/// index, and zero-weight entries can never be selected, even at the
/// boundary `u = 0`. Errors with [`Error::ZeroWeights`] when no weight
/// is positive.
pub fn draw_weighted<R: Rng + ?Sized>(weights: &WeightVector, rng: &mut R) -> Result<usize> {
    weighted_index(weights.as_slice(), rng).map(|i| i + 1)
}

/// 0-based weighted draw on a raw slice; the hot path shared by every
/// sampler.
fn weighted_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroWeights);
    }
    if !total.is_finite() {
        return Err(Error::invalid("weights sum to a non-finite value"));
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if u <= acc {
                return Ok(i);
            }
        }
    }
    Ok(last_positive)
}

/// Shared argument checks for the chain samplers.
fn validate_network(a: &ComplexMatrix) -> Result<()> {
    let (m, n) = (a.rows(), a.cols());
    if n == 0 || m == 0 {
        return Err(Error::invalid("network matrix must be non-empty"));
    }
    if n > m {
        return Err(Error::invalid(format!(
            "network matrix must be tall, got {m} modes for {n} photons"
        )));
    }
    Ok(())
}

/// Errors on an all-zero stage, warns on near-underflow.
fn check_stage_weights(weights: &[f64], stage: usize) -> Result<()> {
    let max = weights.iter().fold(0.0f64, |acc, &w| acc.max(w));
    if !max.is_finite() {
        return Err(Error::invalid(format!(
            "stage {stage} weights overflowed to a non-finite value"
        )));
    }
    if max == 0.0 {
        return Err(Error::DegenerateWeights { stage });
    }
    if max < WEIGHT_UNDERFLOW_WARNING {
        log::warn!(
            "stage {stage} weights peak at {max:.3e}; further stages risk total underflow"
        );
    }
    Ok(())
}

fn finish_record(
    modes: Vec<usize>,
    final_weight: f64,
    sampler: SamplerKind,
    alpha_used: Option<ColumnPermutation>,
) -> SampleRecord {
    let mut sorted = modes;
    sorted.sort_unstable();
    let z = ModeMultiset::from_sorted_unchecked(sorted);
    let probability = final_weight / mu(&z);
    SampleRecord {
        z,
        probability: Some(probability),
        sampler,
        alpha_used,
        seed: None,
        rejections: None,
    }
}

/// Brute-force sampler: the exact outcome table plus cumulative sums,
/// built once and reused across draws.
#[derive(Clone, Debug)]
pub struct BruteForceSampler {
    table: OutcomeTable,
    cumulative: Vec<f64>,
    total: f64,
}

impl BruteForceSampler {
    /// Enumerates the outcome table of `a` (refusing above `cap`
    /// outcomes) and prepares cumulative sums.
    pub fn new(a: &ComplexMatrix, cap: u64) -> Result<Self> {
        Self::from_table(OutcomeTable::build(a, cap)?)
    }

    /// Prepares cumulative sums over an already-built table. Accepts any
    /// table with positive total mass, so callers can sample from
    /// hand-edited distributions.
    pub fn from_table(table: OutcomeTable) -> Result<Self> {
        let mut cumulative = Vec::with_capacity(table.len());
        let mut acc = 0.0;
        for (_, p) in table.entries() {
            acc += p;
            cumulative.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::invalid("outcome table carries no probability mass"));
        }
        Ok(BruteForceSampler {
            table,
            cumulative,
            total: acc,
        })
    }

    pub fn table(&self) -> &OutcomeTable {
        &self.table
    }

    /// Draws one outcome by binary search in the cumulative table. Uses
    /// the same boundary conventions as [`draw_weighted`].
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SampleRecord {
        let u = rng.random::<f64>() * self.total;
        let mut idx = self.cumulative.partition_point(|&c| c < u);
        while self.table.entries()[idx].1 == 0.0 {
            idx += 1;
        }
        let (z, p) = &self.table.entries()[idx];
        SampleRecord {
            z: z.clone(),
            probability: Some(*p),
            sampler: SamplerKind::Brute,
            alpha_used: None,
            seed: None,
            rejections: None,
        }
    }
}

/// One-shot brute-force draw. Builds the whole outcome table first, so
/// prefer [`BruteForceSampler`] when drawing repeatedly.
pub fn sample_brute<R: Rng + ?Sized>(a: &ComplexMatrix, rng: &mut R) -> Result<SampleRecord> {
    Ok(BruteForceSampler::new(a, DEFAULT_ENUMERATION_CAP)?.sample(rng))
}

/// Chain sampler with exhaustive per-stage column sums, limited to
/// [`DEFAULT_MARGINAL_CHAIN_LIMIT`] photons.
pub fn sample_a<R: Rng + ?Sized>(a: &ComplexMatrix, rng: &mut R) -> Result<SampleRecord> {
    sample_a_with_limit(a, rng, DEFAULT_MARGINAL_CHAIN_LIMIT)
}

/// [`sample_a`] with an explicit photon-count limit.
///
/// Photon `k` is drawn over modes `i` with weight equal to the sum of
/// `|Per|^2` over all k-column subsets, rows fixed to the modes drawn
/// so far plus `i`. The final stage weight is `|Per A_r|^2`, which
/// yields the outcome probability as a by-product.
pub fn sample_a_with_limit<R: Rng + ?Sized>(
    a: &ComplexMatrix,
    rng: &mut R,
    limit: usize,
) -> Result<SampleRecord> {
    validate_network(a)?;
    let (m, n) = (a.rows(), a.cols());
    if n > limit {
        return Err(Error::refused(format!(
            "stage sums grow as 3^n; n = {n} exceeds the limit of {limit} \
             (raise the limit explicitly or use the permuted-chain sampler)"
        )));
    }
    let mut modes: Vec<usize> = Vec::with_capacity(n);
    let mut weights = vec![0.0f64; m];
    let mut final_weight = 0.0;
    for k in 1..=n {
        for i in 1..=m {
            modes.push(i);
            weights[i - 1] = prefix_weight(a, &modes)?;
            modes.pop();
        }
        check_stage_weights(&weights, k)?;
        let choice = weighted_index(&weights, rng)?;
        modes.push(choice + 1);
        final_weight = weights[choice];
    }
    Ok(finish_record(modes, final_weight, SamplerKind::A, None))
}

/// The permuted-chain walk shared by [`sample_b`] and its fixed-alpha
/// variant. Returns the drawn modes (1-based, in draw order) and the
/// final stage weight `|Per A_r|^2`. When `trace` is supplied, every
/// stage's weight vector is appended to it.
fn permuted_chain<R: Rng + ?Sized>(
    a: &ComplexMatrix,
    alpha: &ColumnPermutation,
    rng: &mut R,
    mut trace: Option<&mut Vec<Vec<f64>>>,
) -> Result<(Vec<usize>, f64)> {
    let (m, n) = (a.rows(), a.cols());
    let permuted = a.select_columns(alpha.values());
    let mut weights = vec![0.0f64; m];
    for (i, w) in weights.iter_mut().enumerate() {
        *w = permuted.get(i, 0).norm_sqr();
    }
    check_stage_weights(&weights, 1)?;
    if let Some(t) = trace.as_deref_mut() {
        t.push(weights.clone());
    }
    let mut rows: Vec<usize> = Vec::with_capacity(n);
    let first = weighted_index(&weights, rng)?;
    rows.push(first);
    let mut final_weight = weights[first];
    for k in 2..=n {
        let mut b = ComplexMatrix::zeros(k, k);
        for (t, &ri) in rows.iter().enumerate() {
            b.row_mut(t).copy_from_slice(&permuted.row(ri)[..k]);
        }
        let minors = minors_last_row(&b)?;
        let ms = minors.as_slice();
        for (i, w) in weights.iter_mut().enumerate() {
            let row = permuted.row(i);
            let mut s = Complex64::new(0.0, 0.0);
            for (l, &minor) in ms.iter().enumerate() {
                s += row[l] * minor;
            }
            *w = s.norm_sqr();
        }
        check_stage_weights(&weights, k)?;
        if let Some(t) = trace.as_deref_mut() {
            t.push(weights.clone());
        }
        let choice = weighted_index(&weights, rng)?;
        rows.push(choice);
        final_weight = weights[choice];
    }
    Ok((rows.iter().map(|&r| r + 1).collect(), final_weight))
}

fn validate_for_chain(a: &ComplexMatrix) -> Result<()> {
    validate_network(a)?;
    if a.cols() > GLYNN_MAX_DIMENSION {
        return Err(Error::refused(format!(
            "photon count {} exceeds the permanent kernel limit of {GLYNN_MAX_DIMENSION}",
            a.cols()
        )));
    }
    Ok(())
}

/// Draws one outcome with the column-permuted chain: a fresh uniform
/// column permutation, then one weighted draw per photon with stage
/// weights from a batched minors sweep.
///
/// The record carries the exact outcome probability (the final stage
/// weight divided by the multiset fiber size) and the permutation used.
pub fn sample_b<R: Rng + ?Sized>(a: &ComplexMatrix, rng: &mut R) -> Result<SampleRecord> {
    validate_for_chain(a)?;
    let alpha = random_permutation(a.cols(), rng);
    let (modes, final_weight) = permuted_chain(a, &alpha, rng, None)?;
    Ok(finish_record(modes, final_weight, SamplerKind::B, Some(alpha)))
}

/// [`sample_b`] with a caller-fixed column permutation.
///
/// Reusing one permutation across draws biases the per-matrix output
/// distribution: the chain is exact only when the permutation is drawn
/// fresh and uniformly for every sample. A fixed permutation (such as
/// the identity) is statistically safe only for a single sample from a
/// Haar-random matrix, whose columns are already exchangeable. Intended
/// for debugging and for reproducing individual samples.
pub fn sample_b_with_alpha<R: Rng + ?Sized>(
    a: &ComplexMatrix,
    rng: &mut R,
    alpha: &ColumnPermutation,
) -> Result<SampleRecord> {
    validate_for_chain(a)?;
    if alpha.len() != a.cols() {
        return Err(Error::invalid(format!(
            "permutation length {} does not match the {} columns",
            alpha.len(),
            a.cols()
        )));
    }
    let (modes, final_weight) = permuted_chain(a, alpha, rng, None)?;
    Ok(finish_record(
        modes,
        final_weight,
        SamplerKind::B,
        Some(alpha.clone()),
    ))
}

#[cfg(test)]
pub(crate) fn sample_b_traced<R: Rng + ?Sized>(
    a: &ComplexMatrix,
    rng: &mut R,
    alpha: &ColumnPermutation,
) -> Result<(SampleRecord, Vec<Vec<f64>>)> {
    validate_for_chain(a)?;
    let mut trace = Vec::new();
    let (modes, final_weight) = permuted_chain(a, alpha, rng, Some(&mut trace))?;
    Ok((
        finish_record(modes, final_weight, SamplerKind::B, Some(alpha.clone())),
        trace,
    ))
}

/// Draws `count` outcomes with the permuted chain, deriving a master
/// seed from the caller's generator. See [`sample_b_batch_seeded`].
pub fn sample_b_batch<R: Rng + ?Sized>(
    a: &ComplexMatrix,
    count: u64,
    rng: &mut R,
) -> Result<Vec<SampleRecord>> {
    sample_b_batch_seeded(a, count, rng.next_u64())
}

/// Draws `count` outcomes, sample `i` from generator stream
/// `(master, i)`. The output is a pure function of `(a, count, master)`
/// and each record carries its own stream coordinates.
pub fn sample_b_batch_seeded(
    a: &ComplexMatrix,
    count: u64,
    master: u64,
) -> Result<Vec<SampleRecord>> {
    validate_for_chain(a)?;
    (0..count)
        .map(|i| {
            let mut rng = stream_rng(master, i);
            let mut record = sample_b(a, &mut rng)?;
            record.seed = Some(StreamSeed { master, stream: i });
            Ok(record)
        })
        .collect()
}

/// Parallel version of [`sample_b_batch_seeded`]. Identical output in
/// identical order: each sample owns its stream, so scheduling cannot
/// leak between samples.
pub fn sample_b_batch_parallel(
    a: &ComplexMatrix,
    count: u64,
    master: u64,
) -> Result<Vec<SampleRecord>> {
    validate_for_chain(a)?;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(master, i);
            let mut record = sample_b(a, &mut rng)?;
            record.seed = Some(StreamSeed { master, stream: i });
            Ok(record)
        })
        .collect()
}

/// Rejection-samples the permuted chain until the outcome has at most
/// one photon per mode, giving up after `max_tries` draws.
///
/// The record reports how many draws were rejected. The expected number
/// of tries is `1 / (1 - P)` where `P` is the outcome collision
/// probability; [`crate::distribution::collision_bound`] bounds `P`
/// cheaply in advance.
pub fn sample_collision_free<R: Rng + ?Sized>(
    a: &ComplexMatrix,
    rng: &mut R,
    max_tries: u64,
) -> Result<SampleRecord> {
    validate_for_chain(a)?;
    if max_tries == 0 {
        return Err(Error::invalid("max_tries must be at least 1"));
    }
    for rejected in 0..max_tries {
        let record = sample_b(a, rng)?;
        if !record.z.has_collision() {
            return Ok(SampleRecord {
                rejections: Some(rejected),
                ..record
            });
        }
    }
    Err(Error::MaxTriesExceeded { tries: max_tries })
}
