//! Matrix permanents via Gray-coded sign sweeps.
//!
//! The permanent of a k x k matrix is a sum over 2^(k-1) sign vectors of
//! a product of signed column sums. Consecutive sign vectors are visited
//! in binary-reflected Gray order, so each step updates the column sums
//! with a single row instead of recomputing them, for a total cost of
//! O(k 2^k) scalar operations.
//!
//! [`minors_last_row`] amortizes the same sweep across all k submatrices
//! obtained by deleting the last row and one column: one sweep of the
//! first k-1 rows serves every column deletion at once, costing barely
//! more than a single permanent of the same size.

use crate::error::Error;
use crate::linalg::{Complex64, ComplexMatrix};
use crate::Result;

/// Largest dimension accepted by [`permanent_glynn`] and
/// [`minors_last_row`]. The sweep step counter is a `u64`, and above
/// this size the runtime is hopeless anyway.
pub const GLYNN_MAX_DIMENSION: usize = 64;

/// Largest dimension accepted by [`permanent_naive`]; 10! terms is the
/// most the all-permutations reference evaluator should ever grind
/// through.
pub const NAIVE_MAX_DIMENSION: usize = 10;

#[cfg(not(feature = "kahan"))]
#[derive(Clone, Copy, Default)]
struct Acc {
    sum: Complex64,
}

#[cfg(not(feature = "kahan"))]
impl Acc {
    #[inline]
    fn add(&mut self, term: Complex64) {
        self.sum += term;
    }

    #[inline]
    fn value(self) -> Complex64 {
        self.sum
    }
}

#[cfg(feature = "kahan")]
#[derive(Clone, Copy, Default)]
struct Acc {
    sum: Complex64,
    comp: Complex64,
}

#[cfg(feature = "kahan")]
impl Acc {
    #[inline]
    fn add(&mut self, term: Complex64) {
        let y = term - self.comp;
        let s = self.sum + y;
        self.comp = (s - self.sum) - y;
        self.sum = s;
    }

    #[inline]
    fn value(self) -> Complex64 {
        self.sum
    }
}

/// Walks the sign vectors delta in {-1, +1}^active_rows with delta_1
/// pinned to +1, in binary-reflected Gray order, maintaining the signed
/// column sums sum_i delta_i m[i][j] of the first `active_rows` rows.
///
/// Each [`advance`](GraySweep::advance) flips exactly one component of
/// delta (the one indexed by the number of trailing zeros of the step
/// counter, plus one) and applies the flip to every column sum with one
/// pass over the flipped row.
pub(crate) struct GraySweep<'a> {
    matrix: &'a ComplexMatrix,
    step: u64,
    total: u64,
    delta: Vec<f64>,
    colsums: Vec<Complex64>,
    sign: f64,
}

impl<'a> GraySweep<'a> {
    /// Starts a sweep over the first `active_rows` rows of `matrix`.
    /// All columns of `matrix` participate in the column sums.
    pub(crate) fn new(matrix: &'a ComplexMatrix, active_rows: usize) -> Self {
        debug_assert!(active_rows >= 1);
        debug_assert!(active_rows <= matrix.rows());
        debug_assert!(active_rows <= GLYNN_MAX_DIMENSION);
        let mut colsums = vec![Complex64::new(0.0, 0.0); matrix.cols()];
        for i in 0..active_rows {
            for (v, &b) in colsums.iter_mut().zip(matrix.row(i)) {
                *v += b;
            }
        }
        GraySweep {
            matrix,
            step: 0,
            total: 1u64 << (active_rows - 1),
            delta: vec![1.0; active_rows],
            colsums,
            sign: 1.0,
        }
    }

    /// Moves to the next sign vector. Returns `false` once all
    /// `2^(active_rows - 1)` vectors have been visited; the sweep state
    /// is unchanged in that case.
    #[inline]
    pub(crate) fn advance(&mut self) -> bool {
        if self.step + 1 >= self.total {
            return false;
        }
        self.step += 1;
        let flip = self.step.trailing_zeros() as usize + 1;
        self.delta[flip] = -self.delta[flip];
        self.sign = -self.sign;
        let scale = 2.0 * self.delta[flip];
        for (v, &b) in self.colsums.iter_mut().zip(self.matrix.row(flip)) {
            *v += scale * b;
        }
        true
    }

    #[inline]
    pub(crate) fn colsums(&self) -> &[Complex64] {
        &self.colsums
    }

    /// Product of the delta components, tracked incrementally.
    #[inline]
    pub(crate) fn sign(&self) -> f64 {
        self.sign
    }

    #[cfg(test)]
    pub(crate) fn delta(&self) -> &[f64] {
        &self.delta
    }
}

/// Permanent of a square matrix by the Gray-coded sign sweep.
///
/// Dimension 0 returns 1 (empty product) and dimension 1 returns the
/// single entry. Dimensions above [`GLYNN_MAX_DIMENSION`] are refused.
pub fn permanent_glynn(b: &ComplexMatrix) -> Result<Complex64> {
    if b.rows() != b.cols() {
        return Err(Error::invalid(format!(
            "permanent requires a square matrix, got {}x{}",
            b.rows(),
            b.cols()
        )));
    }
    let k = b.rows();
    if k > GLYNN_MAX_DIMENSION {
        return Err(Error::refused(format!(
            "dimension {k} exceeds the permanent kernel limit of {GLYNN_MAX_DIMENSION}"
        )));
    }
    if k == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    if k == 1 {
        return Ok(b.get(0, 0));
    }
    let mut sweep = GraySweep::new(b, k);
    let mut acc = Acc::default();
    loop {
        let prod: Complex64 = sweep.colsums().iter().product();
        acc.add(if sweep.sign() > 0.0 { prod } else { -prod });
        if !sweep.advance() {
            break;
        }
    }
    Ok(acc.value() * 0.5f64.powi(k as i32 - 1))
}

/// Permanent by direct summation over all k! permutations.
///
/// A deliberately independent reference evaluator: it shares no code
/// path with the sweep kernels and is used to cross-check them. Refuses
/// dimensions above [`NAIVE_MAX_DIMENSION`].
pub fn permanent_naive(b: &ComplexMatrix) -> Result<Complex64> {
    if b.rows() != b.cols() {
        return Err(Error::invalid(format!(
            "permanent requires a square matrix, got {}x{}",
            b.rows(),
            b.cols()
        )));
    }
    let k = b.rows();
    if k > NAIVE_MAX_DIMENSION {
        return Err(Error::refused(format!(
            "dimension {k} exceeds the reference evaluator limit of {NAIVE_MAX_DIMENSION}"
        )));
    }
    if k == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let term = |perm: &[usize]| -> Complex64 {
        perm.iter()
            .enumerate()
            .map(|(i, &j)| b.get(i, j))
            .product()
    };
    let mut perm: Vec<usize> = (0..k).collect();
    let mut counters = vec![0usize; k];
    let mut acc = term(&perm);
    let mut i = 1;
    while i < k {
        if counters[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(counters[i], i);
            }
            acc += term(&perm);
            counters[i] += 1;
            i = 1;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
    Ok(acc)
}

/// Permanents of all last-row-deleted minors of a square matrix.
///
/// Entry `l` (1-based via [`minor`](LastRowMinors::minor)) is the
/// permanent of the matrix with its last row and column `l` removed.
#[derive(Debug, Clone, PartialEq)]
pub struct LastRowMinors {
    minors: Vec<Complex64>,
}

impl LastRowMinors {
    /// Permanent of the minor that deletes the last row and 1-based
    /// column `l`.
    pub fn minor(&self, l: usize) -> Complex64 {
        self.minors[l - 1]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.minors
    }

    pub fn len(&self) -> usize {
        self.minors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.minors.is_empty()
    }
}

/// Computes every last-row minor permanent of a k x k matrix in one
/// sweep of the first k-1 rows.
///
/// The sweep maintains signed column sums v_j over rows 1..k-1. For each
/// sign vector, the products that omit one column are formed from prefix
/// products and a running suffix product, so all k minors cost O(k) per
/// step instead of k separate sweeps. Requires 2 <= k <=
/// [`GLYNN_MAX_DIMENSION`]. The last row itself never enters the
/// computation.
pub fn minors_last_row(b: &ComplexMatrix) -> Result<LastRowMinors> {
    if b.rows() != b.cols() {
        return Err(Error::invalid(format!(
            "last-row minors require a square matrix, got {}x{}",
            b.rows(),
            b.cols()
        )));
    }
    let k = b.rows();
    if k < 2 {
        return Err(Error::invalid(format!(
            "last-row minors require dimension at least 2, got {k}"
        )));
    }
    if k > GLYNN_MAX_DIMENSION {
        return Err(Error::refused(format!(
            "dimension {k} exceeds the permanent kernel limit of {GLYNN_MAX_DIMENSION}"
        )));
    }
    let mut sweep = GraySweep::new(b, k - 1);
    let mut accs = vec![Acc::default(); k];
    let mut prefix = vec![Complex64::new(1.0, 0.0); k];
    loop {
        let v = sweep.colsums();
        let mut running = Complex64::new(1.0, 0.0);
        for (p, &col) in prefix.iter_mut().zip(v) {
            *p = running;
            running *= col;
        }
        // The step sign rides along in the suffix product, so each term
        // is accumulated unconditionally; multiplying by (sign, 0) is
        // exact.
        let mut suffix = Complex64::new(sweep.sign(), 0.0);
        for ((acc, &p), &col) in accs.iter_mut().zip(&prefix).zip(v).rev() {
            acc.add(p * suffix);
            suffix *= col;
        }
        if !sweep.advance() {
            break;
        }
    }
    let scale = 0.5f64.powi(k as i32 - 2);
    Ok(LastRowMinors {
        minors: accs.into_iter().map(|a| a.value() * scale).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::IndexList;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(k: usize, seed: u64) -> ComplexMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexMatrix::from_fn(k, k, |_, _| {
            c(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)
        })
    }

    fn rel_err(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / (1.0 + b.norm())
    }

    #[test]
    fn empty_matrix_has_unit_permanent() {
        let b = ComplexMatrix::zeros(0, 0);
        assert_eq!(permanent_glynn(&b).unwrap(), c(1.0, 0.0));
        assert_eq!(permanent_naive(&b).unwrap(), c(1.0, 0.0));
    }

    #[test]
    fn one_by_one_returns_the_entry() {
        let b = ComplexMatrix::new(1, 1, vec![c(2.5, -3.0)]).unwrap();
        assert_eq!(permanent_glynn(&b).unwrap(), c(2.5, -3.0));
        assert_eq!(permanent_naive(&b).unwrap(), c(2.5, -3.0));
    }

    #[test]
    fn two_by_two_by_hand() {
        let b = ComplexMatrix::new(2, 2, vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0)])
            .unwrap();
        assert_eq!(permanent_glynn(&b).unwrap(), c(10.0, 0.0));
        assert_eq!(permanent_naive(&b).unwrap(), c(10.0, 0.0));

        let z = ComplexMatrix::new(2, 2, vec![c(1.0, 2.0), c(0.0, -1.0), c(2.0, 0.0), c(1.0, 1.0)])
            .unwrap();
        let expected = c(-1.0, 1.0);
        assert!(rel_err(permanent_glynn(&z).unwrap(), expected) <= 1e-15);
        assert!(rel_err(permanent_naive(&z).unwrap(), expected) <= 1e-15);
    }

    #[test]
    fn all_ones_gives_factorial() {
        let mut factorial = 1.0;
        for k in 1..=8usize {
            factorial *= k as f64;
            let b = ComplexMatrix::from_fn(k, k, |_, _| c(1.0, 0.0));
            let p = permanent_glynn(&b).unwrap();
            assert!(
                rel_err(p, c(factorial, 0.0)) <= 1e-12,
                "k={k}: got {p}, expected {factorial}"
            );
        }
    }

    #[test]
    fn glynn_matches_naive_on_random_matrices() {
        for k in 2..=7 {
            for seed in 0..10 {
                let b = random_matrix(k, seed + 100 * k as u64);
                let g = permanent_glynn(&b).unwrap();
                let n = permanent_naive(&b).unwrap();
                assert!(rel_err(g, n) <= 1e-12, "k={k} seed={seed}: {g} vs {n}");
            }
        }
    }

    #[test]
    fn identical_rows_agree_across_routes() {
        let mut b = random_matrix(5, 9);
        for j in 0..5 {
            let v = b.get(2, j);
            b.set(4, j, v);
        }
        let g = permanent_glynn(&b).unwrap();
        let n = permanent_naive(&b).unwrap();
        assert!(rel_err(g, n) <= 1e-12);
        assert!(g.norm() > 1e-6, "permanent of a rank-deficient matrix should not vanish");
    }

    #[test]
    fn non_square_is_rejected() {
        let b = ComplexMatrix::zeros(2, 3);
        assert!(matches!(permanent_glynn(&b), Err(Error::InvalidInput(_))));
        assert!(matches!(permanent_naive(&b), Err(Error::InvalidInput(_))));
        assert!(matches!(minors_last_row(&b), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn oversize_requests_are_refused() {
        let b = ComplexMatrix::zeros(65, 65);
        assert!(matches!(permanent_glynn(&b), Err(Error::Refused(_))));
        assert!(matches!(minors_last_row(&b), Err(Error::Refused(_))));
        let b = ComplexMatrix::zeros(11, 11);
        assert!(matches!(permanent_naive(&b), Err(Error::Refused(_))));
    }

    #[test]
    fn minors_reject_dimension_below_two() {
        let b = ComplexMatrix::new(1, 1, vec![c(1.0, 0.0)]).unwrap();
        assert!(matches!(minors_last_row(&b), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn minors_two_by_two_are_the_swapped_first_row() {
        let b = ComplexMatrix::new(2, 2, vec![c(3.0, 0.0), c(7.0, 0.0), c(50.0, 0.0), c(60.0, 0.0)])
            .unwrap();
        let m = minors_last_row(&b).unwrap();
        assert_eq!(m.minor(1), c(7.0, 0.0));
        assert_eq!(m.minor(2), c(3.0, 0.0));
    }

    #[test]
    fn minors_of_identity_pick_out_the_last_column() {
        let eye = ComplexMatrix::from_fn(3, 3, |i, j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let m = minors_last_row(&eye).unwrap();
        assert_eq!(m.as_slice(), &[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
    }

    #[test]
    fn minors_match_explicitly_deleted_submatrices() {
        for k in 2..=12usize {
            let b = random_matrix(k, 31 + k as u64);
            let minors = minors_last_row(&b).unwrap();
            assert_eq!(minors.len(), k);
            let rows = IndexList::new((1..k).collect::<Vec<_>>()).unwrap();
            for l in 1..=k {
                let cols: Vec<usize> = (1..=k).filter(|&j| j != l).collect();
                let sub = b.submatrix(&rows, &IndexList::new(cols).unwrap()).unwrap();
                let direct = if k - 1 <= 7 {
                    permanent_naive(&sub).unwrap()
                } else {
                    permanent_glynn(&sub).unwrap()
                };
                assert!(
                    rel_err(minors.minor(l), direct) <= 1e-10,
                    "k={k} l={l}: {} vs {direct}",
                    minors.minor(l)
                );
            }
        }
    }

    /// Expanding the permanent along the last row through the batched
    /// minors must reproduce the direct permanent.
    #[test]
    fn last_row_expansion_recombines_the_permanent() {
        for k in [2usize, 5, 9, 13, 16] {
            let b = random_matrix(k, 1000 + k as u64);
            let minors = minors_last_row(&b).unwrap();
            let last = b.row(k - 1);
            let recombined: Complex64 = last
                .iter()
                .zip(minors.as_slice())
                .map(|(&entry, &minor)| entry * minor)
                .sum();
            let direct = permanent_glynn(&b).unwrap();
            assert!(
                rel_err(recombined, direct) <= 1e-9,
                "k={k}: {recombined} vs {direct}"
            );
        }
    }

    #[test]
    fn minors_ignore_the_last_row_contents() {
        let mut a = random_matrix(6, 77);
        let before = minors_last_row(&a).unwrap();
        for j in 0..6 {
            a.set(5, j, c(1e9, -1e9));
        }
        let after = minors_last_row(&a).unwrap();
        assert_eq!(before, after);
    }

    /// Mid-sweep the incrementally maintained column sums must equal a
    /// from-scratch evaluation of sum_i delta_i m[i][j].
    #[test]
    fn gray_sweep_state_is_consistent() {
        let k = 7;
        let b = random_matrix(k, 5);
        let mut sweep = GraySweep::new(&b, k);
        let mut prev_delta = sweep.delta().to_vec();
        let mut steps = 1u64;
        loop {
            let delta = sweep.delta();
            assert_eq!(delta[0], 1.0, "the first sign is pinned");
            let flips = delta
                .iter()
                .zip(&prev_delta)
                .filter(|(a, b)| a != b)
                .count();
            if steps > 1 {
                assert_eq!(flips, 1, "each advance flips exactly one sign");
            }
            let expected_sign: f64 = delta.iter().product();
            assert_eq!(sweep.sign(), expected_sign);
            for j in 0..k {
                let direct: Complex64 = (0..k).map(|i| delta[i] * b.get(i, j)).sum();
                let incr = sweep.colsums()[j];
                assert!(
                    (direct - incr).norm() <= 1e-12 * (1.0 + direct.norm()),
                    "column {j} drifted at step {steps}"
                );
            }
            prev_delta = delta.to_vec();
            if !sweep.advance() {
                break;
            }
            steps += 1;
        }
        assert_eq!(steps, 1 << (k - 1), "sweep must visit every sign vector once");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        /// The permanent is invariant under row and column swaps.
        #[test]
        fn permanent_is_permutation_invariant(
            k in 2usize..6,
            seed in 0u64..500,
            swap in (0usize..6, 0usize..6),
        ) {
            let b = random_matrix(k, seed);
            let (x, y) = (swap.0 % k, swap.1 % k);
            let base = permanent_glynn(&b).unwrap();

            let mut rows: Vec<usize> = (1..=k).collect();
            rows.swap(x, y);
            let row_swapped = b
                .submatrix(&IndexList::new(rows).unwrap(), &IndexList::prefix(k))
                .unwrap();
            prop_assert!(rel_err(permanent_glynn(&row_swapped).unwrap(), base) <= 1e-12);

            let mut cols: Vec<usize> = (1..=k).collect();
            cols.swap(x, y);
            let col_swapped = b
                .submatrix(&IndexList::prefix(k), &IndexList::new(cols).unwrap())
                .unwrap();
            prop_assert!(rel_err(permanent_glynn(&col_swapped).unwrap(), base) <= 1e-12);
        }

        /// Scaling a single row scales the permanent by the same factor.
        #[test]
        fn permanent_is_linear_in_each_row(
            k in 2usize..6,
            seed in 0u64..500,
            row in 0usize..6,
            scale_re in -3.0f64..3.0,
            scale_im in -3.0f64..3.0,
        ) {
            let b = random_matrix(k, seed);
            let row = row % k;
            let factor = c(scale_re, scale_im);
            let mut scaled = b.clone();
            for j in 0..k {
                scaled.set(row, j, b.get(row, j) * factor);
            }
            let lhs = permanent_glynn(&scaled).unwrap();
            let rhs = permanent_glynn(&b).unwrap() * factor;
            prop_assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + rhs.norm()));
        }
    }
}
