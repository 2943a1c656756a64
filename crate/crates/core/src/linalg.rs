//! Complex matrices, submatrix addressing, and Haar-random unitaries.
//!
//! Matrices are dense, row-major, and sized at construction. Element
//! access through [`ComplexMatrix::get`] is 0-based like ordinary Rust
//! indexing; the selector type [`IndexList`] used by
//! [`ComplexMatrix::submatrix`] is 1-based, matching the mode-numbering
//! convention of the sampling modules, where the first output mode is
//! mode 1.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Double-precision complex scalar used everywhere in this crate.
pub type Complex64 = num_complex::Complex<f64>;

/// A list of 1-based row or column indices.
///
/// Used to address submatrices. The list itself only guarantees that no
/// index is zero; range checks against a concrete matrix dimension happen
/// at the point of use. Row lists may contain repeats (a row can be
/// selected more than once), while column lists must be duplicate-free;
/// [`ComplexMatrix::submatrix`] enforces the latter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IndexList(Vec<usize>);

impl IndexList {
    /// Builds an index list, rejecting zero entries (indices are 1-based).
    pub fn new(indices: impl Into<Vec<usize>>) -> Result<Self> {
        let indices = indices.into();
        if let Some(pos) = indices.iter().position(|&i| i == 0) {
            return Err(Error::invalid(format!(
                "index list entry {pos} is 0; indices are 1-based"
            )));
        }
        Ok(IndexList(indices))
    }

    /// The list `1, 2, ..., k`.
    pub fn prefix(k: usize) -> Self {
        IndexList((1..=k).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major data.
    ///
    /// Fails if the data length does not equal `rows * cols` or if any
    /// entry is non-finite.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "matrix data has {} entries, expected {} for a {rows}x{cols} matrix",
                data.len(),
                rows * cols
            )));
        }
        if let Some(pos) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid(format!(
                "matrix entry at flat index {pos} is not finite"
            )));
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    /// An all-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    /// Builds a matrix by evaluating `f(row, col)` at each 0-based position.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        ComplexMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Element at 0-based position `(i, j)`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    /// Overwrites the element at 0-based position `(i, j)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: Complex64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = value;
    }

    /// Row `i` (0-based) as a contiguous slice.
    #[inline]
    pub fn row(&self, i: usize) -> &[Complex64] {
        debug_assert!(i < self.rows);
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [Complex64] {
        debug_assert!(i < self.rows);
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Copies out the submatrix addressed by 1-based row and column lists.
    ///
    /// Rows may repeat (the same physical row can appear several times in
    /// the result); columns must be distinct. Any index outside
    /// `1..=rows` or `1..=cols` is rejected.
    pub fn submatrix(&self, row_idx: &IndexList, col_idx: &IndexList) -> Result<ComplexMatrix> {
        for &r in row_idx.as_slice() {
            if r > self.rows {
                return Err(Error::invalid(format!(
                    "row index {r} out of range for a matrix with {} rows",
                    self.rows
                )));
            }
        }
        let mut seen = vec![false; self.cols + 1];
        for &c in col_idx.as_slice() {
            if c > self.cols {
                return Err(Error::invalid(format!(
                    "column index {c} out of range for a matrix with {} columns",
                    self.cols
                )));
            }
            if seen[c] {
                return Err(Error::invalid(format!("duplicate column index {c}")));
            }
            seen[c] = true;
        }
        let mut data = Vec::with_capacity(row_idx.len() * col_idx.len());
        for &r in row_idx.as_slice() {
            let row = self.row(r - 1);
            for &c in col_idx.as_slice() {
                data.push(row[c - 1]);
            }
        }
        Ok(ComplexMatrix {
            rows: row_idx.len(),
            cols: col_idx.len(),
            data,
        })
    }

    /// Copies out the columns listed in `cols` (1-based, must be valid and
    /// distinct), keeping all rows. Used to apply a column permutation.
    pub(crate) fn select_columns(&self, cols: &[usize]) -> ComplexMatrix {
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for i in 0..self.rows {
            let row = self.row(i);
            for &c in cols {
                data.push(row[c - 1]);
            }
        }
        ComplexMatrix {
            rows: self.rows,
            cols: cols.len(),
            data,
        }
    }

    /// Largest absolute deviation of `A* A` from the identity.
    ///
    /// Zero (up to rounding) exactly when the columns are orthonormal.
    /// For an m x n block of a unitary this is a cheap health check that
    /// the block really came from a unitary.
    pub fn orthonormality_deviation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.cols {
            for k in j..self.cols {
                let mut g = Complex64::new(0.0, 0.0);
                for i in 0..self.rows {
                    g += self.get(i, j).conj() * self.get(i, k);
                }
                let target = if j == k { 1.0 } else { 0.0 };
                worst = worst.max((g - Complex64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    #[cfg(test)]
    pub(crate) fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j))
    }

    pub(crate) fn from_nalgebra(m: &DMatrix<Complex64>) -> ComplexMatrix {
        ComplexMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

/// Draws an `m x m` unitary from the Haar (uniform) measure, seeded.
///
/// Deterministic in `(m, seed)`: the same pair always yields the same
/// matrix, independent of platform or call site.
pub fn haar_unitary(m: usize, seed: u64) -> Result<ComplexMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    haar_unitary_with(m, &mut rng)
}

/// Draws an `m x m` Haar unitary using the caller's generator.
pub fn haar_unitary_with<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<ComplexMatrix> {
    if m == 0 {
        return Err(Error::invalid("unitary dimension must be at least 1"));
    }
    Ok(phase_fixed_q(m, m, rng))
}

/// Draws an `m x n` matrix with Haar-uniform orthonormal columns,
/// seeded.
///
/// Distributed like the first `n` columns of [`haar_unitary`] (though
/// not equal to them draw for draw), at `O(m n^2)` cost instead of
/// `O(m^3)` — the difference matters for wide networks with few
/// photons.
pub fn haar_isometry(m: usize, n: usize, seed: u64) -> Result<ComplexMatrix> {
    if n == 0 || n > m {
        return Err(Error::invalid(format!(
            "column count {n} must satisfy 1 <= n <= {m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(phase_fixed_q(m, n, &mut rng))
}

/// QR factor of an `m x n` standard complex Gaussian matrix with each
/// column of Q rescaled by the unit phase of the matching diagonal entry
/// of R. The rescaling selects the unique factor with a
/// positive-diagonal R, which is what makes the output exactly
/// Haar-distributed rather than biased by the factorization's internal
/// phase conventions.
fn phase_fixed_q<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> ComplexMatrix {
    let ginibre = DMatrix::<Complex64>::from_fn(m, n, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = ginibre.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let modulus = d.norm();
        if modulus > 0.0 {
            let phase = d / modulus;
            for i in 0..m {
                q[(i, j)] *= phase;
            }
        }
    }
    ComplexMatrix::from_nalgebra(&q)
}

/// First `n` columns of a square unitary: the network matrix seen by `n`
/// photons entering the first `n` input modes.
pub fn input_matrix(u: &ComplexMatrix, n: usize) -> Result<ComplexMatrix> {
    if u.rows() != u.cols() {
        return Err(Error::invalid(format!(
            "expected a square matrix, got {}x{}",
            u.rows(),
            u.cols()
        )));
    }
    if n == 0 || n > u.cols() {
        return Err(Error::invalid(format!(
            "photon count {n} must satisfy 1 <= n <= {}",
            u.cols()
        )));
    }
    u.submatrix(&IndexList::prefix(u.rows()), &IndexList::prefix(n))
}
