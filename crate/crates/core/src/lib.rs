//! Exact sampling from the output distribution of linear-optical networks.
//!
//! The crate is organised around a single pipeline:
//!
//! 1. [`linalg`] builds the network matrices: Haar-random unitaries, their
//!    first-column blocks, and row/column submatrices addressed in the
//!    1-based convention used throughout the public API.
//! 2. [`permanent`] evaluates matrix permanents with Gray-coded
//!    sign-sweep kernels, including a batched kernel that returns every
//!    last-row minor of a square matrix in one sweep.
//! 3. [`distribution`] defines the outcome space (multisets of occupied
//!    output modes), the exact probability mass functions on it, and
//!    collision diagnostics.
//! 4. [`sampler`] draws outcomes: a brute-force enumerator, a marginal
//!    chain sampler with per-stage permanent sums, and the fast
//!    column-permuted sampler whose per-sample cost is dominated by two
//!    permanent-sized sweeps.
//! 5. [`verify`] checks sampler output against exact probabilities with
//!    total variation distance and chi-square tests.
//! 6. [`io`] reads and writes the on-disk formats (matrix JSON, sample
//!    JSONL/CSV, outcome tables, test reports).
//!
//! Randomness is always explicit: every sampling entry point takes either
//! an `Rng` or a seed, and batch samplers give each sample its own
//! counter-derived stream so results are independent of scheduling order.

pub mod distribution;
pub mod error;
pub mod io;
pub mod linalg;
pub mod permanent;
pub mod sampler;
pub mod verify;

pub use error::Error;
pub use linalg::{Complex64, ComplexMatrix, IndexList};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
