//! Symmetric sparse storage, envelope Cholesky, and dense helpers.

mod cholesky;
mod dense;
mod ordering;
mod rows;
mod sparse;

pub use cholesky::{factorize, solve, solve_multi, Factorization};
pub use dense::{gemm, DenseMat};
pub use ordering::reverse_cuthill_mckee;
pub use rows::SparseRows;
pub use sparse::SparseSym;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not positive definite: pivot {pivot:e} at row {row}")]
    NotSpd { row: usize, pivot: f64 },
    #[error("dimension mismatch in {op}: expected {expected}, found {found}")]
    DimensionMismatch { op: &'static str, expected: usize, found: usize },
}
