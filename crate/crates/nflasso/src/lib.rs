//! Edge-structure learning for Gaussian graphical models with a
//! neighborhood-fused lasso.
//!
//! Each node `a` of a p-variable Gaussian model is regressed on the remaining
//! variables with an l1 penalty on the coefficients plus a fusion penalty on
//! coefficient differences across a known local-neighborhood graph. Nonzero
//! coefficients give the estimated neighborhood of `a`; per-node neighborhoods
//! are combined into an edge set by a union or intersection rule.
//!
//! Modules build on each other bottom-up:
//!
//! * [`linalg`]: dense SPD solves, tall pseudoinverse, Jacobi eigenvalues,
//!   and the upper-tail normal quantile used by the penalty formulas.
//! * [`localgraph`]: the prior local graph, its difference matrix, and the
//!   local-constancy diagnostics.
//! * [`lasso`]: weighted coordinate-descent lasso with a KKT certificate.
//! * [`estimator`]: standardization, penalty selection, the per-node fused
//!   solver, and whole-graph estimation.
//! * [`theory`]: computable versions of the quantities appearing in the
//!   method's guarantees (stability measures, compatibility, error bounds).
//! * [`sim`]: deterministic Gaussian samplers, ground-truth models, and the
//!   benchmark harness.
//!
//! The crate is `no_std`-compatible: disable default features and enable
//! `libm` to build without the standard library (an allocator is required).

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("nflasso requires either the `std` feature or the `libm` feature");

pub mod estimator;
pub mod lasso;
pub mod linalg;
pub mod localgraph;
pub mod sim;
pub mod theory;

mod float;
mod rng;

use core::fmt;

/// Errors shared across the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A Cholesky pivot fell below tolerance: the matrix is singular or
    /// indefinite at working precision.
    NotPositiveDefinite,
    /// An iterative routine hit its iteration cap before meeting tolerance.
    NonConvergence { iterations: usize },
    /// Operand shapes are incompatible.
    DimensionMismatch,
    /// A node or column index is outside `0..p`.
    IndexOutOfRange,
    /// A data column has (numerically) zero variance and cannot be
    /// standardized. Carries the column index.
    ConstantColumn(usize),
    /// A scalar argument is outside its admissible range.
    DomainError,
    /// A coefficient vector violates a structural constraint it is required
    /// to satisfy (e.g. a nonzero self-coefficient).
    ConstraintViolation,
    /// An index set that must be nonempty is empty.
    EmptySet,
    /// A matrix entry is NaN or infinite.
    NonFinite,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NotPositiveDefinite => write!(f, "matrix is not positive definite"),
            Error::NonConvergence { iterations } => {
                write!(f, "no convergence after {iterations} iterations")
            }
            Error::DimensionMismatch => write!(f, "dimension mismatch"),
            Error::IndexOutOfRange => write!(f, "index out of range"),
            Error::ConstantColumn(j) => write!(f, "column {j} is constant"),
            Error::DomainError => write!(f, "argument outside admissible domain"),
            Error::ConstraintViolation => write!(f, "structural constraint violated"),
            Error::EmptySet => write!(f, "index set is empty"),
            Error::NonFinite => write!(f, "non-finite entry"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
