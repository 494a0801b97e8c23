//! Contact force computation: projected Gauss–Seidel and the corrective loops.

mod newton;
mod pgs;

use thiserror::Error;

use crate::collision::CollisionError;
use crate::constraints::ConstraintError;
use crate::dynamics::DynamicsError;
use crate::linalg::LinalgError;

pub use newton::{
    correct, fast_loop, finish_fast, measure_penetration, newton_fast, newton_standard, standard_delassus, ContactProblem, IterationReport, LambdaState, NewtonConfig,
    NewtonOutcome, Scheme,
};
pub use pgs::{local_solve, pgs, PgsConfig, PgsSolution};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("contact group {group} has a singular Delassus block")]
    SingularBlock { group: usize },
    #[error(transparent)]
    Collision(#[from] CollisionError),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}
