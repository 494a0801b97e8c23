//! Implicit finite-element contact resolution with Coulomb friction.
//!
//! The crate follows the classic free-motion / corrective-motion split:
//! each body is advanced without contact forces, constraint forces are
//! found with projected Gauss–Seidel on the Delassus operator, and the
//! corrective motion is applied on top. Besides the single-correction
//! scheme it provides a recursive (Newton) correction that re-linearizes
//! contact directions, in two flavours:
//!
//! * `standard`: rebuilds `W = Σ H A⁻¹ Hᵀ` and integrates the mechanical
//!   state every iteration;
//! * `fast`: builds `W_g = G A⁻¹ Gᵀ` once per step, then rebuilds
//!   `W = D W_g Dᵀ` and updates proximity points with `W_g Dᵀ λ` only.

pub mod linalg;
pub mod dynamics;
pub mod collision;
pub mod constraints;
pub mod solver;
pub mod scene;
