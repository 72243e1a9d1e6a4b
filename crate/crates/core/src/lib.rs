//! Linear positivity-preserving upwind discontinuous Galerkin scheme for
//! chemotaxis models with attraction, repulsion, logistic growth and a
//! gradient-dependent damping term.
//!
//! The cell density lives in piecewise constants, the chemical signals in
//! continuous piecewise linears. Each time step solves the signal equations
//! first and then one linear system for the density whose matrix is an
//! M-matrix, so the density stays nonnegative.

// `!(x > 0.0)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::too_many_arguments)]

pub mod celldensity;
pub mod cli;
pub mod error;
pub mod fespace;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod params;
pub mod signals;
pub mod simulation;

pub use error::{Error, Result};
