//! Numerical laboratory for the Dirichlet eigenvalue problem of the
//! p-Laplacian, `-div(|grad u|^(p-2) grad u) = lambda |u|^(p-2) u`, on
//! uniform P1 discretizations of intervals and masked planar grids.

// `!(x > 0.0)` is used on purpose so that NaN takes the error branch.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod domain;
pub mod eigen;
pub mod error;
pub mod field;
pub mod functional;
pub mod higher;
pub mod linalg;
mod par;
pub mod ppoisson;
pub mod sweep;
pub mod verify;

pub use domain::{parse_mask, DomainMetadata, GridDomain};
pub use eigen::{EigenOptions, EigenPair, Method};
pub use error::{Error, Result, SolverFailure};
pub use field::ScalarField;
pub use verify::{verify, Suite, VerifyOptions, VerifyReport};
