//! Random kernel matrices: sampling, spectral norms, theoretical bounds, and a
//! linear reconstruction attack on noisy kernel ridge regression coefficients.
//!
//! The crate is organised bottom-up:
//!
//! - [`sampling`]: seeded subgaussian sample sets.
//! - [`kernels`]: polynomial / Gaussian / Laplacian kernel matrices.
//! - [`spectral`]: Lanczos spectral norm plus a dense Jacobi oracle.
//! - [`bounds`]: closed-form spectral-norm bounds and regime thresholds.
//! - [`krr`]: closed-form kernel ridge regression.
//! - [`attack`]: noisy coefficient release and the rounding reconstruction.
//! - [`experiments`]: reproducible sweeps written as CSV.
//! - [`cli`]: the `randkern` command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attack;
pub mod bounds;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod kernels;
pub mod krr;
pub mod matrix;
pub mod sampling;
pub mod spectral;

pub use error::{Error, Result};
pub use matrix::Matrix;
