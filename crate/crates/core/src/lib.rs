//! Spectrum recovery for affine dynamical systems from partial observations of
//! a single trajectory.
//!
//! The library covers the full pipeline: simulating discrete and continuous
//! affine systems ([`systems`]), deriving dynamical operators from graphs
//! ([`graphs`]), stacking observations into Hankel-like matrices and estimating
//! their numerical rank ([`hankel`]), recovering eigenvalues with Prony, matrix
//! pencil and ESPRIT variants ([`estimators`]), predicting which eigenvalues
//! are recoverable from a given coordinate set ([`recoverability`]) and running
//! reproducible experiments with RMSE/INE metrics ([`eval`]).

pub mod error;
pub mod estimators;
pub mod eval;
pub mod graphs;
pub mod hankel;
pub mod io;
pub mod linalg;
pub mod recoverability;
pub mod systems;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
