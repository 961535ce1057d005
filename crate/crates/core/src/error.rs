// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors raised by the model builders, solvers and analysis routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("invalid dissipation: {0}")]
    InvalidDissipation(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("eigendecomposition rejected: {reason} (residual {residual:.3e})")]
    Eigensystem { reason: String, residual: f64 },

    #[error(
        "self-consistent solve did not converge after {iterations} iterations \
         (relative residual {residual:.3e})"
    )]
    NotConverged {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("integration failed at t = {time}: {reason}")]
    Integration { time: f64, reason: String },

    #[error("non-physical correlation matrix: {0}")]
    NonPhysical(String),

    #[error("oracle: {0}")]
    Oracle(String),

    #[error("fit: {0}")]
    Fit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
