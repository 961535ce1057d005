// SPDX-License-Identifier: Apache-2.0

//! Steady-state transport of non-interacting fermions on an open chain with
//! power-law hopping, on-site dephasing and infinite-bias boundary drive.

pub mod biorthogonal;
pub mod dynamics;
pub mod error;
pub mod krylov;
pub mod lattice;
pub mod lindblad;
pub mod ness;
pub mod operator_norm;
pub mod oracle;
pub mod regression;
pub mod transport;

pub use biorthogonal::{eigendecompose, sylvester_apply, theta, BiorthogonalEigensystem};
pub use dynamics::{evolve, EvolveControls, Trajectory};
pub use error::{Error, Result};
pub use lattice::{build_hamiltonian, hopping_amplitude, HoppingMatrix, LatticeSpec};
pub use lindblad::{
    build_damping, build_effective_hamiltonian, build_pump, eom_rhs, CorrelationMatrix, DissipationSpec,
    EffectiveHamiltonian,
};
pub use ness::{
    cut_current, density_profile, site_in_current, solve_ness, NessControls, NessResult, Preconditioning, SolveStrategy,
};

pub use faer::c64;
pub use operator_norm::{asymptotic_bound, bound_sums, norm_scaling_exponent, BoundQuantity, NormBoundReport};
pub use oracle::{build_liouvillian, oracle_ness, FockOperatorSet, Liouvillian, ManyBodyModel, OracleNess};
pub use regression::{linear_fit, LinearFit};
pub use transport::{
    classify_regime, exponent_curve, fit_const, fit_log, fit_powerlaw, series_grid, Classification, CurrentSolver,
    ExponentCurve, NessCurrentSolver, Regime, ScalingFit, ScalingModel, ScalingSeries,
};

/// Threads used inside a single dense factorization: 0 for all cores, 1 for
/// sequential, `n` for a fixed rayon pool.
pub fn set_linear_algebra_threads(threads: usize) {
    let par = match threads {
        1 => faer::Par::Seq,
        n => faer::Par::rayon(n),
    };
    faer::set_global_parallelism(par);
}
