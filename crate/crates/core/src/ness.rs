// SPDX-License-Identifier: Apache-2.0

//! Non-equilibrium steady state of the dephased, boundary-driven chain.
//!
//! Dephasing feeds the diagonal of `C` back into the pump, so the steady
//! state is fixed by the hole occupations `x = diag C` alone:
//!
//! ```text
//! x = gamma M x + Gamma b,    M[i][k] = Theta[i][i][k],  b = M e_L
//! ```
//!
//! `I - gamma M` is real symmetric positive definite (`H_eff` is complex
//! symmetric and the columns of `gamma M` sum to less than one), so the
//! production path runs preconditioned conjugate gradients whose operator is
//! one `O(L^3)` Lyapunov diagonal. `M` itself is never formed there.

use std::time::Instant;

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::biorthogonal::{
    diagonal_kernel, eigendecompose, sylvester_apply, sylvester_diagonal, BiorthogonalEigensystem,
    EXPLICIT_KERNEL_MAX_SITES,
};
use crate::error::{Error, Result};
use crate::krylov::{damped_fixed_point, norm, preconditioned_cg, IterativeOutcome};
use crate::lattice::{build_hamiltonian, HoppingMatrix, LatticeSpec};
use crate::lindblad::{build_damping, build_effective_hamiltonian, build_pump, CorrelationMatrix, DissipationSpec};

/// Above this per-site coherent-hop weight the perturbative rate
/// preconditioner stops paying for itself.
const PRECONDITIONER_WEIGHT_LIMIT: f64 = 16.0;
const DENSITY_TOL: f64 = 1e-9;
const IMAGINARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStrategy {
    /// Matrix-free conjugate gradients (any size).
    Krylov,
    /// Dense `M` and a direct solve; `L <= 128` only.
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioning {
    Auto,
    Always,
    Never,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NessControls {
    /// Required relative self-consistency residual.
    pub tolerance: f64,
    /// The Krylov solve keeps improving down to this level while it still
    /// makes progress; current conservation is only as good as this residual.
    pub polish_tolerance: f64,
    pub max_iterations: usize,
    /// Explicit residual recomputation period.
    pub restart: usize,
    pub strategy: SolveStrategy,
    pub preconditioning: Preconditioning,
    /// Relaxation factor of the fixed-point fallback.
    pub fallback_omega: f64,
}

impl Default for NessControls {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            polish_tolerance: 1e-14,
            max_iterations: 500,
            restart: 30,
            strategy: SolveStrategy::Krylov,
            preconditioning: Preconditioning::Auto,
            fallback_omega: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub residual: f64,
    pub residual_history: Vec<f64>,
    pub wall_time_s: f64,
    pub strategy: SolveStrategy,
    pub preconditioned: bool,
    pub fallback_used: bool,
    pub biorthogonality_residual: f64,
    pub reconstruction_residual: f64,
    pub condition_estimate: f64,
}

#[derive(Debug, Clone)]
pub struct NessResult {
    pub correlation: CorrelationMatrix,
    pub density: Vec<f64>,
    /// Entry 0 is the injected current `Gamma (1 - n_1)`; entry `m > 0` is
    /// the coherent in-current from all sites to the left of `m`.
    pub site_in_current: Vec<f64>,
    /// Net current across the bond cut between sites `m` and `m + 1`.
    pub cut_current: Vec<f64>,
    /// `Gamma <n_L>`.
    pub current: f64,
    /// `1 / current`.
    pub resistance: f64,
    pub diagnostics: SolverDiagnostics,
}

/// Number of holes per site ...
pub fn density_profile(c: &CorrelationMatrix) -> Result<Vec<f64>> {
    let n = c.sites();
    let mut out = Vec::with_capacity(n);
    for m in 0..n {
        let z = c.get(m, m);
        if z.im.abs() > IMAGINARY_TOL {
            return Err(Error::NonPhysical(format!(
                "diagonal element {m} has imaginary part {:.3e}",
                z.im
            )));
        }
        let density = 1.0 - z.re;
        if !(-DENSITY_TOL..=1.0 + DENSITY_TOL).contains(&density) {
            return Err(Error::NonPhysical(format!("density {density} at site {m}")));
        }
        out.push(density);
    }
    Ok(out)
}

/// Coherent current into site `m` (0-based, `1 <= m < L`) from the sites to
/// its left: `sum_r 2 t_r Im C[m][m-r]`.
pub fn site_in_current(c: &CorrelationMatrix, spec: &LatticeSpec, m: usize) -> Result<f64> {
    let n = c.sites();
    if m == 0 || m >= n {
        return Err(Error::Domain(format!(
            "site in-current needs 1 <= m < {n} (0-based), got {m}; the first site is fed by the lead"
        )));
    }
    Ok((1..=m)
        .map(|r| 2.0 * spec.amplitude_unchecked(r) * c.get(m, m - r).im)
        .sum())
}

/// `Gamma (1 - n_1)`: particle flow from the left lead into site 1.
pub fn injection_current(c: &CorrelationMatrix, diss: &DissipationSpec) -> f64 {
    diss.boundary() * c.get(0, 0).re
}

/// `Gamma n_L`: particle flow from site L into the right lead.
pub fn extraction_current(c: &CorrelationMatrix, diss: &DissipationSpec) -> f64 {
    let n = c.sites();
    diss.boundary() * (1.0 - c.get(n - 1, n - 1).re)
}

/// Total coherent current across the cut between sites `m` and `m + 1`
/// (0-based, `m < L - 1`), positive from left to right.
pub fn cut_current(c: &CorrelationMatrix, spec: &LatticeSpec, m: usize) -> Result<f64> {
    let n = c.sites();
    if m + 1 >= n {
        return Err(Error::Domain(format!("cut index {m} out of range for L = {n}")));
    }
    let mut total = 0.0;
    for i in 0..=m {
        for j in m + 1..n {
            total += 2.0 * spec.amplitude_unchecked(j - i) * c.get(j, i).im;
        }
    }
    Ok(total)
}

/// All `L - 1` cut currents in `O(L^2)`.
pub fn all_cut_currents(c: &CorrelationMatrix, spec: &LatticeSpec) -> Vec<f64> {
    let n = c.sites();
    if n < 2 {
        return Vec::new();
    }
    let table = spec.amplitude_table();
    let flow = |from: usize, to: usize| 2.0 * table[from.abs_diff(to)] * c.get(to, from).im;
    let mut cuts = Vec::with_capacity(n - 1);
    let mut current: f64 = (1..n).map(|j| flow(0, j)).sum();
    cuts.push(current);
    for m in 1..n - 1 {
        // Moving site m to the left block.
        for i in 0..m {
            current -= flow(i, m);
        }
        for j in m + 1..n {
            current += flow(m, j);
        }
        cuts.push(current);
    }
    cuts
}

/// Classical hopping-rate approximation of `I - gamma M`, valid when the
/// coherent hop weight per dephasing time is small.
fn rate_preconditioner(h: &HoppingMatrix, damping: &[f64], gamma: f64) -> (Mat<f64>, f64) {
    let n = h.sites();
    let mut a = Mat::<f64>::zeros(n, n);
    let mut max_weight = 0.0_f64;
    for k in 0..n {
        let mut col = 0.0;
        for i in 0..n {
            if i == k {
                continue;
            }
            let (di, dk) = (damping[i], damping[k]);
            let w = gamma * h.get(i, k).powi(2) / (2.0 * di * dk * (di + dk));
            a[(i, k)] = -w;
            col += w;
        }
        a[(k, k)] = 1.0 - gamma / (2.0 * damping[k]) + col;
        max_weight = max_weight.max(col);
    }
    (a, max_weight)
}

struct SelfConsistent<'a> {
    eig: &'a BiorthogonalEigensystem,
    gamma: f64,
}

impl SelfConsistent<'_> {
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mv = sylvester_diagonal(self.eig, v);
        v.iter().zip(mv).map(|(x, y)| x - self.gamma * y).collect()
    }
}

/// Solves for the steady state and assembles all observables.
pub fn solve_ness(spec: &LatticeSpec, diss: &DissipationSpec, controls: &NessControls) -> Result<NessResult> {
    if !(controls.tolerance > 0.0) || controls.max_iterations == 0 {
        return Err(Error::Domain(
            "solver tolerance must be positive and max_iterations nonzero".into(),
        ));
    }
    let start = Instant::now();
    let n = spec.sites();
    let h = build_hamiltonian(spec);
    let heff = build_effective_hamiltonian(&h, diss);
    let eig = eigendecompose(&heff)?;
    let gamma = diss.dephasing();

    let mut unit = vec![0.0; n];
    unit[n - 1] = 1.0;
    let rhs: Vec<f64> = sylvester_diagonal(&eig, &unit)
        .into_iter()
        .map(|v| diss.boundary() * v)
        .collect();

    let op = SelfConsistent { eig: &eig, gamma };
    let mut preconditioned = false;
    let mut fallback_used = false;

    let outcome = if gamma == 0.0 {
        IterativeOutcome {
            x: rhs.clone(),
            iterations: 0,
            history: vec![0.0],
            converged: true,
        }
    } else {
        match controls.strategy {
            SolveStrategy::Explicit => solve_explicit(&eig, gamma, &rhs, &op)?,
            SolveStrategy::Krylov => {
                let (pre, weight) = rate_preconditioner(&h, &build_damping(n, diss), gamma);
                let use_pre = match controls.preconditioning {
                    Preconditioning::Always => true,
                    Preconditioning::Never => false,
                    Preconditioning::Auto => weight <= PRECONDITIONER_WEIGHT_LIMIT,
                };
                let factor = if use_pre { pre.llt(Side::Lower).ok() } else { None };
                preconditioned = factor.is_some();
                let precondition = |r: &[f64]| -> Vec<f64> {
                    match &factor {
                        Some(llt) => {
                            let col = Mat::from_fn(r.len(), 1, |i, _| r[i]);
                            let sol = llt.solve(&col);
                            (0..r.len()).map(|i| sol[(i, 0)]).collect()
                        }
                        None => r.to_vec(),
                    }
                };
                let first = preconditioned_cg(
                    |v| op.apply(v),
                    precondition,
                    &rhs,
                    rhs.clone(),
                    controls.tolerance,
                    controls.polish_tolerance,
                    controls.max_iterations,
                    controls.restart,
                );
                if first.converged {
                    first
                } else {
                    fallback_used = true;
                    let mut second = damped_fixed_point(
                        |v| op.apply(v),
                        &rhs,
                        first.x.clone(),
                        controls.fallback_omega,
                        controls.tolerance,
                        controls.max_iterations,
                    );
                    let mut history = first.history;
                    history.append(&mut second.history);
                    second.history = history;
                    second.iterations += first.iterations;
                    second
                }
            }
        }
    };

    if !outcome.converged {
        return Err(Error::NotConverged {
            iterations: outcome.iterations,
            residual: outcome.final_residual(),
            history: outcome.history,
        });
    }

    let pump = build_pump(&outcome.x, diss);
    let correlation = sylvester_apply(&eig, &pump);
    let density = density_profile(&correlation)?;

    let mut site_currents = Vec::with_capacity(n);
    site_currents.push(injection_current(&correlation, diss));
    for m in 1..n {
        site_currents.push(site_in_current(&correlation, spec, m)?);
    }
    let cut_current = all_cut_currents(&correlation, spec);
    let current = extraction_current(&correlation, diss);

    Ok(NessResult {
        density,
        site_in_current: site_currents,
        cut_current,
        current,
        resistance: 1.0 / current,
        diagnostics: SolverDiagnostics {
            iterations: outcome.iterations,
            residual: outcome.final_residual(),
            residual_history: outcome.history,
            wall_time_s: start.elapsed().as_secs_f64(),
            strategy: controls.strategy,
            preconditioned,
            fallback_used,
            biorthogonality_residual: eig.biorthogonality_residual(),
            reconstruction_residual: eig.reconstruction_residual(),
            condition_estimate: eig.condition_estimate(),
        },
        correlation,
    })
}

fn solve_explicit(
    eig: &BiorthogonalEigensystem,
    gamma: f64,
    rhs: &[f64],
    op: &SelfConsistent<'_>,
) -> Result<IterativeOutcome> {
    let n = eig.sites();
    if n > EXPLICIT_KERNEL_MAX_SITES {
        return Err(Error::Domain(format!(
            "explicit strategy is limited to L <= {EXPLICIT_KERNEL_MAX_SITES}"
        )));
    }
    let m = diagonal_kernel(eig)?;
    let a = Mat::from_fn(n, n, |i, k| if i == k { 1.0 } else { 0.0 } - gamma * m[(i, k)]);
    let b = Mat::from_fn(n, 1, |i, _| rhs[i]);
    let sol = a.partial_piv_lu().solve(&b);
    let x: Vec<f64> = (0..n).map(|i| sol[(i, 0)]).collect();
    let ax = op.apply(&x);
    let r: Vec<f64> = (0..n).map(|i| rhs[i] - ax[i]).collect();
    let residual = norm(&r) / norm(&x).max(f64::MIN_POSITIVE);
    Ok(IterativeOutcome {
        converged: true,
        x,
        iterations: 1,
        history: vec![residual],
    })
}
