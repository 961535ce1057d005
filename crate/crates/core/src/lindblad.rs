// SPDX-License-Identifier: Apache-2.0

//! Dissipative structure of the single-particle correlation dynamics.
//!
//! The hole correlation matrix `C[n][m] = <c_n c_m^dag>` obeys
//!
//! ```text
//! dC/dt = -i[H, C] - {D, C} + P(diag C)
//! ```
//!
//! with `D = diag(gamma/2 + Gamma/2 (delta_{m,1} + delta_{m,L}))` and
//! `P = diag(gamma C_mm + Gamma delta_{m,L})`. The physical jump rates are
//! `gamma` for dephasing (`sqrt(gamma) n_j`) and `Gamma` for injection at
//! site 1 and extraction at site L.

use faer::{c64, Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::HoppingMatrix;

const HERMITICITY_TOL: f64 = 1e-12;
const SPECTRUM_TOL: f64 = 1e-9;

/// Dephasing strength `gamma` and boundary drive rate `Gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DissipationSpec {
    dephasing: f64,
    boundary: f64,
}

impl DissipationSpec {
    /// `boundary == 0` is rejected: without the drive the steady state is
    /// not unique.
    pub fn new(dephasing: f64, boundary: f64) -> Result<Self> {
        if !(dephasing.is_finite() && dephasing >= 0.0) {
            return Err(Error::InvalidDissipation(format!(
                "dephasing must be finite and non-negative, got {dephasing}"
            )));
        }
        if !(boundary.is_finite() && boundary > 0.0) {
            return Err(Error::InvalidDissipation(format!(
                "boundary rate must be finite and positive, got {boundary}"
            )));
        }
        Ok(Self { dephasing, boundary })
    }

    pub fn dephasing(&self) -> f64 {
        self.dephasing
    }

    pub fn boundary(&self) -> f64 {
        self.boundary
    }
}

/// Hermitian hole correlation matrix.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix(Mat<c64>);

impl CorrelationMatrix {
    /// Checks Hermiticity and that the spectrum lies in `[0, 1]`.
    pub fn new(matrix: Mat<c64>) -> Result<Self> {
        let c = Self(matrix);
        c.validate()?;
        Ok(c)
    }

    /// Wraps a matrix without validation. Callers guarantee Hermiticity.
    pub fn from_matrix_unchecked(matrix: Mat<c64>) -> Self {
        Self(matrix)
    }

    /// Empty chain: every site holds a hole.
    pub fn empty(sites: usize) -> Self {
        Self(Mat::identity(sites, sites))
    }

    /// Uncorrelated chain with uniform density `density`.
    pub fn uniform(sites: usize, density: f64) -> Self {
        Self(Mat::from_fn(sites, sites, |i, j| {
            if i == j {
                c64::new(1.0 - density, 0.0)
            } else {
                c64::new(0.0, 0.0)
            }
        }))
    }

    pub fn sites(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &Mat<c64> {
        &self.0
    }

    pub fn into_matrix(self) -> Mat<c64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> c64 {
        self.0[(i, j)]
    }

    pub fn diagonal_real(&self) -> Vec<f64> {
        (0..self.sites()).map(|i| self.0[(i, i)].re).collect()
    }

    /// `||C - C^dag||_F / ||C||_F` (zero for the zero matrix).
    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.0)
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let h = hermitian_part(&self.0);
        h.self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::NonPhysical(format!("eigenvalue solver failed: {e:?}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.nrows() != self.0.ncols() {
            return Err(Error::NonPhysical("matrix is not square".into()));
        }
        let defect = self.hermiticity_defect();
        if !(defect <= HERMITICITY_TOL) {
            return Err(Error::NonPhysical(format!(
                "hermiticity defect {defect:.3e} exceeds {HERMITICITY_TOL:.0e}"
            )));
        }
        let ev = self.eigenvalues()?;
        if let (Some(&lo), Some(&hi)) = (ev.first(), ev.last()) {
            if lo < -SPECTRUM_TOL || hi > 1.0 + SPECTRUM_TOL {
                return Err(Error::NonPhysical(format!(
                    "spectrum [{lo:.3e}, {hi:.3e}] leaves [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn hermitian_part(m: &Mat<c64>) -> Mat<c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

pub(crate) fn hermiticity_defect(m: &Mat<c64>) -> f64 {
    let norm = m.norm_l2();
    if norm == 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += (m[(i, j)] - m[(j, i)].conj()).norm_sqr();
        }
    }
    acc.sqrt() / norm
}

/// `H_eff = H - iD`, the non-Hermitian generator of the damped dynamics.
#[derive(Debug, Clone)]
pub struct EffectiveHamiltonian {
    matrix: Mat<c64>,
    damping: Vec<f64>,
}

impl EffectiveHamiltonian {
    /// Builds `H - i diag(damping)` directly. Used by test harnesses that
    /// need rates outside the validated [`DissipationSpec`] range.
    pub fn from_parts(hopping: &Mat<f64>, damping: Vec<f64>) -> Self {
        let n = hopping.nrows();
        assert_eq!(damping.len(), n, "damping length must match the lattice");
        let matrix = Mat::from_fn(n, n, |i, j| {
            let im = if i == j { -damping[i] } else { 0.0 };
            c64::new(hopping[(i, j)], im)
        });
        Self { matrix, damping }
    }

    pub fn matrix(&self) -> &Mat<c64> {
        &self.matrix
    }

    pub fn damping(&self) -> &[f64] {
        &self.damping
    }

    pub fn sites(&self) -> usize {
        self.matrix.nrows()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.matrix.norm_l2()
    }
}

/// Diagonal of `D`: `gamma/2` in the bulk, `(gamma + Gamma)/2` at both ends.
/// For a single site both boundary terms land on it.
pub fn build_damping(sites: usize, diss: &DissipationSpec) -> Vec<f64> {
    let mut d = vec![diss.dephasing / 2.0; sites];
    if sites > 0 {
        d[0] += diss.boundary / 2.0;
        d[sites - 1] += diss.boundary / 2.0;
    }
    d
}

/// Diagonal of `P`: `gamma C_mm + Gamma delta_{m,L}`.
pub fn build_pump(diag_c: &[f64], diss: &DissipationSpec) -> Vec<f64> {
    let mut p: Vec<f64> = diag_c.iter().map(|c| diss.dephasing * c).collect();
    if let Some(last) = p.last_mut() {
        *last += diss.boundary;
    }
    p
}

pub fn build_effective_hamiltonian(h: &HoppingMatrix, diss: &DissipationSpec) -> EffectiveHamiltonian {
    EffectiveHamiltonian::from_parts(h.matrix(), build_damping(h.sites(), diss))
}

/// Right-hand side of the correlation-matrix equation of motion with
/// explicit rates. `boundary = 0` or `dephasing = 0` switch channels off.
pub fn eom_rhs_with_rates(c: &Mat<c64>, hopping: &Mat<f64>, dephasing: f64, boundary: f64) -> Mat<c64> {
    let n = c.nrows();
    let h = Mat::from_fn(n, n, |i, j| c64::new(hopping[(i, j)], 0.0));
    let mut d = vec![dephasing / 2.0; n];
    if n > 0 {
        d[0] += boundary / 2.0;
        d[n - 1] += boundary / 2.0;
    }
    let hc = &h * c;
    let ch = c * &h;
    let mut out = Mat::from_fn(n, n, |i, j| {
        let commutator = hc[(i, j)] - ch[(i, j)];
        c64::new(commutator.im, -commutator.re) - c[(i, j)] * (d[i] + d[j])
    });
    for m in 0..n {
        out[(m, m)] += c64::new(dephasing * c[(m, m)].re, 0.0);
    }
    if n > 0 {
        out[(n - 1, n - 1)] += c64::new(boundary, 0.0);
    }
    out
}

/// `-i[H, C] - {D, C} + P(diag C)`.
pub fn eom_rhs(c: &CorrelationMatrix, h: &HoppingMatrix, diss: &DissipationSpec) -> Mat<c64> {
    eom_rhs_with_rates(c.matrix(), h.matrix(), diss.dephasing, diss.boundary)
}
