// SPDX-License-Identifier: Apache-2.0

//! Brute-force many-body Lindblad steady state for very short chains.
//!
//! Operators live on the full `2^L` Fock space with Jordan–Wigner strings;
//! the Liouvillian uses column stacking, `vec(rho)[a + b d] = rho[a][b]`:
//!
//! ```text
//! L = -i (I ⊗ H - Hᵀ ⊗ I) + Σ_μ [conj(L_μ) ⊗ L_μ - ½ I ⊗ K_μ - ½ K_μᵀ ⊗ I],   K_μ = L_μ† L_μ
//! ```

use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::lattice::{build_hamiltonian, LatticeSpec};
use crate::lindblad::{hermitian_part, CorrelationMatrix, DissipationSpec};

pub const ORACLE_MAX_SITES: usize = 6;

const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
const ONE: c64 = c64 { re: 1.0, im: 0.0 };

/// Relative size below which a Liouvillian eigenvalue counts as zero.
const NULL_TOL: f64 = 1e-9;

fn check_sites(sites: usize) -> Result<()> {
    if sites == 0 || sites > ORACLE_MAX_SITES {
        return Err(Error::Domain(format!(
            "many-body oracle supports 1 <= L <= {ORACLE_MAX_SITES}, got {sites}"
        )));
    }
    Ok(())
}

/// Dense `c_j`, `c_j†`, `n_j` on the `2^L` Fock space. Site `j` is bit `j`
/// of the basis index.
#[derive(Debug, Clone)]
pub struct FockOperatorSet {
    sites: usize,
    annihilation: Vec<Mat<c64>>,
    creation: Vec<Mat<c64>>,
    number: Vec<Mat<c64>>,
}

impl FockOperatorSet {
    pub fn new(sites: usize) -> Result<Self> {
        check_sites(sites)?;
        let dim = 1usize << sites;
        let mut annihilation = Vec::with_capacity(sites);
        for j in 0..sites {
            let mut c = Mat::<c64>::zeros(dim, dim);
            for s in 0..dim {
                if s >> j & 1 == 1 {
                    let sign = if (s & ((1 << j) - 1)).count_ones() % 2 == 0 {
                        1.0
                    } else {
                        -1.0
                    };
                    c[(s ^ (1 << j), s)] = c64::new(sign, 0.0);
                }
            }
            annihilation.push(c);
        }
        let creation: Vec<_> = annihilation.iter().map(|c| c.adjoint().to_owned()).collect();
        let number = (0..sites).map(|j| &creation[j] * &annihilation[j]).collect();
        Ok(Self {
            sites,
            annihilation,
            creation,
            number,
        })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn dim(&self) -> usize {
        1 << self.sites
    }

    pub fn annihilation(&self, j: usize) -> &Mat<c64> {
        &self.annihilation[j]
    }

    pub fn creation(&self, j: usize) -> &Mat<c64> {
        &self.creation[j]
    }

    pub fn number(&self, j: usize) -> &Mat<c64> {
        &self.number[j]
    }

    /// Largest deviation from the canonical anticommutation relations.
    pub fn anticommutator_defect(&self) -> f64 {
        let id = Mat::<c64>::identity(self.dim(), self.dim());
        let mut worst = 0.0_f64;
        for i in 0..self.sites {
            for j in 0..self.sites {
                let (ci, cj) = (&self.annihilation[i], &self.annihilation[j]);
                let (di, dj) = (&self.creation[i], &self.creation[j]);
                let mixed = ci * dj + dj * ci;
                let mixed = if i == j { mixed - &id } else { mixed };
                worst = worst.max(mixed.norm_max());
                worst = worst.max((ci * cj + cj * ci).norm_max());
                worst = worst.max((di * dj + dj * di).norm_max());
            }
        }
        worst
    }

    /// `Σ_ij h[i][j] c_i† c_j`.
    pub fn quadratic(&self, h: &Mat<f64>) -> Mat<c64> {
        let dim = self.dim();
        let mut out = Mat::<c64>::zeros(dim, dim);
        for i in 0..self.sites {
            for j in 0..self.sites {
                if h[(i, j)] != 0.0 {
                    out += (&self.creation[i] * &self.annihilation[j]) * faer::Scale(c64::new(h[(i, j)], 0.0));
                }
            }
        }
        out
    }

    /// `Tr[rho X]`.
    pub fn expectation(rho: &Mat<c64>, x: &Mat<c64>) -> c64 {
        let d = rho.nrows();
        let mut acc = ZERO;
        for a in 0..d {
            for b in 0..d {
                acc += rho[(a, b)] * x[(b, a)];
            }
        }
        acc
    }

    /// Hole correlations `C[n][m] = Tr[rho c_n c_m†]`.
    pub fn hole_correlation(&self, rho: &Mat<c64>) -> CorrelationMatrix {
        let n = self.sites;
        let mut c = Mat::<c64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                c[(i, j)] = Self::expectation(rho, &(&self.annihilation[i] * &self.creation[j]));
            }
        }
        CorrelationMatrix::from_matrix_unchecked(hermitian_part(&c))
    }
}

/// Many-body Hamiltonian and jump operators.
#[derive(Debug, Clone)]
pub struct ManyBodyModel {
    hamiltonian: Mat<c64>,
    jumps: Vec<Mat<c64>>,
}

impl ManyBodyModel {
    /// Arbitrary Hamiltonian and jumps on a common Hilbert space.
    pub fn from_parts(hamiltonian: Mat<c64>, jumps: Vec<Mat<c64>>) -> Result<Self> {
        let d = hamiltonian.nrows();
        if hamiltonian.ncols() != d || jumps.iter().any(|l| l.nrows() != d || l.ncols() != d) {
            return Err(Error::Oracle("operator shapes disagree".into()));
        }
        if d > 1 << ORACLE_MAX_SITES {
            return Err(Error::Domain(format!("Hilbert space dimension {d} too large")));
        }
        Ok(Self { hamiltonian, jumps })
    }

    /// Jumps `√γ n_j`, `√Γ c_1†`, `√Γ c_L`.
    pub fn from_specs(spec: &LatticeSpec, diss: &DissipationSpec, fock: &FockOperatorSet) -> Result<Self> {
        check_sites(spec.sites())?;
        if fock.sites() != spec.sites() {
            return Err(Error::Oracle("operator set built for a different chain".into()));
        }
        let n = spec.sites();
        let hamiltonian = fock.quadratic(build_hamiltonian(spec).matrix());
        let mut jumps = Vec::with_capacity(n + 2);
        let sg = c64::new(diss.dephasing().sqrt(), 0.0);
        let sb = c64::new(diss.boundary().sqrt(), 0.0);
        if diss.dephasing() > 0.0 {
            for j in 0..n {
                jumps.push(fock.number(j) * faer::Scale(sg));
            }
        }
        jumps.push(fock.creation(0) * faer::Scale(sb));
        jumps.push(fock.annihilation(n - 1) * faer::Scale(sb));
        Ok(Self { hamiltonian, jumps })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn hamiltonian(&self) -> &Mat<c64> {
        &self.hamiltonian
    }

    pub fn jumps(&self) -> &[Mat<c64>] {
        &self.jumps
    }

    /// `ℒ[rho]` evaluated directly.
    pub fn apply(&self, rho: &Mat<c64>) -> Mat<c64> {
        let i = c64::new(0.0, 1.0);
        let mut out = (&self.hamiltonian * rho - rho * &self.hamiltonian) * faer::Scale(-i);
        for l in &self.jumps {
            let k = l.adjoint() * l;
            out += l * rho * l.adjoint();
            out -= (&k * rho + rho * &k) * faer::Scale(c64::new(0.5, 0.0));
        }
        out
    }

    pub fn liouvillian(&self) -> Liouvillian {
        let d = self.dim();
        let id = Mat::<c64>::identity(d, d);
        let mut m = Mat::<c64>::zeros(d * d, d * d);
        let h_t = self.hamiltonian.transpose().to_owned();
        add_kron(&mut m, c64::new(0.0, -1.0), &id, &self.hamiltonian);
        add_kron(&mut m, c64::new(0.0, 1.0), &h_t, &id);
        for l in &self.jumps {
            let k = l.adjoint() * l;
            add_kron(&mut m, ONE, &l.conjugate().to_owned(), l);
            add_kron(&mut m, c64::new(-0.5, 0.0), &id, &k);
            add_kron(&mut m, c64::new(-0.5, 0.0), &k.transpose().to_owned(), &id);
        }
        Liouvillian {
            hilbert_dim: d,
            matrix: m,
        }
    }

    /// Unique stationary state, found in the sector of `|s><s'|` with equal
    /// particle numbers. Requires a number-conserving Hamiltonian and jumps
    /// that each shift the particle number by a fixed amount.
    pub fn stationary_state(&self) -> Result<StationaryState> {
        let d = self.dim();
        if !d.is_power_of_two() {
            return Err(Error::Oracle("Hilbert space is not a Fock space".into()));
        }
        let pop = |s: usize| s.count_ones() as i64;
        let tol = 1e-14 * self.hamiltonian.norm_max().max(1.0);
        for a in 0..d {
            for b in 0..d {
                if self.hamiltonian[(a, b)].norm() > tol && pop(a) != pop(b) {
                    return Err(Error::Oracle("Hamiltonian does not conserve particle number".into()));
                }
            }
        }
        for l in &self.jumps {
            let mut shift = None;
            for a in 0..d {
                for b in 0..d {
                    if l[(a, b)].norm() > 0.0 {
                        let s = pop(a) - pop(b);
                        if *shift.get_or_insert(s) != s {
                            return Err(Error::Oracle("jump operator has no definite number shift".into()));
                        }
                    }
                }
            }
        }

        let basis: Vec<(usize, usize)> = (0..d)
            .flat_map(|a| (0..d).map(move |b| (a, b)))
            .filter(|&(a, b)| pop(a) == pop(b))
            .collect();
        let n = basis.len();
        let mut block = Mat::<c64>::zeros(n, n);
        let mut unit = Mat::<c64>::zeros(d, d);
        for (col, &(a, b)) in basis.iter().enumerate() {
            unit[(a, b)] = ONE;
            let image = self.apply(&unit);
            unit[(a, b)] = ZERO;
            for (row, &(p, q)) in basis.iter().enumerate() {
                block[(row, col)] = image[(p, q)];
            }
        }

        let (value, gap, vector) = null_vector(&block)?;
        let mut rho = Mat::<c64>::zeros(d, d);
        for (k, &(a, b)) in basis.iter().enumerate() {
            rho[(a, b)] = vector[k];
        }
        let rho = normalize_density(rho)?;
        Ok(StationaryState {
            density_matrix: rho,
            null_eigenvalue: value,
            spectral_gap: gap,
        })
    }
}

fn add_kron(m: &mut Mat<c64>, coeff: c64, a: &Mat<c64>, b: &Mat<c64>) {
    let d = a.nrows();
    for i1 in 0..d {
        for j1 in 0..d {
            let x = a[(i1, j1)];
            if x == ZERO {
                continue;
            }
            let x = coeff * x;
            for i2 in 0..d {
                for j2 in 0..d {
                    let y = b[(i2, j2)];
                    if y != ZERO {
                        m[(i1 * d + i2, j1 * d + j2)] += x * y;
                    }
                }
            }
        }
    }
}

/// Smallest-magnitude eigenpair, checked for uniqueness.
fn null_vector(m: &Mat<c64>) -> Result<(c64, f64, Vec<c64>)> {
    let eig = m
        .eigen()
        .map_err(|e| Error::Oracle(format!("Liouvillian eigendecomposition failed: {e:?}")))?;
    let values = eig.S().column_vector();
    let n = values.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].norm().total_cmp(&values[j].norm()));
    let scale = m.norm_max().max(1.0);
    let zeros = order.iter().filter(|&&k| values[k].norm() <= NULL_TOL * scale).count();
    if zeros != 1 {
        return Err(Error::Oracle(format!(
            "stationary subspace has dimension {zeros}, expected 1"
        )));
    }
    let k = order[0];
    let gap = if n > 1 { values[order[1]].norm() } else { f64::INFINITY };
    let v = eig.U().col(k);
    Ok((values[k], gap, (0..n).map(|i| v[i]).collect()))
}

fn normalize_density(rho: Mat<c64>) -> Result<Mat<c64>> {
    let d = rho.nrows();
    let trace: c64 = (0..d).map(|a| rho[(a, a)]).sum();
    if trace.norm() < 1e-300 {
        return Err(Error::Oracle("stationary vector is traceless".into()));
    }
    let scaled = rho * faer::Scale(trace.inv());
    Ok(hermitian_part(&scaled))
}

/// Dense vectorized Liouvillian (column stacking).
#[derive(Debug, Clone)]
pub struct Liouvillian {
    hilbert_dim: usize,
    matrix: Mat<c64>,
}

impl Liouvillian {
    pub fn matrix(&self) -> &Mat<c64> {
        &self.matrix
    }

    pub fn hilbert_dim(&self) -> usize {
        self.hilbert_dim
    }

    pub fn apply(&self, rho: &Mat<c64>) -> Mat<c64> {
        let d = self.hilbert_dim;
        let v = Mat::from_fn(d * d, 1, |k, _| rho[(k % d, k / d)]);
        let w = &self.matrix * &v;
        Mat::from_fn(d, d, |a, b| w[(a + b * d, 0)])
    }

    /// `‖vec(I)ᵀ ℒ‖_∞`.
    pub fn trace_defect(&self) -> f64 {
        let d = self.hilbert_dim;
        (0..d * d)
            .map(|col| (0..d).map(|a| self.matrix[(a + a * d, col)]).sum::<c64>().norm())
            .fold(0.0, f64::max)
    }

    pub fn eigenvalues(&self) -> Result<Vec<c64>> {
        self.matrix
            .eigenvalues()
            .map_err(|e| Error::Oracle(format!("Liouvillian eigenvalues failed: {e:?}")))
    }

    /// Stationary state from the null vector of the full matrix.
    pub fn stationary_state(&self) -> Result<StationaryState> {
        let (value, gap, v) = null_vector(&self.matrix)?;
        let d = self.hilbert_dim;
        let rho = normalize_density(Mat::from_fn(d, d, |a, b| v[a + b * d]))?;
        Ok(StationaryState {
            density_matrix: rho,
            null_eigenvalue: value,
            spectral_gap: gap,
        })
    }
}

#[derive(Debug, Clone)]
pub struct StationaryState {
    pub density_matrix: Mat<c64>,
    /// The eigenvalue taken as zero.
    pub null_eigenvalue: c64,
    /// Magnitude of the next eigenvalue.
    pub spectral_gap: f64,
}

#[derive(Debug, Clone)]
pub struct OracleNess {
    pub density_matrix: Mat<c64>,
    pub correlation: CorrelationMatrix,
    pub spectral_gap: f64,
    /// `Tr[rho Γ(1 - n_1)]`.
    pub injected_current: f64,
    /// `Tr[rho Γ n_L]`.
    pub extracted_current: f64,
}

pub fn build_liouvillian(spec: &LatticeSpec, diss: &DissipationSpec) -> Result<Liouvillian> {
    let fock = FockOperatorSet::new(spec.sites())?;
    Ok(ManyBodyModel::from_specs(spec, diss, &fock)?.liouvillian())
}

pub fn oracle_ness(spec: &LatticeSpec, diss: &DissipationSpec) -> Result<OracleNess> {
    let fock = FockOperatorSet::new(spec.sites())?;
    let model = ManyBodyModel::from_specs(spec, diss, &fock)?;
    let state = model.stationary_state()?;
    let rho = state.density_matrix;
    let n = spec.sites();
    let n_first = FockOperatorSet::expectation(&rho, fock.number(0)).re;
    let n_last = FockOperatorSet::expectation(&rho, fock.number(n - 1)).re;
    Ok(OracleNess {
        correlation: fock.hole_correlation(&rho),
        injected_current: diss.boundary() * (1.0 - n_first),
        extracted_current: diss.boundary() * n_last,
        spectral_gap: state.spectral_gap,
        density_matrix: rho,
    })
}
