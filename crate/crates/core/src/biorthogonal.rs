// SPDX-License-Identifier: Apache-2.0

//! Bi-orthogonal eigensystem of the damped effective Hamiltonian and the
//! steady-state Lyapunov map built on it.
//!
//! With `H_eff = R diag(lambda) Q` and `Q = R^{-1}` (rows of `Q` are the
//! adjoint left eigenvectors), the stationary solution of
//! `-i(H_eff C - C H_eff^dag) + P = 0` is
//!
//! ```text
//! C = R (W o (Q P Q^dag)) R^dag,    W[p][q] = 1 / (i (lambda_p - conj(lambda_q)))
//! ```
//!
//! which equals `int_0^inf exp(-i H_eff t) P exp(i H_eff^dag t) dt`.

use faer::linalg::matmul::matmul;
use faer::linalg::solvers::DenseSolveCore;
use faer::{c64, Accum, Mat, Par};

use crate::error::{Error, Result};
use crate::lindblad::{CorrelationMatrix, EffectiveHamiltonian};

const BIORTHO_TOL: f64 = 1e-10;
const RECONSTRUCTION_TOL: f64 = 1e-9;
const CONDITION_LIMIT: f64 = 1e12;
const DENOMINATOR_TOL: f64 = 1e-12;

/// Largest lattice for which element-wise kernels are exposed.
pub const EXPLICIT_KERNEL_MAX_SITES: usize = 128;

#[derive(Debug, Clone)]
pub struct BiorthogonalEigensystem {
    eigenvalues: Vec<c64>,
    right: Mat<c64>,
    /// `Q = Phi_L^dag = R^{-1}`.
    left_adjoint: Mat<c64>,
    weights: Mat<c64>,
    biorthogonality_residual: f64,
    reconstruction_residual: f64,
    condition_estimate: f64,
}

impl BiorthogonalEigensystem {
    /// Eigendecomposition of an arbitrary diagonalizable matrix. Left vectors
    /// come from inverting the right-eigenvector matrix, which makes the pair
    /// bi-orthonormal by construction even inside degenerate eigenspaces.
    pub fn from_matrix(m: &Mat<c64>) -> Result<Self> {
        let n = m.nrows();
        let evd = m.eigen().map_err(|e| Error::Eigensystem {
            reason: format!("eigenvalue iteration failed: {e:?}"),
            residual: f64::NAN,
        })?;
        let eigenvalues: Vec<c64> = (0..n).map(|p| evd.S()[p]).collect();
        let right = evd.U().to_owned();
        let left_adjoint = right.partial_piv_lu().inverse();

        let condition_estimate = right.norm_l2() * left_adjoint.norm_l2() / n as f64;
        if !condition_estimate.is_finite() || condition_estimate > CONDITION_LIMIT {
            return Err(Error::Eigensystem {
                reason: format!("eigenvector matrix is near-defective (condition ~{condition_estimate:.3e})"),
                residual: condition_estimate,
            });
        }

        let mut product = Mat::<c64>::zeros(n, n);
        matmul(
            product.as_mut(),
            Accum::Replace,
            left_adjoint.as_ref(),
            right.as_ref(),
            c64::new(1.0, 0.0),
            Par::Seq,
        );
        let mut biorthogonality_residual = 0.0_f64;
        for j in 0..n {
            for i in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                biorthogonality_residual =
                    biorthogonality_residual.max((product[(i, j)] - c64::new(target, 0.0)).norm());
            }
        }
        if !(biorthogonality_residual <= BIORTHO_TOL) {
            return Err(Error::Eigensystem {
                reason: "left/right eigenvectors are not bi-orthonormal".into(),
                residual: biorthogonality_residual,
            });
        }

        let scaled = Mat::from_fn(n, n, |i, p| right[(i, p)] * eigenvalues[p]);
        let mut rebuilt = Mat::<c64>::zeros(n, n);
        matmul(
            rebuilt.as_mut(),
            Accum::Replace,
            scaled.as_ref(),
            left_adjoint.as_ref(),
            c64::new(1.0, 0.0),
            Par::Seq,
        );
        let norm = m.norm_l2().max(f64::MIN_POSITIVE);
        let reconstruction_residual = (&rebuilt - m).norm_l2() / norm;
        if !(reconstruction_residual <= RECONSTRUCTION_TOL) {
            return Err(Error::Eigensystem {
                reason: "eigendecomposition does not reproduce the matrix".into(),
                residual: reconstruction_residual,
            });
        }

        let weights = Mat::from_fn(n, n, |p, q| {
            let z = eigenvalues[p] - eigenvalues[q].conj();
            // 1 / (i z)
            c64::new(0.0, -1.0) / z
        });

        Ok(Self {
            eigenvalues,
            right,
            left_adjoint,
            weights,
            biorthogonality_residual,
            reconstruction_residual,
            condition_estimate,
        })
    }

    pub fn sites(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[c64] {
        &self.eigenvalues
    }

    /// Columns are right eigenvectors.
    pub fn right(&self) -> &Mat<c64> {
        &self.right
    }

    /// Columns are left eigenvectors, normalised so that `Phi_L^dag Phi_R = I`.
    pub fn left(&self) -> Mat<c64> {
        self.left_adjoint.adjoint().to_owned()
    }

    pub fn left_adjoint(&self) -> &Mat<c64> {
        &self.left_adjoint
    }

    /// `W[p][q] = 1 / (i (lambda_p - conj(lambda_q)))`.
    pub fn weights(&self) -> &Mat<c64> {
        &self.weights
    }

    pub fn biorthogonality_residual(&self) -> f64 {
        self.biorthogonality_residual
    }

    pub fn reconstruction_residual(&self) -> f64 {
        self.reconstruction_residual
    }

    pub fn condition_estimate(&self) -> f64 {
        self.condition_estimate
    }
}

/// Eigensystem of a strictly damped `H_eff`; rejects spectra whose
/// denominators `lambda_p - conj(lambda_q)` could vanish.
pub fn eigendecompose(heff: &EffectiveHamiltonian) -> Result<BiorthogonalEigensystem> {
    let eig = BiorthogonalEigensystem::from_matrix(heff.matrix())?;
    // |lambda_p - conj(lambda_q)| >= |Im lambda_p + Im lambda_q| >= 2 min |Im lambda|.
    let max_im = eig.eigenvalues.iter().map(|z| z.im).fold(f64::NEG_INFINITY, f64::max);
    let guard = DENOMINATOR_TOL * heff.norm().max(1.0);
    if !(max_im < 0.0) || 2.0 * max_im.abs() < guard {
        return Err(Error::Eigensystem {
            reason: "effective Hamiltonian has an undamped mode".into(),
            residual: max_im,
        });
    }
    Ok(eig)
}

/// Steady-state kernel element `Theta[i][j][k]`: the response of `C[i][j]`
/// to a unit diagonal pump at site `k` (all indices 0-based).
pub fn theta(eig: &BiorthogonalEigensystem, i: usize, j: usize, k: usize) -> Result<c64> {
    let n = eig.sites();
    if i >= n || j >= n || k >= n {
        return Err(Error::Domain(format!(
            "theta index ({i}, {j}, {k}) out of range for L = {n}"
        )));
    }
    if n > EXPLICIT_KERNEL_MAX_SITES {
        return Err(Error::Domain(format!(
            "element-wise kernel is limited to L <= {EXPLICIT_KERNEL_MAX_SITES}"
        )));
    }
    let r = &eig.right;
    let q = &eig.left_adjoint;
    let a: Vec<c64> = (0..n).map(|p| r[(i, p)] * q[(p, k)]).collect();
    let b: Vec<c64> = (0..n).map(|p| (r[(j, p)] * q[(p, k)]).conj()).collect();
    let mut acc = c64::new(0.0, 0.0);
    for p in 0..n {
        let mut row = c64::new(0.0, 0.0);
        for qq in 0..n {
            row += eig.weights[(p, qq)] * b[qq];
        }
        acc += a[p] * row;
    }
    Ok(acc)
}

/// Explicit diagonal kernel `M[i][k] = Theta[i][i][k]` (real, symmetric).
/// Costs `O(L^4)`; validation path only.
pub fn diagonal_kernel(eig: &BiorthogonalEigensystem) -> Result<Mat<f64>> {
    let n = eig.sites();
    if n > EXPLICIT_KERNEL_MAX_SITES {
        return Err(Error::Domain(format!(
            "explicit kernel is limited to L <= {EXPLICIT_KERNEL_MAX_SITES}"
        )));
    }
    let r = &eig.right;
    let q = &eig.left_adjoint;
    let q_conj = Mat::from_fn(n, n, |p, k| q[(p, k)].conj());
    let mut y = Mat::<c64>::zeros(n, n);
    let mut z = Mat::<c64>::zeros(n, n);
    let mut out = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        for qq in 0..n {
            for p in 0..n {
                y[(p, qq)] = r[(i, p)] * r[(i, qq)].conj() * eig.weights[(p, qq)];
            }
        }
        matmul(
            z.as_mut(),
            Accum::Replace,
            y.as_ref(),
            q_conj.as_ref(),
            c64::new(1.0, 0.0),
            Par::Seq,
        );
        for k in 0..n {
            let mut acc = c64::new(0.0, 0.0);
            for p in 0..n {
                acc += q[(p, k)] * z[(p, k)];
            }
            out[(i, k)] = acc.re;
        }
    }
    Ok(out)
}

/// Stationary correlation matrix for a diagonal pump `P = diag(pump)`.
pub fn sylvester_apply(eig: &BiorthogonalEigensystem, pump: &[f64]) -> CorrelationMatrix {
    let n = eig.sites();
    assert_eq!(pump.len(), n, "pump length must match the lattice");
    let tilde = projected_pump(eig, pump);
    let mut rc = Mat::<c64>::zeros(n, n);
    matmul(
        rc.as_mut(),
        Accum::Replace,
        eig.right.as_ref(),
        tilde.as_ref(),
        c64::new(1.0, 0.0),
        Par::Seq,
    );
    let mut c = Mat::<c64>::zeros(n, n);
    matmul(
        c.as_mut(),
        Accum::Replace,
        rc.as_ref(),
        eig.right.adjoint(),
        c64::new(1.0, 0.0),
        Par::Seq,
    );
    // Exact Hermiticity; the rounding asymmetry is far below every tolerance.
    for j in 0..n {
        for i in j..n {
            let v = (c[(i, j)] + c[(j, i)].conj()) * 0.5;
            c[(i, j)] = v;
            c[(j, i)] = v.conj();
        }
    }
    CorrelationMatrix::from_matrix_unchecked(c)
}

/// Real diagonal of [`sylvester_apply`] without forming the full matrix
/// product: two `O(L^3)` products and an `O(L^2)` contraction.
pub fn sylvester_diagonal(eig: &BiorthogonalEigensystem, pump: &[f64]) -> Vec<f64> {
    let n = eig.sites();
    assert_eq!(pump.len(), n, "pump length must match the lattice");
    let tilde = projected_pump(eig, pump);
    let mut rc = Mat::<c64>::zeros(n, n);
    matmul(
        rc.as_mut(),
        Accum::Replace,
        eig.right.as_ref(),
        tilde.as_ref(),
        c64::new(1.0, 0.0),
        Par::Seq,
    );
    let r = &eig.right;
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for q in 0..n {
                let a = rc[(i, q)];
                let b = r[(i, q)];
                // Re(a * conj(b))
                acc += a.re * b.re + a.im * b.im;
            }
            acc
        })
        .collect()
}

/// `W o (Q diag(pump) Q^dag)`.
fn projected_pump(eig: &BiorthogonalEigensystem, pump: &[f64]) -> Mat<c64> {
    let n = eig.sites();
    let q = &eig.left_adjoint;
    let qp = Mat::from_fn(n, n, |p, k| q[(p, k)] * pump[k]);
    let mut tilde = Mat::<c64>::zeros(n, n);
    matmul(
        tilde.as_mut(),
        Accum::Replace,
        qp.as_ref(),
        q.adjoint(),
        c64::new(1.0, 0.0),
        Par::Seq,
    );
    for qq in 0..n {
        for p in 0..n {
            tilde[(p, qq)] *= eig.weights[(p, qq)];
        }
    }
    tilde
}

/// `||-i(H_eff C - C H_eff^dag) + P||_F`.
pub fn stationarity_residual(heff: &EffectiveHamiltonian, c: &CorrelationMatrix, pump: &[f64]) -> f64 {
    let h = heff.matrix();
    let m = c.matrix();
    let hc = h * m;
    let ch = m * h.adjoint();
    let n = m.nrows();
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            let z = hc[(i, j)] - ch[(i, j)];
            let mut v = c64::new(z.im, -z.re);
            if i == j {
                v += c64::new(pump[i], 0.0);
            }
            acc += v.norm_sqr();
        }
    }
    acc.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_hamiltonian, LatticeSpec};
    use crate::lindblad::{build_effective_hamiltonian, DissipationSpec};
    use approx::assert_relative_eq;

    fn heff(l: usize, alpha: f64, g: f64, big: f64) -> EffectiveHamiltonian {
        let h = build_hamiltonian(&LatticeSpec::new(l, 1.0, alpha).unwrap());
        build_effective_hamiltonian(&h, &DissipationSpec::new(g, big).unwrap())
    }

    #[test]
    fn two_site_spectrum() {
        let eig = eigendecompose(&heff(2, 1.0, 0.0, 1.0)).unwrap();
        let mut ev = eig.eigenvalues().to_vec();
        ev.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert_relative_eq!(ev[0].re, -1.0, epsilon = 1e-12);
        assert_relative_eq!(ev[1].re, 1.0, epsilon = 1e-12);
        for z in ev {
            assert_relative_eq!(z.im, -0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn hermitian_limit_has_real_spectrum_and_matching_vectors() {
        let h = build_hamiltonian(&LatticeSpec::new(5, 1.0, 1.4).unwrap());
        let m = Mat::from_fn(5, 5, |i, j| c64::new(h.get(i, j), 0.0));
        let eig = BiorthogonalEigensystem::from_matrix(&m).unwrap();
        let left = eig.left();
        for p in 0..5 {
            assert!(eig.eigenvalues()[p].im.abs() < 1e-12);
            // Left and right columns are parallel.
            let dot: c64 = (0..5).map(|i| left[(i, p)].conj() * eig.right()[(i, p)]).sum();
            let nl = (0..5).map(|i| left[(i, p)].norm_sqr()).sum::<f64>().sqrt();
            let nr = (0..5).map(|i| eig.right()[(i, p)].norm_sqr()).sum::<f64>().sqrt();
            assert_relative_eq!(dot.norm(), nl * nr, epsilon = 1e-10);
        }
        // ...but the undamped matrix is refused for steady-state use.
        let undamped = EffectiveHamiltonian::from_parts(h.matrix(), vec![0.0; 5]);
        assert!(matches!(eigendecompose(&undamped), Err(Error::Eigensystem { .. })));
    }

    #[test]
    fn invariants_at_moderate_size() {
        let he = heff(64, 1.2, 0.7, 1.0);
        let eig = eigendecompose(&he).unwrap();
        assert!(eig.biorthogonality_residual() <= 1e-10);
        assert!(eig.reconstruction_residual() <= 1e-9);
        assert!(eig.eigenvalues().iter().all(|z| z.im < 0.0));
        // Phi_L^dag Phi_R = I through the public accessors.
        let prod = eig.left().adjoint() * eig.right();
        for i in 0..64 {
            for j in 0..64 {
                let t = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - c64::new(t, 0.0)).norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn all_to_all_degenerate_cluster_is_resolved() {
        // alpha = 0 has an (L-3)-fold degenerate eigenvalue.
        let eig = eigendecompose(&heff(24, 0.0, 0.5, 1.0)).unwrap();
        assert!(eig.biorthogonality_residual() <= 1e-10);
    }

    #[test]
    fn theta_hermitian_pair_symmetry() {
        let eig = eigendecompose(&heff(5, 0.9, 0.4, 1.0)).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                for k in 0..5 {
                    let a = theta(&eig, i, j, k).unwrap();
                    let b = theta(&eig, j, i, k).unwrap();
                    assert!((a - b.conj()).norm() < 1e-13);
                }
            }
        }
        assert!(theta(&eig, 5, 0, 0).is_err());
    }

    #[test]
    fn theta_slice_matches_time_integral() {
        // Theta[., ., k] = int_0^inf exp(-i H t)|k><k|exp(i H^dag t) dt,
        // evaluated by Gauss-Legendre panels on the propagated vector.
        let he = heff(4, 1.1, 0.3, 1.0);
        let eig = eigendecompose(&he).unwrap();
        for k in 0..4 {
            let quad = quadrature_theta_slice(&he, k);
            for i in 0..4 {
                for j in 0..4 {
                    let t = theta(&eig, i, j, k).unwrap();
                    assert!(
                        (t - quad[(i, j)]).norm() < 1e-9,
                        "({i},{j},{k}) {t} vs {}",
                        quad[(i, j)]
                    );
                }
            }
            // Positive semidefinite.
            let ev = quad.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
            assert!(ev[0] > -1e-12, "{ev:?}");
        }
    }

    /// Independent of the eigensystem: exp(-i H t) via Taylor series on
    /// small steps, integrated with 8-point Gauss-Legendre per step.
    fn quadrature_theta_slice(he: &EffectiveHamiltonian, k: usize) -> Mat<c64> {
        let n = he.sites();
        let h = he.matrix();
        let dt = 0.05;
        // One-step propagator by Taylor series to machine precision.
        let step = |tau: f64| -> Mat<c64> {
            let a = h * faer::Scale(c64::new(0.0, -tau));
            let mut term = Mat::<c64>::identity(n, n);
            let mut sum = Mat::<c64>::identity(n, n);
            for m in 1..40 {
                term = (&term * &a) * faer::Scale(c64::new(1.0 / m as f64, 0.0));
                sum = &sum + &term;
            }
            sum
        };
        let nodes = [
            (-0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
            (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
            (-0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
            (-0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
            (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
            (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
            (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
            (0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
        ];
        let sub: Vec<(Mat<c64>, f64)> = nodes
            .iter()
            .map(|&(x, w)| (step(0.5 * dt * (1.0 + x)), 0.5 * dt * w))
            .collect();
        let full = step(dt);
        let mut psi: Vec<c64> = (0..n).map(|i| c64::new(if i == k { 1.0 } else { 0.0 }, 0.0)).collect();
        let mut acc = Mat::<c64>::zeros(n, n);
        let apply =
            |m: &Mat<c64>, v: &[c64]| -> Vec<c64> { (0..n).map(|i| (0..n).map(|j| m[(i, j)] * v[j]).sum()).collect() };
        for _ in 0..20_000 {
            for (u, w) in &sub {
                let phi = apply(u, &psi);
                for i in 0..n {
                    for j in 0..n {
                        acc[(i, j)] += phi[i] * phi[j].conj() * *w;
                    }
                }
            }
            psi = apply(&full, &psi);
            if psi.iter().map(|z| z.norm_sqr()).sum::<f64>() < 1e-30 {
                break;
            }
        }
        acc
    }

    #[test]
    fn zero_pump_gives_zero() {
        let eig = eigendecompose(&heff(6, 1.0, 0.5, 1.0)).unwrap();
        let c = sylvester_apply(&eig, &[0.0; 6]);
        assert_eq!(c.matrix().norm_l2(), 0.0);
    }

    #[test]
    fn sylvester_matches_elementwise_contraction() {
        let eig = eigendecompose(&heff(3, 0.7, 0.9, 1.0)).unwrap();
        let pump = [0.31, 1.7, 0.05];
        let c = sylvester_apply(&eig, &pump);
        for i in 0..3 {
            for j in 0..3 {
                let direct: c64 = (0..3).map(|k| theta(&eig, i, j, k).unwrap() * pump[k]).sum();
                assert!((direct - c.get(i, j)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn sylvester_is_stationary() {
        let he = heff(40, 1.3, 0.6, 1.0);
        let eig = eigendecompose(&he).unwrap();
        let pump: Vec<f64> = (0..40).map(|i| ((i * 7) % 11) as f64 / 11.0).collect();
        let c = sylvester_apply(&eig, &pump);
        let p_norm = pump.iter().map(|p| p * p).sum::<f64>().sqrt();
        assert!(stationarity_residual(&he, &c, &pump) <= 1e-9 * p_norm);
        let diag = sylvester_diagonal(&eig, &pump);
        for i in 0..40 {
            assert!((diag[i] - c.get(i, i).re).abs() < 1e-13);
        }
    }

    #[test]
    fn diagonal_kernel_is_symmetric_and_matches_theta() {
        let eig = eigendecompose(&heff(6, 1.5, 0.8, 1.0)).unwrap();
        let m = diagonal_kernel(&eig).unwrap();
        for i in 0..6 {
            for k in 0..6 {
                assert!((m[(i, k)] - theta(&eig, i, i, k).unwrap().re).abs() < 1e-13);
                assert!((m[(i, k)] - m[(k, i)]).abs() < 1e-12);
                assert!(m[(i, k)] >= 0.0);
            }
        }
    }
}
