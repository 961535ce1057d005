// SPDX-License-Identifier: Apache-2.0

//! Single-particle hopping Hamiltonian of an open chain with power-law
//! hopping `J / r^alpha` between every pair of sites.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Chain geometry and hopping parameters.
///
/// `prefactor` multiplies every amplitude. It is a hook for optional
/// normalisation schemes and is `1.0` unless set explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    sites: usize,
    hopping: f64,
    alpha: f64,
    prefactor: f64,
}

impl LatticeSpec {
    /// A single site (`sites == 1`) is accepted: it is coupled to both
    /// leads and carries no hopping.
    pub fn new(sites: usize, hopping: f64, alpha: f64) -> Result<Self> {
        if sites == 0 {
            return Err(Error::InvalidLattice("at least one site is required".into()));
        }
        if !(hopping.is_finite() && hopping > 0.0) {
            return Err(Error::InvalidLattice(format!(
                "hopping amplitude must be finite and positive, got {hopping}"
            )));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidLattice(format!(
                "alpha must be finite and non-negative, got {alpha}"
            )));
        }
        Ok(Self {
            sites,
            hopping,
            alpha,
            prefactor: 1.0,
        })
    }

    pub fn with_prefactor(mut self, prefactor: f64) -> Result<Self> {
        if !(prefactor.is_finite() && prefactor > 0.0) {
            return Err(Error::InvalidLattice(format!(
                "prefactor must be finite and positive, got {prefactor}"
            )));
        }
        self.prefactor = prefactor;
        Ok(self)
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn hopping(&self) -> f64 {
        self.hopping
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }

    /// Amplitude at distance `r`, without domain checks.
    #[inline]
    pub(crate) fn amplitude_unchecked(&self, r: usize) -> f64 {
        self.prefactor * self.hopping / (r as f64).powf(self.alpha)
    }

    /// Amplitudes for distances `0..sites`; entry 0 is zero.
    pub fn amplitude_table(&self) -> Vec<f64> {
        let mut table = vec![0.0; self.sites];
        for (r, t) in table.iter_mut().enumerate().skip(1) {
            *t = self.amplitude_unchecked(r);
        }
        table
    }
}

/// `J / r^alpha` for `1 <= r <= L - 1`.
pub fn hopping_amplitude(r: usize, spec: &LatticeSpec) -> Result<f64> {
    if r == 0 || r >= spec.sites {
        return Err(Error::Domain(format!(
            "hopping distance {r} outside 1..={} for L = {}",
            spec.sites.saturating_sub(1),
            spec.sites
        )));
    }
    Ok(spec.amplitude_unchecked(r))
}

/// Dense real symmetric hopping matrix with zero diagonal.
#[derive(Debug, Clone)]
pub struct HoppingMatrix {
    spec: LatticeSpec,
    matrix: Mat<f64>,
}

impl HoppingMatrix {
    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn sites(&self) -> usize {
        self.spec.sites
    }

    pub fn matrix(&self) -> &Mat<f64> {
        &self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    /// Largest absolute eigenvalue (spectral norm of a symmetric matrix).
    pub fn spectral_norm(&self) -> f64 {
        if self.sites() == 1 {
            return 0.0;
        }
        self.matrix
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .map(|ev| ev.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
            // Fall back to the row-sum bound, which is never smaller.
            .unwrap_or_else(|_| {
                (0..self.sites())
                    .map(|i| (0..self.sites()).map(|j| self.matrix[(i, j)].abs()).sum::<f64>())
                    .fold(0.0, f64::max)
            })
    }
}

/// Couples every pair of sites, no truncation radius.
pub fn build_hamiltonian(spec: &LatticeSpec) -> HoppingMatrix {
    let n = spec.sites;
    let table = spec.amplitude_table();
    let matrix = Mat::from_fn(n, n, |i, j| table[i.abs_diff(j)]);
    HoppingMatrix { spec: *spec, matrix }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(l: usize, alpha: f64) -> LatticeSpec {
        LatticeSpec::new(l, 1.0, alpha).unwrap()
    }

    #[test]
    fn amplitude_examples() {
        assert_eq!(hopping_amplitude(1, &spec(4, 3.0)).unwrap(), 1.0);
        assert_relative_eq!(
            hopping_amplitude(2, &spec(4, 1.5)).unwrap(),
            0.3535533906,
            epsilon = 1e-10
        );
        assert_eq!(hopping_amplitude(5, &spec(8, 0.0)).unwrap(), 1.0);
    }

    #[test]
    fn amplitude_domain() {
        assert!(matches!(hopping_amplitude(0, &spec(4, 1.0)), Err(Error::Domain(_))));
        assert!(matches!(hopping_amplitude(4, &spec(4, 1.0)), Err(Error::Domain(_))));
        assert!(hopping_amplitude(3, &spec(4, 1.0)).is_ok());
    }

    #[test]
    fn invalid_specs() {
        assert!(LatticeSpec::new(0, 1.0, 1.0).is_err());
        assert!(LatticeSpec::new(4, 0.0, 1.0).is_err());
        assert!(LatticeSpec::new(4, 1.0, -0.1).is_err());
        assert!(LatticeSpec::new(4, 1.0, f64::NAN).is_err());
        assert!(LatticeSpec::new(4, 1.0, f64::INFINITY).is_err());
        assert!(spec(4, 1.0).with_prefactor(0.0).is_err());
    }

    #[test]
    fn three_site_matrix() {
        let h = build_hamiltonian(&spec(3, 1.0));
        let expected = [[0.0, 1.0, 0.5], [1.0, 0.0, 1.0], [0.5, 1.0, 0.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(h.get(i, j), expected[i][j]);
            }
        }
    }

    #[test]
    fn short_range_limit_is_tridiagonal() {
        let h = build_hamiltonian(&spec(3, 1e6));
        assert_eq!(h.get(0, 1), 1.0);
        assert_eq!(h.get(1, 2), 1.0);
        assert_eq!(h.get(0, 2), 0.0);
    }

    #[test]
    fn all_to_all_limit() {
        let h = build_hamiltonian(&spec(4, 0.0));
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(h.get(i, j), if i == j { 0.0 } else { 1.0 });
            }
        }
    }

    #[test]
    fn prefactor_scales_amplitudes() {
        let s = spec(5, 1.2).with_prefactor(0.5).unwrap();
        assert_relative_eq!(hopping_amplitude(2, &s).unwrap(), 0.5 * 2f64.powf(-1.2));
    }

    #[test]
    fn norm_grows_for_small_alpha() {
        let norms: Vec<f64> = [32, 64, 128, 256]
            .iter()
            .map(|&l| build_hamiltonian(&spec(l, 0.5)).spectral_norm())
            .collect();
        assert!(norms.windows(2).all(|w| w[1] > w[0]), "{norms:?}");
        // L^{1 - alpha} growth: doubling L multiplies the norm by about sqrt(2).
        let ratio = norms[3] / norms[2];
        assert!((ratio - 2f64.sqrt()).abs() < 0.1, "ratio {ratio}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn symmetric_with_zero_diagonal(l in 1usize..24, alpha in 0.0f64..6.0) {
                let h = build_hamiltonian(&spec(l, alpha));
                for i in 0..l {
                    prop_assert_eq!(h.get(i, i), 0.0);
                    for j in 0..l {
                        prop_assert_eq!(h.get(i, j), h.get(j, i));
                    }
                }
            }

            #[test]
            fn amplitudes_decrease_with_distance(alpha in 0.01f64..6.0, r1 in 1usize..40, dr in 1usize..40) {
                let s = spec(100, alpha);
                let a1 = hopping_amplitude(r1, &s).unwrap();
                let a2 = hopping_amplitude(r1 + dr, &s).unwrap();
                prop_assert!(a1 > a2);
            }
        }
    }
}
