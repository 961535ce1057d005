// SPDX-License-Identifier: Apache-2.0

//! Triangle-inequality bounds on the norm of the current operator across the
//! last bond, and their large-`L` behaviour.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regression::{compensated_sum, linear_fit};

/// The bound quantities for one `(L, alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBoundReport {
    pub sites: usize,
    pub alpha: f64,
    /// `Σ_j |j - L|^-α`.
    pub s_direct: f64,
    /// `sqrt(Σ_jk |(j - L)(k - L)|^-α)`.
    pub s_double: f64,
    /// `sqrt(Σ_j Σ_{k≠j} |j - k|^-2α)`.
    pub s_shifted_inner: f64,
    /// `Σ_j sqrt(Σ_{k≠j} |j - k|^-2α)`.
    pub s_shifted_outer: f64,
    /// Continuum estimate; `None` where it is undefined.
    pub asymptotic: Option<f64>,
}

impl NormBoundReport {
    /// Violations of `s_double <= s_shifted_inner <= s_shifted_outer`
    /// beyond a relative slack.
    pub fn violations(&self, slack: f64) -> Vec<&'static str> {
        let mut out = Vec::new();
        let le = |a: f64, b: f64| a <= b + slack * b.abs().max(1.0);
        if !le(self.s_double, self.s_shifted_inner) {
            out.push("s_double > s_shifted_inner");
        }
        if !le(self.s_shifted_inner, self.s_shifted_outer) {
            out.push("s_shifted_inner > s_shifted_outer");
        }
        if (self.s_direct - self.s_double).abs() > slack * self.s_direct.max(1.0) {
            out.push("s_direct != s_double");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundQuantity {
    Direct,
    Double,
    ShiftedInner,
    ShiftedOuter,
    Asymptotic,
}

impl BoundQuantity {
    pub fn pick(self, report: &NormBoundReport) -> Option<f64> {
        match self {
            Self::Direct => Some(report.s_direct),
            Self::Double => Some(report.s_double),
            Self::ShiftedInner => Some(report.s_shifted_inner),
            Self::ShiftedOuter => Some(report.s_shifted_outer),
            Self::Asymptotic => report.asymptotic,
        }
    }
}

fn check(sites: usize, alpha: f64) -> Result<()> {
    if sites < 2 {
        return Err(Error::Domain(format!("norm bounds need L >= 2, got {sites}")));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    Ok(())
}

/// Running sums `P[n] = Σ_{r=1..n} r^-p`, accumulated with compensation.
fn prefix_power_sums(n: usize, p: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    let (mut sum, mut carry) = (0.0_f64, 0.0_f64);
    for r in 1..=n {
        let v = (r as f64).powf(-p);
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
        out.push(sum + carry);
    }
    out
}

/// Inner sums `Σ_{k≠j} |j - k|^-2α` for `j = 1..L-1`, with `k` over the same
/// range; empty sums are 0.
pub fn shifted_inner_sums(sites: usize, alpha: f64) -> Result<Vec<f64>> {
    check(sites, alpha)?;
    let m = sites - 1;
    let prefix = prefix_power_sums(m, 2.0 * alpha);
    Ok((1..=m).map(|j| prefix[j - 1] + prefix[m - j]).collect())
}

pub fn bound_sums(sites: usize, alpha: f64) -> Result<NormBoundReport> {
    check(sites, alpha)?;
    let m = sites - 1;
    let weights: Vec<f64> = (1..=m).map(|r| (r as f64).powf(-alpha)).collect();
    let s_direct = compensated_sum(weights.iter().copied());
    let s_double = compensated_sum(weights.iter().flat_map(|&a| weights.iter().map(move |&b| a * b))).sqrt();
    let inner = shifted_inner_sums(sites, alpha)?;
    let s_shifted_inner = compensated_sum(inner.iter().copied()).sqrt();
    let s_shifted_outer = compensated_sum(inner.iter().map(|v| v.sqrt()));
    Ok(NormBoundReport {
        sites,
        alpha,
        s_direct,
        s_double,
        s_shifted_inner,
        s_shifted_outer,
        asymptotic: asymptotic_bound(sites, alpha).ok(),
    })
}

/// Continuum form of the outer bound:
/// `sqrt((1 - L^(1-2α)) / (2α - 1)) + L^(3/2-α) / (sqrt(2α - 1) (3/2 - α))`.
pub fn asymptotic_bound(sites: usize, alpha: f64) -> Result<f64> {
    if sites < 2 {
        return Err(Error::Domain(format!("norm bounds need L >= 2, got {sites}")));
    }
    if !(alpha > 0.5) || !alpha.is_finite() {
        return Err(Error::Domain(format!("continuum bound needs alpha > 0.5, got {alpha}")));
    }
    if (alpha - 1.5).abs() <= 1e-6 {
        return Err(Error::Domain("continuum bound has a pole at alpha = 1.5".into()));
    }
    let l = sites as f64;
    let k = 2.0 * alpha - 1.0;
    Ok(((1.0 - l.powf(1.0 - 2.0 * alpha)) / k).sqrt() + l.powf(1.5 - alpha) / (k.sqrt() * (1.5 - alpha)))
}

/// Log-log slope of a bound quantity against `L`, with its standard error.
pub fn norm_scaling_exponent_of(quantity: BoundQuantity, alpha: f64, sizes: &[usize]) -> Result<(f64, f64)> {
    if !(alpha > 0.5) {
        return Err(Error::Domain(format!(
            "scaling exponent needs alpha > 0.5, got {alpha}"
        )));
    }
    let mut distinct = sizes.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(Error::Fit(format!(
            "need at least 4 distinct sizes, got {}",
            distinct.len()
        )));
    }
    let mut x = Vec::with_capacity(sizes.len());
    let mut y = Vec::with_capacity(sizes.len());
    for &l in &distinct {
        let value = match quantity {
            BoundQuantity::Asymptotic => asymptotic_bound(l, alpha)?,
            other => other.pick(&bound_sums(l, alpha)?).unwrap_or(f64::NAN),
        };
        if !(value > 0.0) {
            return Err(Error::Fit(format!("bound is not positive at L = {l}")));
        }
        x.push((l as f64).ln());
        y.push(value.ln());
    }
    let fit = linear_fit(&x, &y)?;
    Ok((fit.slope, fit.slope_stderr))
}

/// Log-log slope of `s_shifted_outer` against `L`.
pub fn norm_scaling_exponent(alpha: f64, sizes: &[usize]) -> Result<(f64, f64)> {
    norm_scaling_exponent_of(BoundQuantity::ShiftedOuter, alpha, sizes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_examples() {
        let r = bound_sums(3, 1.0).unwrap();
        assert!((r.s_direct - 1.5).abs() < 1e-15);
        assert!((r.s_double - 1.5).abs() < 1e-15);
        // j = 1, 2 each see one neighbour at distance 1.
        assert!((r.s_shifted_inner - 2f64.sqrt()).abs() < 1e-15);
        assert!((r.s_shifted_outer - 2.0).abs() < 1e-15);

        let r = bound_sums(2, 2.0).unwrap();
        assert_eq!(r.s_direct, 1.0);
        assert_eq!(r.s_shifted_inner, 0.0);
        assert_eq!(r.s_shifted_outer, 0.0);
        assert!(bound_sums(1, 1.0).is_err());
        assert!(bound_sums(4, -0.1).is_err());
    }

    #[test]
    fn uniform_hopping_counts_pairs() {
        let r = bound_sums(11, 0.0).unwrap();
        assert_eq!(r.s_direct, 10.0);
        assert!((r.s_shifted_inner - 90f64.sqrt()).abs() < 1e-12);
        assert!((r.s_shifted_outer - 10.0 * 3.0).abs() < 1e-12);
        assert!(r.asymptotic.is_none());
    }

    #[test]
    fn asymptotic_examples() {
        let v = asymptotic_bound(10_000, 1.0).unwrap();
        assert!((v - (200.0 + (1.0 - 1e-4f64).sqrt())).abs() < 1e-9);
        let far = asymptotic_bound(100_000_000, 2.0).unwrap();
        assert!((far - (1.0 / 3.0f64).sqrt()).abs() < 1e-3);
        assert!(asymptotic_bound(100, 0.5).is_err());
        assert!(asymptotic_bound(100, 1.5).is_err());
        assert!(asymptotic_bound(100, 1.5 + 1e-3).is_ok());
    }

    #[test]
    fn continuum_exponents() {
        let sizes = [500, 1000, 2000, 4000, 6000];
        for &(alpha, expected) in &[(1.0, 0.5), (1.25, 0.25), (2.0, 0.0)] {
            let (slope, _) = norm_scaling_exponent_of(BoundQuantity::Asymptotic, alpha, &sizes).unwrap();
            assert!((slope - expected).abs() <= 0.05, "alpha={alpha}: {slope}");
        }
    }

    #[test]
    fn discrete_outer_sum_grows_linearly() {
        // Every site has a nearest neighbour, so the outer sum is at least L - 2.
        let (slope, err) = norm_scaling_exponent(1.25, &[500, 1000, 2000, 4000]).unwrap();
        assert!((slope - 1.0).abs() < 0.02 && err < 0.01);
        assert!(norm_scaling_exponent(0.5, &[500, 1000, 2000, 4000]).is_err());
        assert!(norm_scaling_exponent(1.0, &[500, 1000, 1000, 2000]).is_err());
    }

    #[test]
    fn chain_needs_decaying_hopping() {
        // Uniform hopping: L - 1 against sqrt((L - 1)(L - 2)).
        let r = bound_sums(50, 0.0).unwrap();
        assert_eq!(r.violations(1e-12), vec!["s_double > s_shifted_inner"]);
        assert_eq!(bound_sums(3, 1.0).unwrap().violations(1e-12).len(), 1);
    }

    #[test]
    fn prefix_sums_match_direct() {
        let p = prefix_power_sums(50, 1.3);
        let direct: f64 = (1..=50).map(|r| (r as f64).powf(-1.3)).sum();
        assert!((p[50] - direct).abs() < 1e-13);
    }

    proptest! {
        #[test]
        fn inequality_chain(l in 4usize..300, alpha in 0.6..3.0f64) {
            let r = bound_sums(l, alpha).unwrap();
            prop_assert!(r.violations(1e-12).is_empty(), "{:?}", r);
            prop_assert!(r.s_direct > 0.0 && r.s_double > 0.0);
        }

        #[test]
        fn outer_dominates_inner(l in 2usize..300, alpha in 0.0..3.0f64) {
            let r = bound_sums(l, alpha).unwrap();
            prop_assert!(r.s_shifted_inner <= r.s_shifted_outer * (1.0 + 1e-12));
        }

        #[test]
        fn inner_sums_are_reflection_symmetric(l in 2usize..200, alpha in 0.0..3.0f64) {
            let inner = shifted_inner_sums(l, alpha).unwrap();
            let m = inner.len();
            for j in 0..m {
                prop_assert!((inner[j] - inner[m - 1 - j]).abs() <= 1e-13 * inner[j].max(1.0));
            }
        }
    }
}
