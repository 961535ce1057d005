// SPDX-License-Identifier: Apache-2.0

//! System-size scaling of the steady-state resistance and transport regime
//! classification.
//!
//! All three candidate models are scored by the small-sample AIC of their
//! residuals in `R` itself, so the scores are comparable across models.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;
use crate::lindblad::DissipationSpec;
use crate::ness::{solve_ness, NessControls};
use crate::regression::{compensated_sum, linear_fit};

pub const DEFAULT_SIZES: [usize; 7] = [64, 96, 128, 192, 256, 384, 512];
const MIN_POINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub sites: usize,
    pub current: f64,
    pub resistance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSeries {
    alpha: f64,
    dephasing: f64,
    boundary: f64,
    points: Vec<ScalingPoint>,
}

impl ScalingSeries {
    /// Points must have strictly increasing sizes and positive currents.
    pub fn new(alpha: f64, dephasing: f64, boundary: f64, points: Vec<ScalingPoint>) -> Result<Self> {
        if points.len() < MIN_POINTS {
            return Err(Error::Fit(format!(
                "need at least {MIN_POINTS} sizes, got {}",
                points.len()
            )));
        }
        if points.windows(2).any(|w| w[1].sites <= w[0].sites) {
            return Err(Error::Fit("sizes must be strictly increasing".into()));
        }
        if let Some(p) = points.iter().find(|p| !(p.current > 0.0) || !p.current.is_finite()) {
            return Err(Error::Fit(format!("non-positive current at L = {}", p.sites)));
        }
        Ok(Self {
            alpha,
            dephasing,
            boundary,
            points,
        })
    }

    /// Builds points from `(L, J)` pairs with `R = 1/J`.
    pub fn from_currents(alpha: f64, dephasing: f64, boundary: f64, data: &[(usize, f64)]) -> Result<Self> {
        let points = data
            .iter()
            .map(|&(sites, current)| ScalingPoint {
                sites,
                current,
                resistance: 1.0 / current,
            })
            .collect();
        Self::new(alpha, dephasing, boundary, points)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dephasing(&self) -> f64 {
        self.dephasing
    }

    pub fn boundary(&self) -> f64 {
        self.boundary
    }

    pub fn points(&self) -> &[ScalingPoint] {
        &self.points
    }

    fn log_sizes(&self) -> Vec<f64> {
        self.points.iter().map(|p| (p.sites as f64).ln()).collect()
    }

    fn resistances(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.resistance).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ScalingModel {
    /// `R = a ln L + b`.
    Log,
    /// `R = b L^a`.
    Power,
    /// `R = b`.
    Const,
}

impl ScalingModel {
    fn parameters(self) -> usize {
        match self {
            Self::Log | Self::Power => 2,
            Self::Const => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub model: ScalingModel,
    /// `(slope or exponent, intercept or prefactor)`.
    pub params: (f64, f64),
    pub stderr: (f64, f64),
    pub r_squared: f64,
    pub aic: f64,
}

impl ScalingFit {
    pub fn predict(&self, sites: usize) -> f64 {
        let l = sites as f64;
        match self.model {
            ScalingModel::Log => self.params.0 * l.ln() + self.params.1,
            ScalingModel::Power => self.params.1 * l.powf(self.params.0),
            ScalingModel::Const => self.params.1,
        }
    }
}

/// Corrected AIC of a Gaussian fit in `R`; the noise variance counts as a parameter.
fn aic(series: &ScalingSeries, model: ScalingModel, predict: impl Fn(usize) -> f64) -> f64 {
    let n = series.points.len() as f64;
    let rss = compensated_sum(series.points.iter().map(|p| (p.resistance - predict(p.sites)).powi(2)));
    let scale = compensated_sum(series.points.iter().map(|p| p.resistance.abs())) / n;
    let rss = rss.max(n * (1e-15 * scale).powi(2));
    let k = model.parameters() as f64 + 1.0;
    let correction = if n - k - 1.0 > 0.0 {
        2.0 * k * (k + 1.0) / (n - k - 1.0)
    } else {
        f64::INFINITY
    };
    n * (rss / n).ln() + 2.0 * k + correction
}

pub fn fit_log(series: &ScalingSeries) -> Result<ScalingFit> {
    let f = linear_fit(&series.log_sizes(), &series.resistances())?;
    let mut fit = ScalingFit {
        model: ScalingModel::Log,
        params: (f.slope, f.intercept),
        stderr: (f.slope_stderr, f.intercept_stderr),
        r_squared: f.r_squared,
        aic: 0.0,
    };
    fit.aic = aic(series, fit.model, |l| fit.predict(l));
    Ok(fit)
}

/// Linear fit of `ln R` on `ln L`; the prefactor error is propagated from
/// the intercept.
pub fn fit_powerlaw(series: &ScalingSeries) -> Result<ScalingFit> {
    if series.points.iter().any(|p| !(p.resistance > 0.0)) {
        return Err(Error::Fit("power law needs positive resistances".into()));
    }
    let y: Vec<f64> = series.points.iter().map(|p| p.resistance.ln()).collect();
    let f = linear_fit(&series.log_sizes(), &y)?;
    let prefactor = f.intercept.exp();
    let mut fit = ScalingFit {
        model: ScalingModel::Power,
        params: (f.slope, prefactor),
        stderr: (f.slope_stderr, prefactor * f.intercept_stderr),
        r_squared: f.r_squared,
        aic: 0.0,
    };
    fit.aic = aic(series, fit.model, |l| fit.predict(l));
    Ok(fit)
}

pub fn fit_const(series: &ScalingSeries) -> Result<ScalingFit> {
    let r = series.resistances();
    let n = r.len() as f64;
    let mean = compensated_sum(r.iter().copied()) / n;
    let var = compensated_sum(r.iter().map(|v| (v - mean).powi(2))) / (n - 1.0);
    let mut fit = ScalingFit {
        model: ScalingModel::Const,
        params: (0.0, mean),
        stderr: (0.0, (var / n).sqrt()),
        r_squared: 0.0,
        aic: 0.0,
    };
    fit.aic = aic(series, fit.model, |_| mean);
    Ok(fit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regime {
    Ballistic,
    SuperdiffusiveLog,
    SuperdiffusivePower,
    Diffusive,
    Subdiffusive,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ballistic => "BALLISTIC",
            Self::SuperdiffusiveLog => "SUPERDIFFUSIVE_LOG",
            Self::SuperdiffusivePower => "SUPERDIFFUSIVE_POWER",
            Self::Diffusive => "DIFFUSIVE",
            Self::Subdiffusive => "SUBDIFFUSIVE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub regime: Regime,
    pub winner: ScalingFit,
    /// LOG, POWER, CONST in that order.
    pub fits: [ScalingFit; 3],
}

pub fn classify_regime(series: &ScalingSeries) -> Result<Classification> {
    let fits = [fit_log(series)?, fit_powerlaw(series)?, fit_const(series)?];
    // Ties go to the earlier (simpler-to-read) entry, which keeps this deterministic.
    let winner = fits
        .iter()
        .copied()
        .reduce(|best, f| if f.aic < best.aic { f } else { best })
        .expect("three fits");
    let regime = match winner.model {
        ScalingModel::Const => Regime::Ballistic,
        ScalingModel::Log => Regime::SuperdiffusiveLog,
        ScalingModel::Power => {
            let nu = winner.params.0;
            if nu <= 0.05 {
                Regime::Ballistic
            } else if (nu - 1.0).abs() <= 0.1 {
                Regime::Diffusive
            } else if nu < 0.9 {
                Regime::SuperdiffusivePower
            } else {
                Regime::Subdiffusive
            }
        }
    };
    Ok(Classification { regime, winner, fits })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentPoint {
    pub alpha: f64,
    pub nu: f64,
    pub stderr: f64,
    pub fit: ScalingFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveFailure {
    pub alpha: f64,
    pub sites: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesGrid {
    /// One series per alpha that completed, in input order.
    pub series: Vec<ScalingSeries>,
    /// Non-empty when the sweep was aborted.
    pub failures: Vec<SolveFailure>,
}

impl SeriesGrid {
    pub fn complete(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentCurve {
    pub points: Vec<ExponentPoint>,
    pub failures: Vec<SolveFailure>,
}

impl ExponentCurve {
    pub fn complete(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Steady-state current for `(L, alpha, gamma)`.
pub trait CurrentSolver: Sync {
    fn current(&self, sites: usize, alpha: f64, dephasing: f64) -> Result<f64>;
    fn boundary(&self) -> f64;
}

/// Runs `solve_ness` with unit hopping.
#[derive(Debug, Clone, Copy)]
pub struct NessCurrentSolver {
    pub boundary: f64,
    pub controls: NessControls,
}

impl Default for NessCurrentSolver {
    fn default() -> Self {
        Self {
            boundary: 1.0,
            controls: NessControls::default(),
        }
    }
}

impl CurrentSolver for NessCurrentSolver {
    fn current(&self, sites: usize, alpha: f64, dephasing: f64) -> Result<f64> {
        let spec = LatticeSpec::new(sites, 1.0, alpha)?;
        let diss = DissipationSpec::new(dephasing, self.boundary)?;
        Ok(solve_ness(&spec, &diss, &self.controls)?.current)
    }

    fn boundary(&self) -> f64 {
        self.boundary
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Domain(format!("worker pool: {e}")))
}

/// Solves every `(alpha, L)` pair on a bounded pool. The first failure stops
/// further jobs from starting.
pub fn series_grid<S: CurrentSolver>(
    alphas: &[f64],
    dephasing: f64,
    sizes: &[usize],
    solver: &S,
    workers: usize,
) -> Result<SeriesGrid> {
    let mut sizes = sizes.to_vec();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < MIN_POINTS {
        return Err(Error::Fit(format!("need at least {MIN_POINTS} distinct sizes")));
    }
    let jobs: Vec<(usize, usize)> = (0..alphas.len())
        .flat_map(|a| (0..sizes.len()).map(move |l| (a, l)))
        .collect();
    let abort = AtomicBool::new(false);
    let outcomes: Vec<((usize, usize), Option<Result<f64>>)> = pool(workers)?.install(|| {
        jobs.par_iter()
            .map(|&(a, l)| {
                if abort.load(Ordering::Relaxed) {
                    return ((a, l), None);
                }
                let r = solver.current(sizes[l], alphas[a], dephasing);
                if r.is_err() {
                    abort.store(true, Ordering::Relaxed);
                }
                ((a, l), Some(r))
            })
            .collect()
    });

    let mut table: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut failures = Vec::new();
    for ((a, l), r) in outcomes {
        match r {
            Some(Ok(j)) => {
                table.insert((a, l), j);
            }
            Some(Err(e)) => failures.push(SolveFailure {
                alpha: alphas[a],
                sites: sizes[l],
                message: e.to_string(),
            }),
            None => {}
        }
    }
    let mut series = Vec::new();
    for (a, &alpha) in alphas.iter().enumerate() {
        let data: Option<Vec<(usize, f64)>> = (0..sizes.len())
            .map(|l| table.get(&(a, l)).map(|&j| (sizes[l], j)))
            .collect();
        if let Some(data) = data {
            series.push(ScalingSeries::from_currents(
                alpha,
                dephasing,
                solver.boundary(),
                &data,
            )?);
        }
    }
    Ok(SeriesGrid { series, failures })
}

/// `nu(alpha)` from power-law fits, for `alpha` in `(1, 2.5]`.
pub fn exponent_curve<S: CurrentSolver>(
    alphas: &[f64],
    dephasing: f64,
    sizes: &[usize],
    solver: &S,
    workers: usize,
) -> Result<ExponentCurve> {
    if let Some(a) = alphas.iter().find(|&&a| !(a > 1.0 && a <= 2.5)) {
        return Err(Error::Domain(format!(
            "exponent curve needs alpha in (1, 2.5], got {a}"
        )));
    }
    let grid = series_grid(alphas, dephasing, sizes, solver, workers)?;
    let points = grid
        .series
        .iter()
        .map(|s| {
            let fit = fit_powerlaw(s)?;
            Ok(ExponentPoint {
                alpha: s.alpha(),
                nu: fit.params.0,
                stderr: fit.stderr.0,
                fit,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExponentCurve {
        points,
        failures: grid.failures,
    })
}
