// SPDX-License-Identifier: Apache-2.0

//! Sweep manifests: a JSON file with optional sections, overridden by flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const CACHE_ENV: &str = "NESSLAB_CACHE_DIR";
const MAX_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    #[serde(rename = "L")]
    pub sites: Option<usize>,
    #[serde(rename = "L_list")]
    pub sites_list: Option<Vec<usize>>,
    #[serde(rename = "J")]
    pub hopping: Option<f64>,
    pub alpha: Option<f64>,
    pub alpha_grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DissipationSection {
    pub gamma: Option<f64>,
    pub gamma_grid: Option<Vec<f64>>,
    #[serde(rename = "Gamma")]
    pub boundary: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecutionSection {
    pub workers: Option<usize>,
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub format: Option<OutputFormat>,
    pub path: Option<PathBuf>,
}

/// The file layout.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub lattice: LatticeSection,
    #[serde(default)]
    pub dissipation: DissipationSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub execution: ExecutionSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Values given on the command line; each wins over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub sites: Option<Vec<usize>>,
    pub hopping: Option<f64>,
    pub alpha: Option<Vec<f64>>,
    pub gamma: Option<Vec<f64>>,
    pub boundary: Option<f64>,
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
    pub workers: Option<usize>,
    pub cache_dir: Option<PathBuf>,
    pub no_cache: bool,
    pub format: Option<OutputFormat>,
    pub out: Option<PathBuf>,
}

/// Fully resolved settings. Grids may still be empty; each command states
/// which ones it needs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub sites: Vec<usize>,
    pub hopping: f64,
    pub alphas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub boundary: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub workers: usize,
    pub cache_dir: Option<PathBuf>,
    pub format: OutputFormat,
    pub out: Option<PathBuf>,
}

fn scalar_or_list<T: Clone>(name: &str, scalar: &Option<T>, list: &Option<Vec<T>>) -> CliResult<Vec<T>> {
    match (scalar, list) {
        (Some(_), Some(_)) => Err(CliError::Config(format!("give either {name} or its grid, not both"))),
        (Some(v), None) => Ok(vec![v.clone()]),
        (None, Some(l)) => {
            if l.is_empty() {
                Err(CliError::Config(format!("{name} grid is empty")))
            } else {
                Ok(l.clone())
            }
        }
        (None, None) => Ok(Vec::new()),
    }
}

impl SweepConfig {
    /// Merges file, environment and flags, then validates.
    pub fn resolve(file: &ConfigFile, flags: &Overrides, env_cache: Option<PathBuf>) -> CliResult<Self> {
        let sites = match &flags.sites {
            Some(v) => v.clone(),
            None => scalar_or_list("L", &file.lattice.sites, &file.lattice.sites_list)?,
        };
        let alphas = match &flags.alpha {
            Some(v) => v.clone(),
            None => scalar_or_list("alpha", &file.lattice.alpha, &file.lattice.alpha_grid)?,
        };
        let gammas = match &flags.gamma {
            Some(v) => v.clone(),
            None => scalar_or_list("gamma", &file.dissipation.gamma, &file.dissipation.gamma_grid)?,
        };
        let cache_dir = if flags.no_cache {
            None
        } else {
            flags
                .cache_dir
                .clone()
                .or(env_cache)
                .or_else(|| file.execution.cache_dir.clone())
        };
        let cfg = Self {
            sites,
            hopping: flags.hopping.or(file.lattice.hopping).unwrap_or(1.0),
            alphas,
            gammas,
            boundary: flags.boundary.or(file.dissipation.boundary).unwrap_or(1.0),
            tolerance: flags.tolerance.or(file.solver.tolerance).unwrap_or(1e-10),
            max_iterations: flags.max_iterations.or(file.solver.max_iterations).unwrap_or(500),
            workers: flags.workers.or(file.execution.workers).unwrap_or_else(default_workers),
            cache_dir,
            format: flags.format.or(file.output.format).unwrap_or_default(),
            out: flags.out.clone().or_else(|| file.output.path.clone()),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(self.tolerance > 0.0 && self.tolerance <= MAX_TOLERANCE) {
            return bad(format!(
                "tolerance must lie in (0, {MAX_TOLERANCE}], got {}",
                self.tolerance
            ));
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1".into());
        }
        if let Some(l) = self.sites.iter().find(|&&l| l == 0) {
            return bad(format!("lattice size must be positive, got {l}"));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
            return bad(format!("alpha must be finite and >= 0, got {a}"));
        }
        if let Some(g) = self.gammas.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return bad(format!("gamma must be finite and >= 0, got {g}"));
        }
        if !(self.boundary.is_finite() && self.boundary > 0.0) {
            return bad(format!("Gamma must be positive, got {}", self.boundary));
        }
        if !(self.hopping.is_finite() && self.hopping != 0.0) {
            return bad(format!("J must be finite and nonzero, got {}", self.hopping));
        }
        Ok(())
    }

    pub fn require_sites(&self) -> CliResult<&[usize]> {
        non_empty("L", &self.sites)
    }

    pub fn require_alphas(&self) -> CliResult<&[f64]> {
        non_empty("alpha", &self.alphas)
    }

    pub fn require_gammas(&self) -> CliResult<&[f64]> {
        non_empty("gamma", &self.gammas)
    }

    pub fn single<T: Copy>(name: &str, values: &[T]) -> CliResult<T> {
        match values {
            [v] => Ok(*v),
            [] => Err(CliError::Config(format!("{name} is required"))),
            _ => Err(CliError::Config(format!("{name} must be a single value here"))),
        }
    }
}

fn non_empty<'a, T>(name: &str, v: &'a [T]) -> CliResult<&'a [T]> {
    if v.is_empty() {
        Err(CliError::Config(format!("{name} is required")))
    } else {
        Ok(v)
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}
