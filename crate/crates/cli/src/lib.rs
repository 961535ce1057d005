// SPDX-License-Identifier: Apache-2.0

//! `nesslab` command line: single solves, dephasing sweeps, heat maps,
//! size-scaling suites, norm-bound tables and oracle checks.

pub mod cache;
pub mod commands;
pub mod config;
pub mod error;
pub mod record;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{ConfigFile, OutputFormat, Overrides, SweepConfig, CACHE_ENV};
pub use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "nesslab",
    version,
    about = "Steady-state transport of dephased long-range fermion chains"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one (L, alpha, gamma) point.
    Ness,
    /// Current against gamma for each alpha at fixed L.
    SweepGamma,
    /// Current on the full alpha-gamma grid at fixed L.
    Heatmap,
    /// Size series per alpha, fitted and classified.
    Scaling,
    /// Operator-norm bound sums on an (L, alpha) grid.
    NormBounds,
    /// Compare against the many-body Liouvillian (L <= 5).
    OracleCheck,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON sweep manifest.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,

    /// Also write the per-site profile (`ness` only); defaults to
    /// `<out stem>.profile.csv`.
    #[arg(long, global = true, num_args = 0..=1)]
    pub profile: Option<Option<PathBuf>>,

    /// Chain length(s), comma separated.
    #[arg(long = "sites", short = 'L', global = true, value_delimiter = ',')]
    pub sites: Option<Vec<usize>>,

    #[arg(long, global = true, value_delimiter = ',')]
    pub alpha: Option<Vec<f64>>,

    /// Dephasing rate(s).
    #[arg(long, global = true, value_delimiter = ',')]
    pub gamma: Option<Vec<f64>>,

    /// Boundary coupling.
    #[arg(long = "boundary", visible_alias = "Gamma", global = true)]
    pub boundary: Option<f64>,

    /// Hopping scale.
    #[arg(long = "hopping", visible_alias = "J", global = true)]
    pub hopping: Option<f64>,

    #[arg(long, global = true)]
    pub tolerance: Option<f64>,

    #[arg(long, global = true)]
    pub max_iterations: Option<usize>,

    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,

    #[arg(long, global = true)]
    pub no_cache: bool,

    /// Threads inside one dense factorization; defaults to all cores when a
    /// single worker runs, else 1.
    #[arg(long, global = true)]
    pub inner_threads: Option<usize>,
}

impl CommonArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            sites: self.sites.clone(),
            hopping: self.hopping,
            alpha: self.alpha.clone(),
            gamma: self.gamma.clone(),
            boundary: self.boundary,
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            workers: self.workers,
            cache_dir: self.cache_dir.clone(),
            no_cache: self.no_cache,
            format: self.format,
            out: self.out.clone(),
        }
    }

    pub fn resolve(&self) -> CliResult<SweepConfig> {
        let file = match &self.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let env_cache = std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
        SweepConfig::resolve(&file, &self.overrides(), env_cache)
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let cfg = cli.common.resolve()?;
    let inner = cli.common.inner_threads.unwrap_or(if cfg.workers > 1 { 1 } else { 0 });
    nesslab_core::set_linear_algebra_threads(inner);
    if cli.common.profile.is_some() && !matches!(cli.command, Command::Ness) {
        return Err(CliError::Config("--profile applies to `ness` only".into()));
    }
    match cli.command {
        Command::Ness => {
            let profile = match &cli.common.profile {
                None => None,
                Some(Some(p)) => Some(p.clone()),
                Some(None) => {
                    let out = cfg
                        .out
                        .as_ref()
                        .ok_or_else(|| CliError::Config("--profile without a path needs --out".into()))?;
                    let mut name = out.file_stem().unwrap_or_default().to_os_string();
                    name.push(".profile.csv");
                    Some(out.with_file_name(name))
                }
            };
            commands::cmd_ness(&cfg, profile.as_deref()).map(drop)
        }
        Command::SweepGamma => commands::cmd_sweep_gamma(&cfg).map(drop),
        Command::Heatmap => commands::cmd_heatmap(&cfg).map(drop),
        Command::Scaling => commands::cmd_scaling(&cfg).map(drop),
        Command::NormBounds => commands::cmd_norm_bounds(&cfg).map(drop),
        Command::OracleCheck => commands::cmd_oracle_check(&cfg).map(drop),
    }
}
