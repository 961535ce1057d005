// SPDX-License-Identifier: Apache-2.0

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use nesslab_core::transport::{classify_regime, Classification, ScalingSeries, DEFAULT_SIZES};
use nesslab_core::{bound_sums, oracle_ness, CorrelationMatrix, DissipationSpec, Error, LatticeSpec, NormBoundReport};
use rayon::prelude::*;
use serde::Serialize;

use crate::cache::Cache;
use crate::config::{OutputFormat, SweepConfig};
use crate::error::{CliError, CliResult};
use crate::record::{cell_key, fmt_f64, solve_cell, write_profile, write_records, Cell, ResultRecord, SolveSettings};

pub const ORACLE_TOLERANCE: f64 = 1e-8;
pub const ORACLE_CHECK_MAX_SITES: usize = 5;
pub const DEFAULT_NORM_SIZES: [usize; 5] = [500, 1000, 2000, 4000, 6000];

fn settings(cfg: &SweepConfig) -> SolveSettings {
    SolveSettings {
        hopping: cfg.hopping,
        boundary: cfg.boundary,
        tolerance: cfg.tolerance,
        max_iterations: cfg.max_iterations,
    }
}

fn open_cache(cfg: &SweepConfig) -> CliResult<Option<Cache>> {
    cfg.cache_dir.as_deref().map(Cache::open).transpose()
}

fn pool(workers: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))
}

fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Box::new(BufWriter::new(File::create(p)?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn sibling(out: Option<&Path>, suffix: &str) -> Option<PathBuf> {
    out.map(|p| {
        let mut name = p.file_stem().unwrap_or_default().to_os_string();
        name.push(suffix);
        p.with_file_name(name)
    })
}

fn by_point(a: &ResultRecord, b: &ResultRecord) -> std::cmp::Ordering {
    a.sites
        .cmp(&b.sites)
        .then(a.alpha.total_cmp(&b.alpha))
        .then(a.gamma.total_cmp(&b.gamma))
}

/// Cache-or-solve for every cell on `workers` threads; rows come back sorted
/// by `(L, alpha, gamma)`.
pub fn solve_points(
    cells: &[Cell],
    settings: &SolveSettings,
    cache: Option<&Cache>,
    workers: usize,
) -> CliResult<Vec<ResultRecord>> {
    let mut records: Vec<ResultRecord> = pool(workers)?.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let key = cell_key(cell, settings);
                if let Some(hit) = cache.and_then(|c| c.get(&key)) {
                    log::debug!("cache hit L={} alpha={} gamma={}", cell.sites, cell.alpha, cell.gamma);
                    return Ok(hit);
                }
                let (record, _) = solve_cell(cell, settings);
                log::info!(
                    "L={} alpha={} gamma={} J={:?} ({:.2}s)",
                    cell.sites,
                    cell.alpha,
                    cell.gamma,
                    record.current,
                    record.wall_time_s
                );
                if let (Some(c), true) = (cache, record.converged) {
                    c.put(&key, &record)?;
                }
                Ok(record)
            })
            .collect::<CliResult<Vec<_>>>()
    })?;
    records.sort_by(by_point);
    Ok(records)
}

fn fail_on_unconverged(records: &[ResultRecord]) -> CliResult<()> {
    let failed = records.iter().filter(|r| !r.converged).count();
    if failed > 0 {
        return Err(CliError::Solver(format!(
            "{failed} of {} points did not converge",
            records.len()
        )));
    }
    Ok(())
}

fn grid(sites: usize, alphas: &[f64], gammas: &[f64]) -> Vec<Cell> {
    alphas
        .iter()
        .flat_map(|&alpha| gammas.iter().map(move |&gamma| Cell { sites, alpha, gamma }))
        .collect()
}

/// Single point, optionally with a per-site profile file.
pub fn cmd_ness(cfg: &SweepConfig, profile: Option<&Path>) -> CliResult<Vec<ResultRecord>> {
    let cell = Cell {
        sites: SweepConfig::single("L", cfg.require_sites()?)?,
        alpha: SweepConfig::single("alpha", cfg.require_alphas()?)?,
        gamma: SweepConfig::single("gamma", cfg.require_gammas()?)?,
    };
    let settings = settings(cfg);
    let cache = open_cache(cfg)?;
    let records = match profile {
        None => solve_points(&[cell], &settings, cache.as_ref(), 1)?,
        Some(path) => {
            let (record, result) = solve_cell(&cell, &settings);
            if let Some(res) = &result {
                write_profile(res, output(Some(path))?)?;
                if let Some(c) = &cache {
                    c.put(&cell_key(&cell, &settings), &record)?;
                }
            }
            vec![record]
        }
    };
    write_records(&records, cfg.format, output(cfg.out.as_deref())?)?;
    fail_on_unconverged(&records)?;
    Ok(records)
}

/// Current against dephasing for each alpha at one size.
pub fn cmd_sweep_gamma(cfg: &SweepConfig) -> CliResult<Vec<ResultRecord>> {
    let sites = SweepConfig::single("L", cfg.require_sites()?)?;
    let cells = grid(sites, cfg.require_alphas()?, cfg.require_gammas()?);
    let records = solve_points(&cells, &settings(cfg), open_cache(cfg)?.as_ref(), cfg.workers)?;
    write_records(&records, cfg.format, output(cfg.out.as_deref())?)?;
    fail_on_unconverged(&records)?;
    Ok(records)
}

/// Full alpha-gamma grid at one size, long format.
pub fn cmd_heatmap(cfg: &SweepConfig) -> CliResult<Vec<ResultRecord>> {
    cmd_sweep_gamma(cfg)
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingSummary {
    pub alpha: f64,
    pub gamma: f64,
    #[serde(rename = "Gamma")]
    pub boundary: f64,
    pub sizes: Vec<usize>,
    pub classification: Option<Classification>,
    pub error: Option<String>,
}

/// Size series per alpha, fitted and classified.
pub fn cmd_scaling(cfg: &SweepConfig) -> CliResult<(Vec<ResultRecord>, Vec<ScalingSummary>)> {
    let sizes: Vec<usize> = if cfg.sites.is_empty() {
        DEFAULT_SIZES.to_vec()
    } else {
        cfg.sites.clone()
    };
    let gamma = SweepConfig::single("gamma", cfg.require_gammas()?)?;
    let alphas = cfg.require_alphas()?;
    let cells: Vec<Cell> = alphas
        .iter()
        .flat_map(|&alpha| sizes.iter().map(move |&sites| Cell { sites, alpha, gamma }))
        .collect();
    let records = solve_points(&cells, &settings(cfg), open_cache(cfg)?.as_ref(), cfg.workers)?;

    let mut summaries = Vec::new();
    for &alpha in alphas {
        let rows: Vec<&ResultRecord> = records.iter().filter(|r| r.alpha == alpha).collect();
        let data: Option<Vec<(usize, f64)>> = rows.iter().map(|r| r.current.map(|j| (r.sites, j))).collect();
        let mut sorted_sizes: Vec<usize> = rows.iter().map(|r| r.sites).collect();
        sorted_sizes.sort_unstable();
        let outcome = match data {
            None => Err("some sizes did not converge".to_string()),
            Some(mut data) => {
                data.sort_by_key(|p| p.0);
                ScalingSeries::from_currents(alpha, gamma, cfg.boundary, &data)
                    .and_then(|s| classify_regime(&s))
                    .map_err(|e| e.to_string())
            }
        };
        summaries.push(ScalingSummary {
            alpha,
            gamma,
            boundary: cfg.boundary,
            sizes: sorted_sizes,
            classification: outcome.as_ref().ok().cloned(),
            error: outcome.err(),
        });
    }

    let mut sorted = records.clone();
    sorted.sort_by(|a, b| a.alpha.total_cmp(&b.alpha).then(a.sites.cmp(&b.sites)));
    write_records(&sorted, cfg.format, output(cfg.out.as_deref())?)?;
    let summary_json = serde_json::to_string_pretty(&summaries)?;
    match sibling(cfg.out.as_deref(), ".summary.json") {
        Some(path) => std::fs::write(path, summary_json + "\n")?,
        None => eprintln!("{summary_json}"),
    }
    fail_on_unconverged(&records)?;
    if let Some(s) = summaries.iter().find(|s| s.error.is_some()) {
        return Err(CliError::Solver(format!(
            "alpha = {}: {}",
            s.alpha,
            s.error.as_deref().unwrap_or("")
        )));
    }
    Ok((sorted, summaries))
}

#[derive(Debug, Clone, Serialize)]
pub struct NormRow {
    #[serde(flatten)]
    pub report: NormBoundReport,
    pub violation: bool,
}

pub const NORM_HEADER: [&str; 8] = [
    "L",
    "alpha",
    "s_direct",
    "s_double",
    "s_shifted_inner",
    "s_shifted_outer",
    "asymptotic",
    "violation",
];

fn default_norm_alphas() -> Vec<f64> {
    (6..=25).map(|k| k as f64 / 10.0).collect()
}

/// Bound sums over an `(L, alpha)` grid; exit 3 on any inequality violation.
pub fn cmd_norm_bounds(cfg: &SweepConfig) -> CliResult<Vec<NormRow>> {
    let sizes: Vec<usize> = if cfg.sites.is_empty() {
        DEFAULT_NORM_SIZES.to_vec()
    } else {
        cfg.sites.clone()
    };
    let alphas = if cfg.alphas.is_empty() {
        default_norm_alphas()
    } else {
        cfg.alphas.clone()
    };
    let points: Vec<(usize, f64)> = sizes
        .iter()
        .flat_map(|&l| alphas.iter().map(move |&a| (l, a)))
        .collect();
    let rows: Vec<NormRow> = pool(cfg.workers)?.install(|| {
        points
            .par_iter()
            .map(|&(l, a)| {
                let report = bound_sums(l, a).map_err(|e| CliError::Config(e.to_string()))?;
                Ok(NormRow {
                    violation: !report.violations(1e-12).is_empty(),
                    report,
                })
            })
            .collect::<CliResult<Vec<_>>>()
    })?;

    let mut out = output(cfg.out.as_deref())?;
    match cfg.format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(NORM_HEADER)?;
            for r in &rows {
                let p = &r.report;
                w.write_record([
                    p.sites.to_string(),
                    fmt_f64(p.alpha),
                    fmt_f64(p.s_direct),
                    fmt_f64(p.s_double),
                    fmt_f64(p.s_shifted_inner),
                    fmt_f64(p.s_shifted_outer),
                    p.asymptotic.map(fmt_f64).unwrap_or_default(),
                    r.violation.to_string(),
                ])?;
            }
            w.flush()?;
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut out, &rows)?;
            writeln!(out)?;
        }
    }
    out.flush()?;

    let mut distinct = sizes.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() >= 4 {
        for &a in alphas.iter().filter(|&&a| a > 0.5) {
            if let Ok((slope, err)) = nesslab_core::norm_scaling_exponent(a, &distinct) {
                log::info!("alpha={a}: s_shifted_outer ~ L^{slope:.4} (+- {err:.4})");
            }
        }
    }
    let bad = rows.iter().filter(|r| r.violation).count();
    if bad > 0 {
        return Err(CliError::Validation(format!("{bad} inequality violations")));
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleRow {
    #[serde(rename = "L")]
    pub sites: usize,
    pub alpha: f64,
    pub gamma: f64,
    #[serde(rename = "Gamma")]
    pub boundary: f64,
    pub max_abs_diff: Option<f64>,
    pub pass: bool,
    pub error: Option<String>,
}

pub const ORACLE_HEADER: [&str; 6] = ["L", "alpha", "gamma", "Gamma", "max_abs_diff", "pass"];

/// Compares `solver` against the many-body oracle on every grid point.
pub fn oracle_rows<F>(cells: &[Cell], settings: &SolveSettings, solver: F, workers: usize) -> CliResult<Vec<OracleRow>>
where
    F: Fn(&LatticeSpec, &DissipationSpec) -> Result<CorrelationMatrix, Error> + Sync,
{
    if let Some(c) = cells.iter().find(|c| c.sites > ORACLE_CHECK_MAX_SITES || c.sites == 0) {
        return Err(CliError::Config(format!(
            "oracle check supports 1 <= L <= {ORACLE_CHECK_MAX_SITES}, got {}",
            c.sites
        )));
    }
    pool(workers)?.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let spec = LatticeSpec::new(cell.sites, settings.hopping, cell.alpha)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                let diss =
                    DissipationSpec::new(cell.gamma, settings.boundary).map_err(|e| CliError::Config(e.to_string()))?;
                let diff = oracle_ness(&spec, &diss).and_then(|o| {
                    let c = solver(&spec, &diss)?;
                    Ok((o.correlation.matrix() - c.matrix()).norm_max())
                });
                Ok(OracleRow {
                    sites: cell.sites,
                    alpha: cell.alpha,
                    gamma: cell.gamma,
                    boundary: settings.boundary,
                    pass: matches!(diff, Ok(d) if d <= ORACLE_TOLERANCE),
                    max_abs_diff: diff.as_ref().ok().copied(),
                    error: diff.err().map(|e| e.to_string()),
                })
            })
            .collect()
    })
}

pub fn default_oracle_grid() -> Vec<Cell> {
    let mut cells = Vec::new();
    for sites in 2..=5 {
        for alpha in [0.5, 1.0, 1.5, 2.0] {
            for gamma in [0.0, 0.5, 2.0] {
                cells.push(Cell { sites, alpha, gamma });
            }
        }
    }
    cells
}

pub fn cmd_oracle_check_with<F>(cfg: &SweepConfig, solver: F) -> CliResult<Vec<OracleRow>>
where
    F: Fn(&LatticeSpec, &DissipationSpec) -> Result<CorrelationMatrix, Error> + Sync,
{
    let cells = if cfg.sites.is_empty() && cfg.alphas.is_empty() && cfg.gammas.is_empty() {
        default_oracle_grid()
    } else {
        let sites = if cfg.sites.is_empty() {
            vec![2, 3, 4, 5]
        } else {
            cfg.sites.clone()
        };
        let alphas = if cfg.alphas.is_empty() {
            vec![0.5, 1.0, 1.5, 2.0]
        } else {
            cfg.alphas.clone()
        };
        let gammas = if cfg.gammas.is_empty() {
            vec![0.0, 0.5, 2.0]
        } else {
            cfg.gammas.clone()
        };
        sites.iter().flat_map(|&l| grid(l, &alphas, &gammas)).collect()
    };
    let rows = oracle_rows(&cells, &settings(cfg), solver, cfg.workers)?;
    let mut out = output(cfg.out.as_deref())?;
    match cfg.format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(ORACLE_HEADER)?;
            for r in &rows {
                w.write_record([
                    r.sites.to_string(),
                    fmt_f64(r.alpha),
                    fmt_f64(r.gamma),
                    fmt_f64(r.boundary),
                    r.max_abs_diff.map(fmt_f64).unwrap_or_default(),
                    r.pass.to_string(),
                ])?;
            }
            w.flush()?;
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut out, &rows)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    let failed = rows.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        return Err(CliError::Validation(format!(
            "{failed} of {} oracle points disagree",
            rows.len()
        )));
    }
    Ok(rows)
}

pub fn cmd_oracle_check(cfg: &SweepConfig) -> CliResult<Vec<OracleRow>> {
    let settings = settings(cfg);
    cmd_oracle_check_with(cfg, |spec, diss| {
        nesslab_core::solve_ness(spec, diss, &settings.controls()).map(|r| r.correlation)
    })
}
