// SPDX-License-Identifier: Apache-2.0

//! One solved parameter point, its cache key and its serialized forms.

use std::io::Write;
use std::time::Instant;

use nesslab_core::{solve_ness, DissipationSpec, Error, LatticeSpec, NessControls, NessResult};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliResult;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const CSV_HEADER: [&str; 13] = [
    "L",
    "alpha",
    "gamma",
    "Gamma",
    "J_ness",
    "R_ness",
    "n_first",
    "n_last",
    "converged",
    "iterations",
    "residual",
    "wall_time_s",
    "config_hash",
];

pub const PROFILE_HEADER: [&str; 3] = ["site_index", "density", "site_in_current"];

/// Shortest decimal text that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        serde_json::to_string(&x).expect("finite float")
    } else {
        format!("{x}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub sites: usize,
    pub alpha: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveSettings {
    pub hopping: f64,
    pub boundary: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl SolveSettings {
    pub fn controls(&self) -> NessControls {
        NessControls {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            ..NessControls::default()
        }
    }
}

/// SHA-256 over the inputs that determine a result, as hex.
pub fn cell_key(cell: &Cell, settings: &SolveSettings) -> String {
    let text = format!(
        "version={};L={};J={};alpha={};gamma={};Gamma={};tolerance={};max_iterations={}",
        CODE_VERSION,
        cell.sites,
        fmt_f64(settings.hopping),
        fmt_f64(cell.alpha),
        fmt_f64(cell.gamma),
        fmt_f64(settings.boundary),
        fmt_f64(settings.tolerance),
        settings.max_iterations,
    );
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    #[serde(rename = "L")]
    pub sites: usize,
    pub alpha: f64,
    pub gamma: f64,
    #[serde(rename = "Gamma")]
    pub boundary: f64,
    #[serde(rename = "J_ness")]
    pub current: Option<f64>,
    #[serde(rename = "R_ness")]
    pub resistance: Option<f64>,
    pub n_first: Option<f64>,
    pub n_last: Option<f64>,
    pub converged: bool,
    pub iterations: Option<usize>,
    pub residual: Option<f64>,
    pub wall_time_s: f64,
    pub code_version: String,
    pub config_hash: String,
}

impl ResultRecord {
    pub fn csv_fields(&self) -> [String; 13] {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        [
            self.sites.to_string(),
            fmt_f64(self.alpha),
            fmt_f64(self.gamma),
            fmt_f64(self.boundary),
            opt(self.current),
            opt(self.resistance),
            opt(self.n_first),
            opt(self.n_last),
            self.converged.to_string(),
            self.iterations.map(|i| i.to_string()).unwrap_or_default(),
            opt(self.residual),
            fmt_f64(self.wall_time_s),
            self.config_hash.clone(),
        ]
    }
}

/// Solves one point. Solver failures become `converged = false` rows.
pub fn solve_cell(cell: &Cell, settings: &SolveSettings) -> (ResultRecord, Option<NessResult>) {
    let start = Instant::now();
    let key = cell_key(cell, settings);
    let outcome = LatticeSpec::new(cell.sites, settings.hopping, cell.alpha).and_then(|spec| {
        let diss = DissipationSpec::new(cell.gamma, settings.boundary)?;
        solve_ness(&spec, &diss, &settings.controls())
    });
    let mut record = ResultRecord {
        sites: cell.sites,
        alpha: cell.alpha,
        gamma: cell.gamma,
        boundary: settings.boundary,
        current: None,
        resistance: None,
        n_first: None,
        n_last: None,
        converged: false,
        iterations: None,
        residual: None,
        wall_time_s: 0.0,
        code_version: CODE_VERSION.to_string(),
        config_hash: key[..16].to_string(),
    };
    let result = match outcome {
        Ok(res) => {
            record.current = Some(res.current);
            record.resistance = Some(res.resistance);
            record.n_first = res.density.first().copied();
            record.n_last = res.density.last().copied();
            record.converged = true;
            record.iterations = Some(res.diagnostics.iterations);
            record.residual = Some(res.diagnostics.residual);
            Some(res)
        }
        Err(e) => {
            log::warn!("L={} alpha={} gamma={}: {e}", cell.sites, cell.alpha, cell.gamma);
            if let Error::NotConverged {
                iterations, residual, ..
            } = e
            {
                record.iterations = Some(iterations);
                record.residual = Some(residual);
            }
            None
        }
    };
    record.wall_time_s = start.elapsed().as_secs_f64();
    (record, result)
}

pub fn write_records<W: Write>(records: &[ResultRecord], format: crate::config::OutputFormat, out: W) -> CliResult<()> {
    match format {
        crate::config::OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(CSV_HEADER)?;
            for r in records {
                w.write_record(r.csv_fields())?;
            }
            w.flush()?;
        }
        crate::config::OutputFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, records)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

/// Per-site rows, 1-based.
pub fn write_profile<W: Write>(result: &NessResult, out: W) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PROFILE_HEADER)?;
    for (m, (n, j)) in result.density.iter().zip(&result.site_in_current).enumerate() {
        w.write_record([(m + 1).to_string(), fmt_f64(*n), fmt_f64(*j)])?;
    }
    w.flush()?;
    Ok(())
}
