use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Method, TrialConfig};
use super::trial::{load_code, run_trial_with_code, TrialReport};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub methods: Vec<Method>,
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if self.snr_db.is_empty() || self.methods.is_empty() || self.trials == 0 {
            return Err(Error::Config("sweep grid needs SNR points, methods and at least one trial".into()));
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("sweep SNR values must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub method: Method,
    pub snr_db: f64,
    pub trials: usize,
    pub mean_ber: f64,
    pub sign_correct_fraction: f64,
    /// `None` for methods without a conic solve.
    pub mean_solve_ms: Option<f64>,
}

/// Result of a sweep: trial reports in CSV row order and per-point means.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub reports: Vec<(usize, TrialReport)>,
    pub summary: Vec<SweepSummary>,
}

pub const CSV_HEADER: [&str; 12] = [
    "method",
    "snr_db",
    "trial",
    "seed",
    "ber",
    "ser",
    "sign_flipped",
    "best_delay",
    "cm_value",
    "solver_status",
    "solver_iters",
    "solve_ms",
];

/// Runs every `(method, snr, trial)` combination. Trial `i` uses seed
/// `base.seed + i`, so a row can be rerun alone from its config. Trials run
/// in parallel but rows come back in grid order.
pub fn run_grid(grid: &SweepGrid, base: &TrialConfig) -> Result<SweepOutcome> {
    grid.validate()?;
    let mut jobs = Vec::new();
    for &method in &grid.methods {
        for &snr in &grid.snr_db {
            for trial in 0..grid.trials {
                let cfg = TrialConfig {
                    method,
                    snr_db: Some(snr),
                    seed: base.seed.wrapping_add(trial as u64),
                    ..base.clone()
                };
                jobs.push((trial, cfg));
            }
        }
    }
    let code = if grid.methods.contains(&Method::CmSdpCode) {
        load_code(&TrialConfig { method: Method::CmSdpCode, ..base.clone() })?
    } else {
        None
    };
    let reports = jobs
        .par_iter()
        .map(|(trial, cfg)| {
            run_trial_with_code(cfg, code.as_ref()).map(|r| (*trial, r)).map_err(|e| Error::Trial {
                context: format!("{} at {} dB, trial {trial}", cfg.method, snr_label(cfg.snr_db)),
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(grid, &reports);
    Ok(SweepOutcome { reports, summary })
}

fn snr_label(snr: Option<f64>) -> String {
    snr.map_or_else(|| "inf".to_string(), |s| s.to_string())
}

fn summarize(grid: &SweepGrid, reports: &[(usize, TrialReport)]) -> Vec<SweepSummary> {
    let mut out = Vec::new();
    for chunk in reports.chunks(grid.trials) {
        let n = chunk.len() as f64;
        let first = &chunk[0].1;
        let solve_ms: Vec<f64> = chunk.iter().filter_map(|(_, r)| r.solver.as_ref().map(|s| s.wall_ms)).collect();
        out.push(SweepSummary {
            method: first.method,
            snr_db: first.snr_db.unwrap_or(f64::INFINITY),
            trials: chunk.len(),
            mean_ber: chunk.iter().map(|(_, r)| r.ber).sum::<f64>() / n,
            sign_correct_fraction: chunk.iter().filter(|(_, r)| r.sign_correct).count() as f64 / n,
            mean_solve_ms: (!solve_ms.is_empty()).then(|| solve_ms.iter().sum::<f64>() / solve_ms.len() as f64),
        });
    }
    out
}

/// Writes the per-trial CSV. `solve_ms` is left empty unless `timing` is
/// set, so that repeated runs produce identical bytes.
pub fn write_csv<W: Write>(out: W, reports: &[(usize, TrialReport)], timing: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for (trial, r) in reports {
        let solver = r.solver.as_ref();
        w.write_record([
            r.method.name().to_string(),
            r.snr_db.map_or(String::new(), |s| s.to_string()),
            trial.to_string(),
            r.seed.to_string(),
            r.ber.to_string(),
            r.ser.to_string(),
            r.sign_flipped.map_or(String::new(), |b| b.to_string()),
            r.best_delay.to_string(),
            r.cm_value.to_string(),
            solver.map_or(String::new(), |s| s.status.to_string()),
            solver.map_or(String::new(), |s| s.iterations.to_string()),
            match (timing, solver) {
                (true, Some(s)) => format!("{:.3}", s.wall_ms),
                _ => String::new(),
            },
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// [`run_grid`] followed by [`write_csv`] to `output` (created or
/// truncated).
pub fn run_sweep(grid: &SweepGrid, base: &TrialConfig, output: &Path, timing: bool) -> Result<Vec<SweepSummary>> {
    let file = std::fs::File::create(output)?;
    let outcome = run_grid(grid, base)?;
    write_csv(std::io::BufWriter::new(file), &outcome.reports, timing)?;
    Ok(outcome.summary)
}
