//! Trials, Monte-Carlo sweeps and the reference equalizers.

mod baselines;
mod config;
mod sweep;
mod trial;

pub use baselines::{cma_baseline, cma_from, convolution_matrix, mmse_genie, MmseEqualizer};
pub use config::{CmaSettings, CodeSpec, Method, RoundingSettings, TrialConfig};
pub use sweep::{run_grid, run_sweep, write_csv, SweepGrid, SweepOutcome, SweepSummary, CSV_HEADER};
pub use trial::{
    load_code, prepare, run_trial, run_trial_with_code, trial_problem, SolverReport, TrialReport, TrialSetup,
};
