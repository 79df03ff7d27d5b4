use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use cmsdr::gf2::{generate_asymmetric_code, load_alist, write_alist, DEFAULT_D_MAX};
use cmsdr::pipeline::{load_code, run_sweep, run_trial, trial_problem, CodeSpec, Method, SweepGrid, TrialConfig};
use cmsdr::signal::ModulationScheme;
use cmsdr::{Error, Result, C64};

#[derive(Parser)]
#[command(name = "cmsdr", version, about = "Blind constant-modulus equalization by semidefinite relaxation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial and print its report as JSON.
    Simulate(TrialArgs),
    /// Run an SNR x method grid and write one CSV row per trial.
    Sweep {
        #[command(flatten)]
        trial: TrialArgs,
        /// Comma-separated SNR points in dB.
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 5.0, 10.0, 15.0, 20.0])]
        snr: Vec<f64>,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        /// Comma-separated methods.
        #[arg(long, value_delimiter = ',', default_value = "CM_SDP")]
        methods: Vec<Method>,
        #[arg(long, short)]
        output: PathBuf,
        /// Fill the solve_ms column (makes the CSV run-dependent).
        #[arg(long)]
        timing: bool,
    },
    /// Report asymmetry, rank and parity-inequality count of an alist file.
    CheckCode {
        alist: PathBuf,
        #[arg(long, default_value_t = DEFAULT_D_MAX)]
        d_max: usize,
    },
    /// Generate an asymmetric full-rank parity-check matrix in alist format.
    GenCode {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 3)]
        row_degree: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write here instead of stdout.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Write the conic problem a trial would solve as a JSON fixture.
    DumpProblem {
        #[command(flatten)]
        trial: TrialArgs,
        #[arg(long, short)]
        output: PathBuf,
        /// Also write the variable layout here.
        #[arg(long)]
        layout: Option<PathBuf>,
    },
}

/// A JSON config file plus flag overrides.
#[derive(Args)]
struct TrialArgs {
    /// JSON file mirroring the trial configuration.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<f64>,
    /// No channel noise.
    #[arg(long, conflicts_with = "snr_db")]
    noiseless: bool,
    /// Comma-separated complex taps such as `1,0.4` or `1,0.3-0.2i`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    taps: Option<Vec<C64>>,
    #[arg(long)]
    modulation: Option<ModulationScheme>,
    /// Equalizer order L.
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    delay: Option<usize>,
    #[arg(long)]
    frame_len: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Parity-check matrix in alist format for the code method.
    #[arg(long)]
    code_alist: Option<PathBuf>,
    /// Keep the channel phase at zero.
    #[arg(long)]
    no_random_phase: bool,
    #[arg(long)]
    candidates: Option<usize>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Sets both absolute and relative solver tolerances.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    squeeze_weight: Option<f64>,
    #[arg(long)]
    cma_step: Option<f64>,
    #[arg(long)]
    cma_passes: Option<usize>,
}

impl TrialArgs {
    fn resolve(&self) -> Result<TrialConfig> {
        let mut cfg = match &self.config {
            Some(path) => TrialConfig::from_json(&read(path)?)?,
            None => TrialConfig::default(),
        };
        if let Some(m) = self.method {
            cfg.method = m;
        }
        if let Some(s) = self.snr_db {
            cfg.snr_db = Some(s);
        }
        if self.noiseless {
            cfg.snr_db = None;
        }
        if let Some(t) = &self.taps {
            cfg.taps = t.clone();
        }
        if let Some(m) = self.modulation {
            cfg.modulation = m;
        }
        if let Some(l) = self.order {
            cfg.order = l;
        }
        if self.delay.is_some() {
            cfg.delay = self.delay;
        }
        if let Some(n) = self.frame_len {
            cfg.frame_len = n;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(p) = &self.code_alist {
            cfg.code = CodeSpec::Alist(p.clone());
        }
        if self.no_random_phase {
            cfg.random_phase = false;
        }
        if let Some(c) = self.candidates {
            cfg.rounding.candidates = c;
        }
        if let Some(k) = self.max_iterations {
            cfg.solver.max_iterations = k;
        }
        if let Some(e) = self.eps {
            cfg.solver.eps_abs = e;
            cfg.solver.eps_rel = e;
        }
        if let Some(w) = self.squeeze_weight {
            cfg.formulation.squeeze_weight = w;
        }
        if let Some(s) = self.cma_step {
            cfg.cma.step = s;
        }
        if let Some(p) = self.cma_passes {
            cfg.cma.passes = p;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(Error::from)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(Error::from)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => {
            let report = run_trial(&args.resolve()?)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Sweep { trial, snr, trials, methods, output, timing } => {
            let base = trial.resolve()?;
            let grid = SweepGrid { snr_db: snr, trials, methods };
            for row in run_sweep(&grid, &base, &output, timing)? {
                println!("{}", serde_json::to_string(&row)?);
            }
        }
        Command::CheckCode { alist, d_max } => {
            let h = load_alist(&read(&alist)?)?;
            let verdict = h.is_asymmetric();
            let report = json!({
                "rows": h.rows(),
                "cols": h.cols(),
                "rank": h.rank(),
                "asymmetric": verdict.asymmetric,
                "odd_weight_row": verdict.odd_row,
                "parity_inequalities": h.parity_inequality_count(d_max)?,
            });
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::GenCode { n, m, row_degree, seed, output } => {
            let text = write_alist(&generate_asymmetric_code(n, m, row_degree, seed)?);
            match output {
                Some(path) => write(&path, &text)?,
                None => print!("{text}"),
            }
        }
        Command::DumpProblem { trial, output, layout } => {
            let cfg = trial.resolve()?;
            let code = load_code(&cfg)?;
            let (problem, vars) = trial_problem(&cfg, code.as_ref())?;
            write(&output, &problem.to_json()?)?;
            if let Some(path) = layout {
                write(&path, &serde_json::to_string_pretty(&vars)?)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
