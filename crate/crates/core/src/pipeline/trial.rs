use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::baselines::{cma_baseline, mmse_genie};
use super::config::{Method, TrialConfig};
use crate::conic::{solve, ConicProblem, Residuals, SolverSettings, SolverSolution, SolverStatus};
use crate::formulation::{build_basic_cm_sdp, build_code_cm_sdp, extract_solution, VariableLayout};
use crate::gf2::ParityCheckMatrix;
use crate::recovery::{
    align_and_score, candidate_pool, derotate, errors_at, hard_decision, select_best, symbol_error_rate, Alignment,
    Candidate, CandidateSource,
};
use crate::signal::{
    build_regressors, cm_cost_of_output, default_delay, equalize, modulate, snr_db_to_noise_variance, transmit,
    ChannelModel, Frame, ModulationScheme, RegressorSet,
};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub status: SolverStatus,
    pub iterations: usize,
    pub residuals: Residuals,
    pub objective: f64,
    /// Wall-clock time; the only field that varies between identical runs.
    pub wall_ms: f64,
}

impl From<&SolverSolution> for SolverReport {
    fn from(s: &SolverSolution) -> Self {
        Self {
            status: s.status,
            iterations: s.iterations,
            residuals: s.residuals,
            objective: s.primal_objective,
            wall_ms: s.wall_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub method: Method,
    pub snr_db: Option<f64>,
    pub seed: u64,
    pub ber: f64,
    pub ser: f64,
    /// Whether the best alignment complemented the decisions; absent for the
    /// code method, which is scored without a sign search.
    pub sign_flipped: Option<bool>,
    /// The raw decisions match the truth strictly better than their
    /// complement does, at the scored delay.
    pub sign_correct: bool,
    /// Equalization delay in symbols used for scoring.
    pub best_delay: isize,
    /// CM cost of the final power-normalized equalizer.
    pub cm_value: f64,
    pub carrier_phase: f64,
    pub solver: Option<SolverReport>,
    /// BER of the rounded relaxed bits (code method).
    pub bits_from_f_ber: Option<f64>,
    /// BER of `hard_decision(equalize(w))` at the configured delay without
    /// any search (code method).
    pub bits_from_w_ber: Option<f64>,
}

impl TrialReport {
    /// Report with wall-clock fields zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        if let Some(s) = r.solver.as_mut() {
            s.wall_ms = 0.0;
        }
        r
    }
}

/// Everything a trial derives from its seed before any equalizer runs.
#[derive(Debug, Clone)]
pub struct TrialSetup {
    pub frame: Frame,
    pub channel: ChannelModel,
    pub carrier_phase: f64,
    pub delay: usize,
    pub regressors: RegressorSet,
}

/// Bits, channel and regressors for a configuration. `code` must be given
/// for the code method; its frame holds whole codewords.
pub fn prepare(config: &TrialConfig, code: Option<&ParityCheckMatrix>) -> Result<TrialSetup> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let bits: Vec<u8> = if config.method == Method::CmSdpCode {
        let h = code.ok_or_else(|| Error::Config("the code method needs a parity-check matrix".into()))?;
        let enc = h.encoder()?;
        let words = (config.frame_len / h.cols()).max(1);
        let mut bits = Vec::with_capacity(words * h.cols());
        for _ in 0..words {
            let info: Vec<u8> = (0..enc.info_len()).map(|_| rng.random_range(0..2)).collect();
            bits.extend(enc.encode(&info)?);
        }
        bits
    } else {
        (0..config.frame_len).map(|_| rng.random_range(0..2)).collect()
    };
    let carrier_phase =
        if config.random_phase { rng.random_range(0.0..std::f64::consts::TAU) } else { 0.0 };
    let noise_seed: u64 = rng.random();

    let noise = config.snr_db.map_or(0.0, snr_db_to_noise_variance);
    let channel = ChannelModel::new(config.taps.clone(), noise)?.rotated(carrier_phase);
    let symbols = modulate(&bits, config.modulation)?;
    let received = transmit(&symbols, &channel, noise_seed);
    let delay = config.delay.unwrap_or_else(|| default_delay(config.order, channel.len()));
    let regressors = build_regressors(&received, config.order, delay, symbols.len())?;
    Ok(TrialSetup {
        frame: Frame { coded_bits: bits, symbols, received, seed: config.seed },
        channel,
        carrier_phase,
        delay,
        regressors,
    })
}

/// The conic problem a trial would solve, with its layout.
pub fn trial_problem(config: &TrialConfig, code: Option<&ParityCheckMatrix>) -> Result<(ConicProblem, VariableLayout)> {
    let setup = prepare(config, code).map_err(Error::at("prepare"))?;
    match config.method {
        Method::CmSdp => build_basic_cm_sdp(&setup.regressors),
        Method::CmSdpCode => build_code_cm_sdp(
            &setup.regressors,
            code.expect("checked in prepare"),
            &config.formulation,
            config.modulation,
        ),
        m => Err(Error::Config(format!("{m} does not solve a conic problem"))),
    }
    .map_err(Error::at("formulate"))
}

/// Loads the code named by the configuration when the method needs one.
pub fn load_code(config: &TrialConfig) -> Result<Option<ParityCheckMatrix>> {
    if config.method == Method::CmSdpCode {
        Ok(Some(config.code.load().map_err(Error::at("load code"))?))
    } else {
        Ok(None)
    }
}

pub fn run_trial(config: &TrialConfig) -> Result<TrialReport> {
    let code = load_code(config)?;
    run_trial_with_code(config, code.as_ref())
}

/// [`run_trial`] with the code already loaded (sweeps share one matrix).
pub fn run_trial_with_code(config: &TrialConfig, code: Option<&ParityCheckMatrix>) -> Result<TrialReport> {
    let setup = prepare(config, code).map_err(Error::at("prepare"))?;
    match config.method {
        Method::CmaSgd => {
            let w = cma_baseline(&setup.regressors, &config.cma).map_err(Error::at("cma"))?;
            score_blind(config, &setup, &w, None)
        }
        Method::CmSdp => {
            let (problem, layout) = build_basic_cm_sdp(&setup.regressors).map_err(Error::at("formulate"))?;
            let sol = solve_checked(&problem, &config.solver)?;
            let relaxed = extract_solution(&sol, &layout).map_err(Error::at("extract"))?;
            let pool = candidate_pool(&relaxed.w_matrix, config.rounding.candidates, rounding_seed(config))
                .map_err(Error::at("rounding"))?;
            let est = select_best(&pool, &setup.regressors).map_err(Error::at("rounding"))?;
            score_blind(config, &setup, &est.w, Some(SolverReport::from(&sol)))
        }
        Method::MmseGenie => {
            let w = mmse_genie(&setup.channel, config.order, setup.delay).map_err(Error::at("mmse"))?.w;
            score_known_phase(config, &setup, &w)
        }
        Method::CmSdpCode => run_code_method(config, &setup, code.expect("checked in prepare")),
    }
}

fn rounding_seed(config: &TrialConfig) -> u64 {
    config.seed ^ 0x9e37_79b9_7f4a_7c15
}

fn solve_checked(problem: &ConicProblem, settings: &SolverSettings) -> Result<SolverSolution> {
    let sol = solve(problem, settings).map_err(Error::at("solve"))?;
    match sol.status {
        SolverStatus::Optimal | SolverStatus::MaxIterations => Ok(sol),
        s => Err(Error::Stage { stage: "solve", source: Box::new(Error::Solver(format!("{s} after {} iterations", sol.iterations))) }),
    }
}

/// Delays (in bits) mapping window `k` to bit `k + L - delta` for every
/// admissible `delta`, plus the matching `delta`.
fn delay_candidates(config: &TrialConfig, channel_len: usize) -> Vec<(isize, usize)> {
    let bps = config.modulation.bits_per_symbol() as isize;
    (0..=config.order + channel_len - 1).map(|delta| ((delta as isize - config.order as isize) * bps, delta)).collect()
}

fn bit_offset(config: &TrialConfig, delta: usize) -> isize {
    (delta as isize - config.order as isize) * config.modulation.bits_per_symbol() as isize
}

fn power_normalized_cm(w: &DVector<C64>, regs: &RegressorSet) -> Result<f64> {
    let w = crate::recovery::power_normalize(w, regs)?;
    Ok(cm_cost_of_output(&equalize(&w, regs)?))
}

/// Blind scoring: remove the carrier rotation, then search delays and the
/// sign. QPSK also tries the quarter-turn the derotation cannot see.
fn score_blind(config: &TrialConfig, setup: &TrialSetup, w: &DVector<C64>, solver: Option<SolverReport>) -> Result<TrialReport> {
    let regs = &setup.regressors;
    let truth = &setup.frame.coded_bits;
    let y = equalize(w, regs)?;
    let (y, _) = derotate(&y, config.modulation);
    let mut rotations = vec![y.clone()];
    if config.modulation == ModulationScheme::Qpsk {
        rotations.push(y.iter().map(|z| z * C64::new(0.0, 1.0)).collect());
    }
    let delays = delay_candidates(config, setup.channel.len());
    let mut best: Option<(Alignment, Vec<u8>)> = None;
    for y in &rotations {
        let decided = hard_decision(y, config.modulation);
        let a = align_and_score(&decided, truth, delays.iter().map(|d| d.0), true).map_err(Error::at("score"))?;
        if best.as_ref().is_none_or(|(b, _)| a.ber < b.ber) {
            best = Some((a, decided));
        }
    }
    let (a, decided) = best.expect("at least one rotation");
    let delta = delays.iter().find(|d| d.0 == a.best_delay).expect("delay from the candidate list").1;
    let bps = config.modulation.bits_per_symbol();
    let ser = symbol_error_rate(&decided, truth, a.best_delay, a.sign_flipped, bps)?;
    let sign_correct = raw_sign_correct(&decided, truth, a.best_delay)?;
    Ok(TrialReport {
        method: config.method,
        snr_db: config.snr_db,
        seed: config.seed,
        ber: a.ber,
        ser,
        sign_flipped: Some(a.sign_flipped),
        sign_correct,
        best_delay: delta as isize,
        cm_value: power_normalized_cm(w, regs)?,
        carrier_phase: setup.carrier_phase,
        solver,
        bits_from_f_ber: None,
        bits_from_w_ber: None,
    })
}

fn raw_sign_correct(decided: &[u8], truth: &[u8], delay: isize) -> Result<bool> {
    let (plain, _) = errors_at(decided, truth, delay, false)?;
    let (flipped, _) = errors_at(decided, truth, delay, true)?;
    Ok(plain < flipped)
}

/// The genie knows the channel including its phase: delay search only.
fn score_known_phase(config: &TrialConfig, setup: &TrialSetup, w: &DVector<C64>) -> Result<TrialReport> {
    let regs = &setup.regressors;
    let truth = &setup.frame.coded_bits;
    let decided = hard_decision(&equalize(w, regs)?, config.modulation);
    let delays = delay_candidates(config, setup.channel.len());
    let a = align_and_score(&decided, truth, delays.iter().map(|d| d.0), false).map_err(Error::at("score"))?;
    let delta = delays.iter().find(|d| d.0 == a.best_delay).expect("delay from the candidate list").1;
    let ser = symbol_error_rate(&decided, truth, a.best_delay, false, config.modulation.bits_per_symbol())?;
    Ok(TrialReport {
        method: config.method,
        snr_db: config.snr_db,
        seed: config.seed,
        ber: a.ber,
        ser,
        sign_flipped: None,
        sign_correct: raw_sign_correct(&decided, truth, a.best_delay)?,
        best_delay: delta as isize,
        cm_value: power_normalized_cm(w, regs)?,
        carrier_phase: setup.carrier_phase,
        solver: None,
        bits_from_f_ber: None,
        bits_from_w_ber: None,
    })
}

/// Bits come from rounding the relaxed `f` at 0.5, scored without any
/// search. The equalizer is the best of the usual pool plus the `w` block,
/// rotated onto the `w` block's phase so that its decisions keep the sign
/// the code constraints fixed.
fn run_code_method(config: &TrialConfig, setup: &TrialSetup, code: &ParityCheckMatrix) -> Result<TrialReport> {
    let regs = &setup.regressors;
    let truth = &setup.frame.coded_bits;
    let (problem, layout) =
        build_code_cm_sdp(regs, code, &config.formulation, config.modulation).map_err(Error::at("formulate"))?;
    let sol = solve_checked(&problem, &config.solver)?;
    let relaxed = extract_solution(&sol, &layout).map_err(Error::at("extract"))?;
    let f = relaxed.f.as_ref().expect("code layout has f");
    let f_bits: Vec<u8> = f.iter().map(|&v| u8::from(v >= 0.5)).collect();
    let (f_errors, f_compared) = errors_at(&f_bits, truth, 0, false)?;
    let f_ber = f_errors as f64 / f_compared as f64;

    let direct = relaxed.w.clone().expect("code layout has w");
    let mut pool = candidate_pool(&relaxed.w_matrix, config.rounding.candidates, rounding_seed(config))
        .map_err(Error::at("rounding"))?;
    pool.push(Candidate { w: direct.clone(), source: CandidateSource::DirectFromBlock });
    let est = select_best(&pool, regs).map_err(Error::at("rounding"))?;
    let overlap = est.w.dotc(&direct);
    let w = if overlap.norm() > 0.0 { &est.w * (overlap / overlap.norm()) } else { est.w.clone() };
    let offset = bit_offset(config, setup.delay);
    let w_bits = hard_decision(&equalize(&w, regs)?, config.modulation);
    let (w_errors, w_compared) = errors_at(&w_bits, truth, offset, false).map_err(Error::at("score"))?;

    Ok(TrialReport {
        method: config.method,
        snr_db: config.snr_db,
        seed: config.seed,
        ber: f_ber,
        ser: f_ber,
        sign_flipped: None,
        sign_correct: raw_sign_correct(&f_bits, truth, 0)?,
        best_delay: setup.delay as isize,
        cm_value: est.cm_value,
        carrier_phase: setup.carrier_phase,
        solver: Some(SolverReport::from(&sol)),
        bits_from_f_ber: Some(f_ber),
        bits_from_w_ber: Some(w_errors as f64 / w_compared as f64),
    })
}
