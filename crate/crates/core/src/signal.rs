//! Transmit-side simulation and the regressor windows fed to every
//! constant-modulus expression.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModulationScheme {
    #[serde(rename = "BPSK", alias = "bpsk")]
    Bpsk,
    #[serde(rename = "QPSK", alias = "qpsk")]
    Qpsk,
}

impl ModulationScheme {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            ModulationScheme::Bpsk => 1,
            ModulationScheme::Qpsk => 2,
        }
    }

    /// Number of rotations that leave the constellation invariant.
    pub fn symmetry_order(self) -> u32 {
        match self {
            ModulationScheme::Bpsk => 2,
            ModulationScheme::Qpsk => 4,
        }
    }
}

impl std::fmt::Display for ModulationScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModulationScheme::Bpsk => write!(f, "BPSK"),
            ModulationScheme::Qpsk => write!(f, "QPSK"),
        }
    }
}

impl std::str::FromStr for ModulationScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "BPSK" => Ok(ModulationScheme::Bpsk),
            "QPSK" => Ok(ModulationScheme::Qpsk),
            _ => Err(Error::Config(format!("unknown modulation {s:?}"))),
        }
    }
}

#[inline]
fn antipodal(bit: u8) -> f64 {
    if bit != 0 {
        1.0
    } else {
        -1.0
    }
}

/// Maps bits to unit-modulus symbols.
///
/// BPSK uses `z = 2f - 1`. QPSK is Gray mapped: the first bit of each pair
/// drives the in-phase sign, the second the quadrature sign.
pub fn modulate(bits: &[u8], scheme: ModulationScheme) -> Result<Vec<C64>> {
    match scheme {
        ModulationScheme::Bpsk => Ok(bits.iter().map(|&b| C64::new(antipodal(b), 0.0)).collect()),
        ModulationScheme::Qpsk => {
            if !bits.len().is_multiple_of(2) {
                return Err(Error::Length(format!(
                    "QPSK needs an even number of bits, got {}",
                    bits.len()
                )));
            }
            let a = std::f64::consts::FRAC_1_SQRT_2;
            Ok(bits
                .chunks_exact(2)
                .map(|p| C64::new(a * antipodal(p[0]), a * antipodal(p[1])))
                .collect())
        }
    }
}

/// FIR channel with circular complex AWGN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    taps: Vec<C64>,
    noise_variance: f64,
}

impl ChannelModel {
    pub fn new(taps: Vec<C64>, noise_variance: f64) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidChannel("no taps".into()));
        }
        if taps.iter().all(|t| t.norm_sqr() == 0.0) {
            return Err(Error::InvalidChannel("all taps are zero".into()));
        }
        if taps.iter().any(|t| !t.re.is_finite() || !t.im.is_finite()) {
            return Err(Error::InvalidChannel("non-finite tap".into()));
        }
        if !(noise_variance >= 0.0) || !noise_variance.is_finite() {
            return Err(Error::InvalidChannel(format!(
                "noise variance must be finite and nonnegative, got {noise_variance}"
            )));
        }
        Ok(Self { taps, noise_variance })
    }

    /// Channel at a given SNR in dB, with unit symbol energy and noise
    /// variance counted per complex sample.
    pub fn with_snr_db(taps: Vec<C64>, snr_db: f64) -> Result<Self> {
        Self::new(taps, snr_db_to_noise_variance(snr_db))
    }

    pub fn noiseless(taps: Vec<C64>) -> Result<Self> {
        Self::new(taps, 0.0)
    }

    pub fn taps(&self) -> &[C64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// Same channel with every tap multiplied by `e^{j phase}`.
    pub fn rotated(&self, phase: f64) -> Self {
        let r = C64::from_polar(1.0, phase);
        Self { taps: self.taps.iter().map(|t| t * r).collect(), noise_variance: self.noise_variance }
    }
}

pub fn snr_db_to_noise_variance(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// One simulated transmission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub coded_bits: Vec<u8>,
    pub symbols: Vec<C64>,
    pub received: Vec<C64>,
    pub seed: u64,
}

/// Full linear convolution of `symbols` with the channel taps plus noise.
///
/// The output has `symbols.len() + taps - 1` samples.
pub fn transmit(symbols: &[C64], channel: &ChannelModel, seed: u64) -> Vec<C64> {
    if symbols.is_empty() {
        return Vec::new();
    }
    let taps = channel.taps();
    let mut out = vec![C64::new(0.0, 0.0); symbols.len() + taps.len() - 1];
    for (i, s) in symbols.iter().enumerate() {
        for (k, h) in taps.iter().enumerate() {
            out[i + k] += h * s;
        }
    }
    if channel.noise_variance() > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, (channel.noise_variance() / 2.0).sqrt())
            .expect("finite standard deviation");
        for x in out.iter_mut() {
            let re = normal.sample(&mut rng);
            let im = normal.sample(&mut rng);
            *x += C64::new(re, im);
        }
    }
    out
}

/// Sliding regressor windows `x_n = [x_n, x_{n-1}, .., x_{n-L}]` over a
/// received frame, their rank-one outer products, and the pairing of each
/// window with the coded bit it should reproduce.
#[derive(Debug, Clone)]
pub struct RegressorSet {
    order: usize,
    frame_len: usize,
    delay: usize,
    sample_index: Vec<usize>,
    windows: Vec<DVector<C64>>,
    rank1: Vec<DMatrix<C64>>,
    paired_bit: Vec<Option<usize>>,
}

/// `floor((L + K_h - 1) / 2)`: the middle of the combined response.
pub fn default_delay(order: usize, channel_len: usize) -> usize {
    (order + channel_len - 1) / 2
}

/// Builds every full window of `L + 1` samples (no zero padding).
///
/// `frame_len` is the number of transmitted symbols, so the channel length
/// is `received.len() - frame_len + 1`. Window `n` (sample index) is paired
/// with symbol `n - delay` when that index lies inside the frame.
pub fn build_regressors(
    received: &[C64],
    order: usize,
    delay: usize,
    frame_len: usize,
) -> Result<RegressorSet> {
    let taps = order + 1;
    if received.len() < taps {
        return Err(Error::Regressor(format!(
            "{} received samples cannot fill a window of {taps}",
            received.len()
        )));
    }
    if frame_len == 0 || received.len() < frame_len {
        return Err(Error::Regressor(format!(
            "frame length {frame_len} inconsistent with {} received samples",
            received.len()
        )));
    }
    let channel_len = received.len() - frame_len + 1;
    let max_delay = order + channel_len - 1;
    if delay > max_delay {
        return Err(Error::Regressor(format!(
            "delay {delay} outside [0, {max_delay}] for L = {order}, channel length {channel_len}"
        )));
    }

    let count = received.len() - order;
    let mut sample_index = Vec::with_capacity(count);
    let mut windows = Vec::with_capacity(count);
    let mut rank1 = Vec::with_capacity(count);
    let mut paired_bit = Vec::with_capacity(count);
    for n in order..received.len() {
        let x = DVector::from_iterator(taps, (0..taps).map(|k| received[n - k]));
        rank1.push(&x * x.adjoint());
        windows.push(x);
        sample_index.push(n);
        paired_bit.push(n.checked_sub(delay).filter(|&b| b < frame_len));
    }
    Ok(RegressorSet { order, frame_len, delay, sample_index, windows, rank1, paired_bit })
}

impl RegressorSet {
    /// Equalizer order `L`; the equalizer has `L + 1` taps.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn taps(&self) -> usize {
        self.order + 1
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    /// Number of windows, the `N` that averages every CM cost.
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn windows(&self) -> &[DVector<C64>] {
        &self.windows
    }

    pub fn rank1(&self) -> &[DMatrix<C64>] {
        &self.rank1
    }

    pub fn sample_index(&self) -> &[usize] {
        &self.sample_index
    }

    /// Bit index paired with each window, if any.
    pub fn paired_bits(&self) -> &[Option<usize>] {
        &self.paired_bit
    }

    /// `(window, bit)` pairs in window order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.paired_bit.iter().enumerate().filter_map(|(w, b)| b.map(|b| (w, b)))
    }

    /// Same samples multiplied by `e^{j theta}`.
    pub fn rotated(&self, theta: f64) -> Self {
        let r = C64::from_polar(1.0, theta);
        let windows: Vec<DVector<C64>> = self.windows.iter().map(|x| x * r).collect();
        let rank1 = windows.iter().map(|x| x * x.adjoint()).collect();
        Self { windows, rank1, ..self.clone() }
    }

    fn check_dim(&self, w: &DVector<C64>) -> Result<()> {
        if w.len() != self.taps() {
            return Err(Error::Dimension { expected: self.taps(), got: w.len() });
        }
        Ok(())
    }
}

/// `y[n] = w^H x_n` for every window.
pub fn equalize(w: &DVector<C64>, regressors: &RegressorSet) -> Result<Vec<C64>> {
    regressors.check_dim(w)?;
    Ok(regressors.windows.iter().map(|x| w.dotc(x)).collect())
}

/// l1 constant-modulus cost `(1/N) sum | |y[n]|^2 - 1 |` over the windows.
pub fn cm_cost(w: &DVector<C64>, regressors: &RegressorSet) -> Result<f64> {
    let y = equalize(w, regressors)?;
    Ok(cm_cost_of_output(&y))
}

pub fn cm_cost_of_output(y: &[C64]) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    y.iter().map(|v| (v.norm_sqr() - 1.0).abs()).sum::<f64>() / y.len() as f64
}
