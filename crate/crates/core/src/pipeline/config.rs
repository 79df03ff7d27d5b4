use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::conic::SolverSettings;
use crate::formulation::FormulationParams;
use crate::gf2::{generate_asymmetric_code, load_alist, ParityCheckMatrix};
use crate::signal::ModulationScheme;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "CMA_SGD")]
    CmaSgd,
    #[serde(rename = "CM_SDP")]
    CmSdp,
    #[serde(rename = "CM_SDP_CODE")]
    CmSdpCode,
    #[serde(rename = "MMSE_GENIE")]
    MmseGenie,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::CmaSgd, Method::CmSdp, Method::CmSdpCode, Method::MmseGenie];

    pub fn name(self) -> &'static str {
        match self {
            Method::CmaSgd => "CMA_SGD",
            Method::CmSdp => "CM_SDP",
            Method::CmSdpCode => "CM_SDP_CODE",
            Method::MmseGenie => "MMSE_GENIE",
        }
    }

    /// Blind methods that cannot tell `w` from `-w`.
    pub fn is_sign_blind(self) -> bool {
        matches!(self, Method::CmaSgd | Method::CmSdp)
    }

    pub fn uses_solver(self) -> bool {
        matches!(self, Method::CmSdp | Method::CmSdpCode)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

/// Where the parity-check matrix comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodeSpec {
    Alist(PathBuf),
    Generate { n: usize, m: usize, row_degree: usize, seed: u64 },
}

impl Default for CodeSpec {
    fn default() -> Self {
        CodeSpec::Generate { n: 24, m: 12, row_degree: 3, seed: 0 }
    }
}

impl CodeSpec {
    pub fn load(&self) -> Result<ParityCheckMatrix> {
        match self {
            CodeSpec::Alist(path) => load_alist(&std::fs::read_to_string(path)?),
            CodeSpec::Generate { n, m, row_degree, seed } => generate_asymmetric_code(*n, *m, *row_degree, *seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoundingSettings {
    /// Gaussian candidates drawn before the principal component is added.
    pub candidates: usize,
}

impl Default for RoundingSettings {
    fn default() -> Self {
        Self { candidates: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CmaSettings {
    pub step: f64,
    pub passes: usize,
}

impl Default for CmaSettings {
    fn default() -> Self {
        Self { step: 5e-3, passes: 20 }
    }
}

/// One trial, mirrored field for field by the JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialConfig {
    /// Channel taps as `[re, im]` pairs.
    pub taps: Vec<C64>,
    /// `null` means noiseless.
    pub snr_db: Option<f64>,
    pub modulation: ModulationScheme,
    /// Equalizer order `L` (`L + 1` taps).
    pub order: usize,
    /// Equalization delay in symbols; defaults to the middle of the combined
    /// response.
    pub delay: Option<usize>,
    /// Bits per frame. The code method rounds down to whole codewords (at
    /// least one).
    pub frame_len: usize,
    pub method: Method,
    pub code: CodeSpec,
    /// Multiply the taps by a seed-drawn carrier phase `e^{j phi}`.
    pub random_phase: bool,
    pub solver: SolverSettings,
    pub rounding: RoundingSettings,
    pub formulation: FormulationParams,
    pub cma: CmaSettings,
    pub seed: u64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            taps: vec![C64::new(1.0, 0.0), C64::new(0.4, 0.0)],
            snr_db: Some(20.0),
            modulation: ModulationScheme::Bpsk,
            order: 7,
            delay: None,
            frame_len: 128,
            method: Method::CmSdp,
            code: CodeSpec::default(),
            random_phase: true,
            solver: SolverSettings::default(),
            rounding: RoundingSettings::default(),
            formulation: FormulationParams::default(),
            cma: CmaSettings::default(),
            seed: 0,
        }
    }
}

impl TrialConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: TrialConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.taps.is_empty() || self.taps.iter().all(|t| t.norm_sqr() == 0.0) {
            return bad("channel needs at least one nonzero tap".into());
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return bad(format!("snr_db must be finite, got {snr}"));
            }
        }
        if self.frame_len == 0 {
            return bad("frame_len must be positive".into());
        }
        if self.modulation == ModulationScheme::Qpsk && !self.frame_len.is_multiple_of(2) {
            return bad("QPSK frames need an even bit count".into());
        }
        if self.method == Method::CmSdpCode && self.modulation != ModulationScheme::Bpsk {
            return Err(Error::UnsupportedModulation);
        }
        if let Some(d) = self.delay {
            let max = self.order + self.taps.len() - 1;
            if d > max {
                return bad(format!("delay {d} outside [0, {max}]"));
            }
        }
        if !(self.cma.step > 0.0) || self.cma.passes == 0 {
            return bad("CMA needs a positive step and at least one pass".into());
        }
        if self.rounding.candidates == 0 {
            return bad("rounding needs at least one candidate".into());
        }
        if !(self.formulation.squeeze_weight > 0.0) {
            return bad("squeeze_weight must be positive".into());
        }
        self.solver.validate()
    }
}
