//! Reference equalizers: stochastic-gradient CMA and the channel-aware
//! Wiener (MMSE) solution.

use log::warn;
use nalgebra::{DMatrix, DVector};

use super::config::CmaSettings;
use crate::signal::{cm_cost, ChannelModel, RegressorSet};
use crate::{Error, Result, C64};

/// CMA from the center-tap initialization `w = e_{ceil((L+1)/2)}`.
pub fn cma_baseline(regs: &RegressorSet, settings: &CmaSettings) -> Result<DVector<C64>> {
    let mut w0 = DVector::zeros(regs.taps());
    w0[regs.order() / 2] = C64::new(1.0, 0.0);
    cma_from(regs, w0, settings)
}

/// Stochastic gradient of the squared CM cost,
/// `w <- w - mu (|y|^2 - 1) conj(y) x_n`, swept over every window
/// `passes` times.
///
/// Aborts when the CM cost after a pass exceeds ten times its initial
/// value or stops being finite.
pub fn cma_from(regs: &RegressorSet, w0: DVector<C64>, settings: &CmaSettings) -> Result<DVector<C64>> {
    if !(settings.step > 0.0) || settings.passes == 0 {
        return Err(Error::Config("CMA needs a positive step and at least one pass".into()));
    }
    if w0.len() != regs.taps() {
        return Err(Error::Dimension { expected: regs.taps(), got: w0.len() });
    }
    if regs.is_empty() {
        return Err(Error::EmptyRegressors);
    }
    let initial = cm_cost(&w0, regs)?;
    let mut w = w0;
    for pass in 1..=settings.passes {
        for x in regs.windows() {
            let y = w.dotc(x);
            let g = y.conj() * (y.norm_sqr() - 1.0) * settings.step;
            w.axpy(-g, x, C64::new(1.0, 0.0));
        }
        let cost = cm_cost(&w, regs)?;
        if !cost.is_finite() || cost > 10.0 * initial.max(f64::MIN_POSITIVE) {
            return Err(Error::Divergence { pass, cost, initial });
        }
    }
    Ok(w)
}

/// `(L + 1) x (L + K_h)` convolution matrix: `x_n = H_c [s_n, .., s_{n-L-K_h+1}]`.
pub fn convolution_matrix(channel: &ChannelModel, order: usize) -> DMatrix<C64> {
    let taps = channel.taps();
    let rows = order + 1;
    let cols = order + taps.len();
    let mut h = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for (k, t) in taps.iter().enumerate() {
            h[(i, i + k)] = *t;
        }
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmseEqualizer {
    pub w: DVector<C64>,
    /// Set when the normal matrix needed `1e-12` diagonal loading.
    pub regularized: bool,
}

/// `w = (H_c H_c^H + sigma^2 I)^{-1} h_delta`, the Wiener equalizer for
/// delay `delta` given the true channel.
pub fn mmse_genie(channel: &ChannelModel, order: usize, delay: usize) -> Result<MmseEqualizer> {
    let h = convolution_matrix(channel, order);
    if delay >= h.ncols() {
        return Err(Error::Config(format!("delay {delay} outside [0, {}]", h.ncols() - 1)));
    }
    let n = order + 1;
    let target: DVector<C64> = h.column(delay).into_owned();
    let normal = &h * h.adjoint() + DMatrix::<C64>::identity(n, n).scale(channel.noise_variance());
    if let Some(ch) = normal.clone().cholesky() {
        let w = ch.solve(&target);
        if w.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Ok(MmseEqualizer { w, regularized: false });
        }
    }
    warn!("singular MMSE normal matrix, loading the diagonal with 1e-12");
    let loaded = normal + DMatrix::<C64>::identity(n, n).scale(1e-12);
    let ch = loaded.cholesky().ok_or_else(|| Error::Factorization("MMSE normal matrix".into()))?;
    Ok(MmseEqualizer { w: ch.solve(&target), regularized: true })
}
