//! From a relaxed `W` back to an equalizer, bit decisions and scores.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::signal::{cm_cost_of_output, equalize, ModulationScheme, RegressorSet};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalComponent {
    /// `sqrt(lambda_1) u_1`, first nonzero entry real positive.
    pub vector: DVector<C64>,
    pub eigenvalue: f64,
    /// Set when `W` has no positive eigenvalue and the vector is zero.
    pub is_zero: bool,
}

fn check_hermitian(w: &DMatrix<C64>, tol: f64) -> Result<()> {
    if !w.is_square() {
        return Err(Error::NotHermitian(f64::INFINITY));
    }
    let scale = w.iter().fold(1.0f64, |a, z| a.max(z.norm()));
    let asym = (w - w.adjoint()).iter().fold(0.0f64, |a, z| a.max(z.norm()));
    if asym > tol * scale {
        return Err(Error::NotHermitian(asym));
    }
    Ok(())
}

/// Rotates `v` so its first entry of non-negligible modulus is real
/// positive.
pub fn pin_phase(v: &mut DVector<C64>) {
    let norm = v.norm();
    if norm == 0.0 {
        return;
    }
    if let Some(z) = v.iter().find(|z| z.norm() > 1e-12 * norm) {
        let r = z.conj() / z.norm();
        v.iter_mut().for_each(|x| *x *= r);
    }
}

/// Best rank-one approximation of `W`.
pub fn principal_component(w: &DMatrix<C64>) -> Result<PrincipalComponent> {
    check_hermitian(w, 1e-8)?;
    let h = (w + w.adjoint()).scale(0.5);
    let eig = h.symmetric_eigen();
    let (k, &lambda) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, &f64)>, (i, l)| match best {
            Some((_, b)) if *b >= *l => best,
            _ => Some((i, l)),
        })
        .ok_or(Error::Dimension { expected: 1, got: 0 })?;
    if !(lambda > 0.0) {
        warn!("principal component of a matrix without positive eigenvalues is zero");
        return Ok(PrincipalComponent { vector: DVector::zeros(w.nrows()), eigenvalue: 0.0, is_zero: true });
    }
    let mut v: DVector<C64> = eig.eigenvectors.column(k).into_owned();
    v /= C64::new(v.norm(), 0.0);
    pin_phase(&mut v);
    v *= C64::new(lambda.sqrt(), 0.0);
    Ok(PrincipalComponent { vector: v, eigenvalue: lambda, is_zero: false })
}

/// Gaussian candidates `L g` with `L L^H = W + eps I` and `g` standard
/// circular complex Gaussian, so each candidate has covariance `W + eps I`.
///
/// `eps` starts at `1e-10` and grows tenfold up to `1e-6` if the
/// factorization fails.
pub fn randomize_candidates(w: &DMatrix<C64>, count: usize, seed: u64) -> Result<Vec<DVector<C64>>> {
    if count == 0 {
        return Err(Error::Config("candidate count must be at least 1".into()));
    }
    check_hermitian(w, 1e-8)?;
    let n = w.nrows();
    let h = (w + w.adjoint()).scale(0.5);
    let mut eps = 1e-10;
    let factor = loop {
        let jittered = &h + DMatrix::<C64>::identity(n, n).scale(eps);
        // complex Cholesky takes square roots of negative pivots instead of
        // failing, so a valid factor is recognized by its diagonal
        if let Some(l) = jittered.cholesky().map(|ch| ch.l()) {
            if l.diagonal().iter().all(|d| d.re > 0.0 && d.im.abs() <= 1e-12 * d.re && d.re.is_finite()) {
                break l;
            }
        }
        if eps >= 1e-6 {
            return Err(Error::Randomization(eps));
        }
        eps *= 10.0;
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("finite deviation");
    Ok((0..count)
        .map(|_| {
            let g = DVector::from_fn(n, |_, _| C64::new(normal.sample(&mut rng), normal.sample(&mut rng)));
            &factor * g
        })
        .collect())
}

fn mean_power(y: &[C64]) -> f64 {
    y.iter().map(|v| v.norm_sqr()).sum::<f64>() / y.len() as f64
}

/// Scales `w` so the mean output power over the windows is one.
pub fn power_normalize(w: &DVector<C64>, regs: &RegressorSet) -> Result<DVector<C64>> {
    if regs.is_empty() {
        return Err(Error::EmptyRegressors);
    }
    let p = mean_power(&equalize(w, regs)?);
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::ZeroPower);
    }
    Ok(w / C64::new(p.sqrt(), 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CandidateSource {
    PrincipalComponent,
    Randomized(usize),
    DirectFromBlock,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub w: DVector<C64>,
    pub source: CandidateSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EqualizerEstimate {
    /// Power-normalized equalizer.
    pub w: DVector<C64>,
    pub cm_value: f64,
    pub source: CandidateSource,
}

/// Power-normalizes every candidate and keeps the lowest CM cost; ties go
/// to the earlier candidate. Zero-output candidates are skipped.
pub fn select_best(candidates: &[Candidate], regs: &RegressorSet) -> Result<EqualizerEstimate> {
    if candidates.is_empty() {
        return Err(Error::Config("no candidates to select from".into()));
    }
    let mut best: Option<EqualizerEstimate> = None;
    for cand in candidates {
        let w = match power_normalize(&cand.w, regs) {
            Ok(w) => w,
            Err(Error::ZeroPower) => continue,
            Err(e) => return Err(e),
        };
        let cm_value = cm_cost_of_output(&equalize(&w, regs)?);
        if best.as_ref().is_none_or(|b| cm_value < b.cm_value) {
            best = Some(EqualizerEstimate { w, cm_value, source: cand.source });
        }
    }
    best.ok_or(Error::AllCandidatesZero)
}

/// Nearest Hermitian PSD matrix (eigenvalue clipping). Solver output is
/// only PSD up to its residuals.
pub fn clip_to_psd(w: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    check_hermitian(w, 1e-8)?;
    let eig = ((w + w.adjoint()).scale(0.5)).symmetric_eigen();
    let mut v = eig.eigenvectors.clone();
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        v.column_mut(j).scale_mut(l.max(0.0).sqrt());
    }
    Ok(&v * v.adjoint())
}

/// The default pool: `count` randomized candidates followed by the
/// principal component, both drawn from `W` clipped to the PSD cone.
pub fn candidate_pool(w: &DMatrix<C64>, count: usize, seed: u64) -> Result<Vec<Candidate>> {
    let w = &clip_to_psd(w)?;
    let mut pool: Vec<Candidate> = randomize_candidates(w, count, seed)?
        .into_iter()
        .enumerate()
        .map(|(i, w)| Candidate { w, source: CandidateSource::Randomized(i) })
        .collect();
    pool.push(Candidate { w: principal_component(w)?.vector, source: CandidateSource::PrincipalComponent });
    Ok(pool)
}

/// Slices equalizer outputs. Ties at zero decide bit 1.
pub fn hard_decision(y: &[C64], scheme: ModulationScheme) -> Vec<u8> {
    let bit = |v: f64| u8::from(v >= 0.0);
    match scheme {
        ModulationScheme::Bpsk => y.iter().map(|z| bit(z.re)).collect(),
        ModulationScheme::Qpsk => y.iter().flat_map(|z| [bit(z.re), bit(z.im)]).collect(),
    }
}

/// Removes a common carrier rotation from blind outputs, up to the
/// constellation's own symmetry: `theta = arg(sum y^2) / 2` for BPSK,
/// `arg(-sum y^4) / 4` for QPSK. Returns the rotated outputs and `theta`.
pub fn derotate(y: &[C64], scheme: ModulationScheme) -> (Vec<C64>, f64) {
    let theta = match scheme {
        ModulationScheme::Bpsk => 0.5 * y.iter().map(|z| z * z).sum::<C64>().arg(),
        ModulationScheme::Qpsk => 0.25 * (-y.iter().map(|z| z.powi(4)).sum::<C64>()).arg(),
    };
    let r = C64::from_polar(1.0, -theta);
    (y.iter().map(|z| z * r).collect(), theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub ber: f64,
    /// `decided[i]` is compared with `truth[i - best_delay]`.
    pub best_delay: isize,
    pub sign_flipped: bool,
    pub errors: usize,
    pub compared: usize,
}

fn overlap(decided: usize, truth: usize, delay: isize) -> std::ops::Range<usize> {
    let start = delay.max(0) as usize;
    let end = (truth as isize + delay).clamp(0, decided as isize) as usize;
    start..end.max(start)
}

/// Error count of `decided` against `truth` at one delay, optionally
/// complemented.
pub fn errors_at(decided: &[u8], truth: &[u8], delay: isize, flipped: bool) -> Result<(usize, usize)> {
    let range = overlap(decided.len(), truth.len(), delay);
    if range.is_empty() {
        return Err(Error::EmptyOverlap(delay));
    }
    let flip = u8::from(flipped);
    let errors = range
        .clone()
        .filter(|&i| (decided[i] ^ flip) != truth[(i as isize - delay) as usize])
        .count();
    Ok((errors, range.len()))
}

/// Lowest BER over the given delays and, with `search_sign`, over the
/// complemented decisions. Ties keep the earliest delay and the
/// uncomplemented reading.
pub fn align_and_score(
    decided: &[u8],
    truth: &[u8],
    delays: impl IntoIterator<Item = isize>,
    search_sign: bool,
) -> Result<Alignment> {
    let mut best: Option<Alignment> = None;
    for delay in delays {
        let flips: &[bool] = if search_sign { &[false, true] } else { &[false] };
        for &flipped in flips {
            let (errors, compared) = errors_at(decided, truth, delay, flipped)?;
            let ber = errors as f64 / compared as f64;
            if best.as_ref().is_none_or(|b| ber < b.ber) {
                best = Some(Alignment { ber, best_delay: delay, sign_flipped: flipped, errors, compared });
            }
        }
    }
    best.ok_or_else(|| Error::Config("empty delay range".into()))
}

/// Symbol error rate at a fixed alignment, grouping `bits_per_symbol`
/// consecutive bits. `delay` is counted in bits.
pub fn symbol_error_rate(
    decided: &[u8],
    truth: &[u8],
    delay: isize,
    flipped: bool,
    bits_per_symbol: usize,
) -> Result<f64> {
    let range = overlap(decided.len(), truth.len(), delay);
    if range.is_empty() {
        return Err(Error::EmptyOverlap(delay));
    }
    let flip = u8::from(flipped);
    let k = bits_per_symbol.max(1);
    let mut symbols = 0usize;
    let mut wrong = 0usize;
    let mut i = range.start;
    // start on a symbol boundary of the decided stream
    i += (k - i % k) % k;
    while i + k <= range.end {
        symbols += 1;
        if (i..i + k).any(|b| (decided[b] ^ flip) != truth[(b as isize - delay) as usize]) {
            wrong += 1;
        }
        i += k;
    }
    if symbols == 0 {
        return Err(Error::EmptyOverlap(delay));
    }
    Ok(wrong as f64 / symbols as f64)
}
