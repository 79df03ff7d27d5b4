//! Compiles the constant-modulus SDP and its code-constrained extension into
//! standard-form [`ConicProblem`]s.
//!
//! Complex matrices enter through the real embedding
//! `T(M) = [[Re M, -Im M], [Im M, Re M]]`, for which
//! `tr(X W) = tr(T(X) T(W)) / 2`. The primal vector holds `svec(T(W))`
//! directly; zero-cone rows force the embedding structure (equal diagonal
//! blocks, antisymmetric imaginary part).

use std::ops::Range;

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::conic::{smat, svec, svec_index, svec_len, ConeSpec, ConicProblem, SolverSolution, SparseMatrix};
use crate::gf2::{enumerate_parity_inequalities, ParityCheckMatrix};
use crate::signal::{ModulationScheme, RegressorSet};
use crate::{Error, Result, C64};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// `T(M) = [[Re M, -Im M], [Im M, Re M]]` for Hermitian `M`.
pub fn hermitian_embed(m: &DMatrix<C64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::NotHermitian(f64::INFINITY));
    }
    let scale = m.iter().fold(1.0f64, |a, z| a.max(z.norm()));
    let asym = (m - m.adjoint()).iter().fold(0.0f64, |a, z| a.max(z.norm()));
    if asym > 1e-10 * scale {
        return Err(Error::NotHermitian(asym));
    }
    Ok(embed_unchecked(m))
}

fn embed_unchecked(m: &DMatrix<C64>) -> DMatrix<f64> {
    let q = m.nrows();
    let mut t = DMatrix::zeros(2 * q, 2 * q);
    for i in 0..q {
        for j in 0..q {
            let z = m[(i, j)];
            t[(i, j)] = z.re;
            t[(q + i, q + j)] = z.re;
            t[(q + i, j)] = z.im;
            t[(i, q + j)] = -z.im;
        }
    }
    t
}

/// Inverse of [`hermitian_embed`]: averages the two copies of `Re M`, takes
/// the antisymmetric part of the `Im M` blocks, and returns a Hermitian
/// matrix.
pub fn hermitian_unembed(t: &DMatrix<f64>) -> Result<DMatrix<C64>> {
    let p = t.nrows();
    if !t.is_square() || !p.is_multiple_of(2) {
        return Err(Error::Dimension { expected: p + p % 2, got: p });
    }
    let q = p / 2;
    let mut m = DMatrix::from_element(q, q, C64::new(0.0, 0.0));
    for i in 0..q {
        for j in 0..q {
            let re = 0.25 * (t[(i, j)] + t[(j, i)] + t[(q + i, q + j)] + t[(q + j, q + i)]);
            let im = 0.25 * (t[(q + i, j)] + t[(j, q + i)] - t[(q + j, i)] - t[(i, q + j)]);
            m[(i, j)] = C64::new(re, im);
        }
    }
    Ok(m)
}

/// `[[W, w], [w^H, 1]]`.
pub fn bordered_matrix(w_mat: &DMatrix<C64>, w: &DVector<C64>) -> DMatrix<C64> {
    let q = w.len();
    let mut m = DMatrix::from_element(q + 1, q + 1, C64::new(0.0, 0.0));
    m.view_mut((0, 0), (q, q)).copy_from(w_mat);
    for i in 0..q {
        m[(i, q)] = w[i];
        m[(q, i)] = w[i].conj();
    }
    m[(q, q)] = C64::new(1.0, 0.0);
    m
}

/// Where each named variable lives inside the primal vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableLayout {
    /// Equalizer taps `L + 1`.
    pub taps: usize,
    /// `svec(T(W))`, side `2 (L + 1)`.
    pub w_matrix: Range<usize>,
    /// `[Re w; Im w]`, code model only.
    pub w_vector: Option<Range<usize>>,
    /// One per window.
    pub tau: Range<usize>,
    /// One per paired window, code model only.
    pub t: Option<Range<usize>>,
    /// Window index of each `t` entry.
    #[serde(default)]
    pub t_windows: Vec<usize>,
    /// One per frame bit, code model only.
    pub f: Option<Range<usize>>,
    pub total: usize,
}

impl VariableLayout {
    /// Assembles a primal vector from named values. Missing optional blocks
    /// must be `None` exactly when the layout lacks them.
    pub fn pack(
        &self,
        w_mat: &DMatrix<C64>,
        w: Option<&DVector<C64>>,
        tau: &[f64],
        t: Option<&[f64]>,
        f: Option<&[f64]>,
    ) -> Result<Vec<f64>> {
        let mut u = vec![0.0; self.total];
        if w_mat.nrows() != self.taps {
            return Err(Error::Dimension { expected: self.taps, got: w_mat.nrows() });
        }
        u[self.w_matrix.clone()].copy_from_slice(&svec(&hermitian_embed(w_mat)?));
        let put = |u: &mut Vec<f64>, range: &Range<usize>, v: &[f64]| -> Result<()> {
            if v.len() != range.len() {
                return Err(Error::Dimension { expected: range.len(), got: v.len() });
            }
            u[range.clone()].copy_from_slice(v);
            Ok(())
        };
        put(&mut u, &self.tau, tau)?;
        match (&self.w_vector, w) {
            (Some(r), Some(w)) => {
                let v: Vec<f64> = w.iter().map(|z| z.re).chain(w.iter().map(|z| z.im)).collect();
                put(&mut u, r, &v)?;
            }
            (None, None) => {}
            _ => return Err(Error::Config("w block does not match the layout".into())),
        }
        match (&self.t, t) {
            (Some(r), Some(v)) => put(&mut u, r, v)?,
            (None, None) => {}
            _ => return Err(Error::Config("t block does not match the layout".into())),
        }
        match (&self.f, f) {
            (Some(r), Some(v)) => put(&mut u, r, v)?,
            (None, None) => {}
            _ => return Err(Error::Config("f block does not match the layout".into())),
        }
        Ok(u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FormulationParams {
    /// Weight on the squeezing slacks `sum t_n`.
    pub squeeze_weight: f64,
    /// Largest check degree whose parity inequalities are enumerated.
    pub d_max: usize,
}

impl Default for FormulationParams {
    fn default() -> Self {
        Self { squeeze_weight: 1.0, d_max: crate::gf2::DEFAULT_D_MAX }
    }
}

/// Rows of a problem under construction, grouped by cone.
#[derive(Default)]
struct RowSet {
    rows: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
}

impl RowSet {
    fn push(&mut self, coeffs: Vec<(usize, f64)>, b: f64) {
        self.rows.push(coeffs);
        self.b.push(b);
    }

    fn len(&self) -> usize {
        self.b.len()
    }
}

struct Builder {
    n: usize,
    zero: RowSet,
    nonneg: RowSet,
    soc: Vec<RowSet>,
    psd: Vec<(usize, RowSet)>,
}

impl Builder {
    fn finish(self, c: Vec<f64>) -> Result<ConicProblem> {
        let mut triplets = Vec::new();
        let mut b = Vec::new();
        let mut cones = ConeSpec { zero: self.zero.len(), nonneg: self.nonneg.len(), ..Default::default() };
        let mut all = vec![self.zero, self.nonneg];
        for s in self.soc {
            cones.soc.push(s.len());
            all.push(s);
        }
        for (side, s) in self.psd {
            cones.psd.push(side);
            all.push(s);
        }
        for set in all {
            for (row, rb) in set.rows.into_iter().zip(set.b) {
                let r = b.len();
                triplets.extend(row.into_iter().map(|(col, v)| (r, col, v)));
                b.push(rb);
            }
        }
        let a = SparseMatrix::from_triplets(b.len(), self.n, &triplets)?;
        ConicProblem::new(c, a, b, cones)
    }
}

/// `(1/2) svec(T(X))` paired with the column offset of `svec(T(W))`.
fn trace_row(x: &DMatrix<C64>, offset: usize, sign: f64) -> Vec<(usize, f64)> {
    svec(&embed_unchecked(x))
        .into_iter()
        .enumerate()
        .filter(|(_, v)| *v != 0.0)
        .map(|(k, v)| (offset + k, sign * 0.5 * v))
        .collect()
}

/// Zero-cone rows forcing `svec(T(W))` to be a valid embedding.
fn embedding_rows(q: usize, offset: usize, rows: &mut RowSet) {
    let p = 2 * q;
    let at = |i: usize, j: usize| offset + svec_index(p, i, j);
    for j in 0..q {
        for i in j..q {
            rows.push(vec![(at(i, j), 1.0), (at(q + i, q + j), -1.0)], 0.0);
        }
    }
    for j in 0..q {
        for i in j + 1..q {
            rows.push(vec![(at(q + i, j), 1.0), (at(q + j, i), 1.0)], 0.0);
        }
    }
    for i in 0..q {
        rows.push(vec![(at(q + i, i), 1.0)], 0.0);
    }
}

/// The two CM inequality families: `tr(X_n W) - tau_n <= 1` and
/// `tr(X_n W) + tau_n >= 1`.
fn cm_rows(regs: &RegressorSet, w_off: usize, tau: &Range<usize>, rows: &mut RowSet) {
    for (n, x) in regs.rank1().iter().enumerate() {
        let mut upper = trace_row(x, w_off, 1.0);
        upper.push((tau.start + n, -1.0));
        rows.push(upper, 1.0);
        let mut lower = trace_row(x, w_off, -1.0);
        lower.push((tau.start + n, -1.0));
        rows.push(lower, -1.0);
    }
}

fn warn_sample_size(regs: &RegressorSet) {
    let q = regs.taps();
    if regs.len() < 4 * q * q {
        warn!(
            "{} windows for {q} taps (fewer than 4(L+1)^2 = {}): the relaxation may have a flat optimal face",
            regs.len(),
            4 * q * q
        );
    }
}

/// The plain constant-modulus SDP over `W` and `tau`.
pub fn build_basic_cm_sdp(regs: &RegressorSet) -> Result<(ConicProblem, VariableLayout)> {
    if regs.is_empty() {
        return Err(Error::EmptyRegressors);
    }
    warn_sample_size(regs);
    let q = regs.taps();
    let p = 2 * q;
    let nw = svec_len(p);
    let big_n = regs.len();
    let layout = VariableLayout {
        taps: q,
        w_matrix: 0..nw,
        w_vector: None,
        tau: nw..nw + big_n,
        t: None,
        t_windows: Vec::new(),
        f: None,
        total: nw + big_n,
    };
    let mut bld = Builder { n: layout.total, zero: RowSet::default(), nonneg: RowSet::default(), soc: vec![], psd: vec![] };
    embedding_rows(q, 0, &mut bld.zero);
    cm_rows(regs, 0, &layout.tau, &mut bld.nonneg);
    let mut psd = RowSet::default();
    for k in 0..nw {
        psd.push(vec![(k, -1.0)], 0.0);
    }
    bld.psd.push((p, psd));

    let mut c = vec![0.0; layout.total];
    c[layout.tau.clone()].fill(1.0 / big_n as f64);
    Ok((bld.finish(c)?, layout))
}

/// The code-constrained model: CM rows, the bordered PSD block
/// `[[W, w], [w^H, 1]]`, one squeezing SOC `|w^H x_n - (2 f - 1)| <= t_n`
/// per paired window, and the parity-polytope and box rows on `f`.
///
/// The frame may hold several consecutive codewords of `h`; `f` covers
/// every frame bit and the parity rows repeat per codeword.
pub fn build_code_cm_sdp(
    regs: &RegressorSet,
    h: &ParityCheckMatrix,
    params: &FormulationParams,
    scheme: ModulationScheme,
) -> Result<(ConicProblem, VariableLayout)> {
    if scheme != ModulationScheme::Bpsk {
        return Err(Error::UnsupportedModulation);
    }
    if regs.is_empty() {
        return Err(Error::EmptyRegressors);
    }
    if !(params.squeeze_weight > 0.0) || !params.squeeze_weight.is_finite() {
        return Err(Error::Config(format!("squeeze weight must be positive, got {}", params.squeeze_weight)));
    }
    let n_code = h.cols();
    let frame = regs.frame_len();
    if !frame.is_multiple_of(n_code) {
        return Err(Error::Config(format!("frame of {frame} bits is not a whole number of length-{n_code} codewords")));
    }
    let inequalities = enumerate_parity_inequalities(h, params.d_max)?;
    warn_sample_size(regs);

    let q = regs.taps();
    let p = 2 * q;
    let nw = svec_len(p);
    let big_n = regs.len();
    let pairs: Vec<(usize, usize)> = regs.pairs().collect();
    let wv = nw..nw + p;
    let tau = wv.end..wv.end + big_n;
    let t = tau.end..tau.end + pairs.len();
    let f = t.end..t.end + frame;
    let layout = VariableLayout {
        taps: q,
        w_matrix: 0..nw,
        w_vector: Some(wv.clone()),
        tau: tau.clone(),
        t: Some(t.clone()),
        t_windows: pairs.iter().map(|&(w, _)| w).collect(),
        f: Some(f.clone()),
        total: f.end,
    };

    let mut bld = Builder { n: layout.total, zero: RowSet::default(), nonneg: RowSet::default(), soc: vec![], psd: vec![] };
    embedding_rows(q, 0, &mut bld.zero);
    cm_rows(regs, 0, &tau, &mut bld.nonneg);

    for block in 0..frame / n_code {
        let base = f.start + block * n_code;
        for ineq in &inequalities {
            let mut row: Vec<(usize, f64)> = ineq.positive.iter().map(|&v| (base + v, 1.0)).collect();
            row.extend(ineq.negative.iter().map(|&v| (base + v, -1.0)));
            bld.nonneg.push(row, ineq.rhs());
        }
    }
    for k in f.clone() {
        bld.nonneg.push(vec![(k, -1.0)], 0.0);
        bld.nonneg.push(vec![(k, 1.0)], 1.0);
    }

    // (t_n, Re(w^H x_n) - (2 f - 1), Im(w^H x_n)) in SOC(3), with
    // w^H x = sum (a - jb)(c + jd) = sum (ac + bd) + j (ad - bc).
    for (k, &(win, bit)) in pairs.iter().enumerate() {
        let x = &regs.windows()[win];
        let mut soc = RowSet::default();
        soc.push(vec![(t.start + k, -1.0)], 0.0);
        let mut re = Vec::with_capacity(p + 1);
        let mut im = Vec::with_capacity(p);
        for (i, xi) in x.iter().enumerate() {
            re.push((wv.start + i, -xi.re));
            re.push((wv.start + q + i, -xi.im));
            im.push((wv.start + i, -xi.im));
            im.push((wv.start + q + i, xi.re));
        }
        re.push((f.start + bit, 2.0));
        soc.push(re, 1.0);
        soc.push(im, 0.0);
        bld.soc.push(soc);
    }

    let side = 2 * (q + 1);
    let mut psd = RowSet::default();
    for j in 0..side {
        for i in j..side {
            let scale = if i == j { 1.0 } else { SQRT_2 };
            let (bi, ai) = (i / (q + 1), i % (q + 1));
            let (bj, aj) = (j / (q + 1), j % (q + 1));
            if ai < q && aj < q {
                let (r, c) = (bi * q + ai, bj * q + aj);
                let (r, c) = if r >= c { (r, c) } else { (c, r) };
                psd.push(vec![(svec_index(p, r, c), -1.0)], 0.0);
            } else if ai == q && aj == q {
                psd.push(vec![], if bi == bj { 1.0 } else { 0.0 });
            } else {
                // one index on the border: entry is +-Re w[a] or +-Im w[a]
                let (a, border_row) = if ai == q { (aj, true) } else { (ai, false) };
                let (var, sign) = match (bi, bj) {
                    (0, 0) | (1, 1) => (wv.start + a, 1.0),
                    // T(M)[(1,ai),(0,aj)] = Im M[ai, aj]
                    (1, 0) => (wv.start + q + a, if border_row { -1.0 } else { 1.0 }),
                    _ => (wv.start + q + a, if border_row { 1.0 } else { -1.0 }),
                };
                psd.push(vec![(var, -scale * sign)], 0.0);
            }
        }
    }
    bld.psd.push((side, psd));

    let mut c = vec![0.0; layout.total];
    c[tau].fill(1.0 / big_n as f64);
    c[t].fill(params.squeeze_weight);
    Ok((bld.finish(c)?, layout))
}

/// Named view of a relaxed solution.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedSolution {
    pub w_matrix: DMatrix<C64>,
    pub w: Option<DVector<C64>>,
    pub f: Option<Vec<f64>>,
    pub t: Option<Vec<f64>>,
    pub tau: Vec<f64>,
    pub objective: f64,
}

/// Maps a primal vector back to `W`, `w`, `f`. `f` is clipped to `[0, 1]`.
pub fn extract_solution(sol: &SolverSolution, layout: &VariableLayout) -> Result<RelaxedSolution> {
    let mut r = extract_vector(&sol.x, layout)?;
    r.objective = sol.primal_objective;
    Ok(r)
}

/// Like [`extract_solution`] for a bare primal vector; the objective is left
/// at zero.
pub fn extract_vector(u: &[f64], layout: &VariableLayout) -> Result<RelaxedSolution> {
    if u.len() != layout.total {
        return Err(Error::Dimension { expected: layout.total, got: u.len() });
    }
    let q = layout.taps;
    let t_w = smat(&u[layout.w_matrix.clone()], 2 * q);
    let w_matrix = hermitian_unembed(&t_w)?;
    let w = layout.w_vector.as_ref().map(|r| {
        let v = &u[r.clone()];
        DVector::from_iterator(q, (0..q).map(|i| C64::new(v[i], v[q + i])))
    });
    let f = layout.f.as_ref().map(|r| u[r.clone()].iter().map(|&v| clip_unit(v)).collect());
    let t = layout.t.as_ref().map(|r| u[r.clone()].to_vec());
    Ok(RelaxedSolution { w_matrix, w, f, t, tau: u[layout.tau.clone()].to_vec(), objective: 0.0 })
}

fn clip_unit(v: f64) -> f64 {
    if !(-1e-6..=1.0 + 1e-6).contains(&v) {
        warn!("relaxed bit {v} lies outside [0, 1] by more than 1e-6");
    }
    v.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::project_cone;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, q: usize) -> DMatrix<C64> {
        let a = DMatrix::from_fn(q, q, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        &a + a.adjoint()
    }

    #[test]
    fn embedding_examples() {
        let m = DMatrix::from_element(1, 1, c(2.0));
        assert_eq!(hermitian_embed(&m).unwrap(), DMatrix::from_diagonal_element(2, 2, 2.0));
        let x = hermitian_embed(&DMatrix::from_element(1, 1, c(2.0))).unwrap();
        let w = hermitian_embed(&DMatrix::from_element(1, 1, c(3.0))).unwrap();
        assert_eq!(0.5 * (&x * &w).trace(), 6.0);
        let bad = DMatrix::from_row_slice(2, 2, &[c(1.0), C64::new(0.0, 1.0), C64::new(0.0, 1.0), c(1.0)]);
        assert!(matches!(hermitian_embed(&bad), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn embedding_round_trip_and_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let m = random_hermitian(&mut rng, 4);
            let t = hermitian_embed(&m).unwrap();
            assert!((&t - t.transpose()).norm() == 0.0);
            let back = hermitian_unembed(&t).unwrap();
            assert!((back - &m).norm() <= 1e-12);
            let mut ev_m: Vec<f64> = m.clone().symmetric_eigenvalues().iter().flat_map(|&l| [l, l]).collect();
            let mut ev_t: Vec<f64> = t.symmetric_eigenvalues().iter().copied().collect();
            ev_m.sort_by(f64::total_cmp);
            ev_t.sort_by(f64::total_cmp);
            for (a, b) in ev_m.iter().zip(&ev_t) {
                assert!((a - b).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn clip_examples() {
        assert_eq!(clip_unit(1.0000003), 1.0);
        assert_eq!(clip_unit(-2e-7), 0.0);
        assert_eq!(clip_unit(0.25), 0.25);
    }

    fn regs_from(received: &[C64], order: usize, delay: usize, frame: usize) -> RegressorSet {
        crate::signal::build_regressors(received, order, delay, frame).unwrap()
    }

    #[test]
    fn basic_layout_and_bookkeeping() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rx: Vec<C64> = (0..20).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let regs = regs_from(&rx, 2, 1, 19);
        let (p, layout) = build_basic_cm_sdp(&regs).unwrap();
        let q = 3;
        assert_eq!(layout.w_matrix, 0..svec_len(6));
        assert_eq!(layout.tau.len(), regs.len());
        assert_eq!(layout.total, p.num_vars());
        assert_eq!(p.cones.zero, q * q + q);
        assert_eq!(p.cones.nonneg, 2 * regs.len());
        assert_eq!(p.cones.psd, vec![6]);
        assert!(layout.w_vector.is_none() && layout.f.is_none() && layout.t.is_none());
        assert!(matches!(build_basic_cm_sdp(&regs_from(&rx[..3], 2, 0, 3)).map(|_| ()), Ok(())));
    }

    /// Compiled trace rows agree with `tr(X_n W)` evaluated directly.
    #[test]
    fn compiled_rows_match_direct_traces() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rx: Vec<C64> = (0..30).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let regs = regs_from(&rx, 3, 0, 30);
        let (p, layout) = build_basic_cm_sdp(&regs).unwrap();
        let w = random_hermitian(&mut rng, 4);
        let tau = vec![0.0; regs.len()];
        let u = layout.pack(&w, None, &tau, None, None).unwrap();
        let mut au = vec![0.0; p.num_rows()];
        p.a.mul_vec(&u, &mut au);
        let nn = p.cones.zero;
        for (n, x) in regs.rank1().iter().enumerate() {
            let direct = (x * &w).trace();
            assert!(direct.im.abs() < 1e-10);
            // row 2n: b - Au = 1 - tr(XW) + tau
            assert!((au[nn + 2 * n] - direct.re).abs() <= 1e-10);
            assert!((au[nn + 2 * n + 1] + direct.re).abs() <= 1e-10);
        }
        // zero-cone rows vanish on a valid embedding
        assert!(au[..nn].iter().all(|v| v.abs() < 1e-12));
    }

    fn bpsk_identity_frame(bits: &[u8], order: usize) -> RegressorSet {
        let s = crate::signal::modulate(bits, ModulationScheme::Bpsk).unwrap();
        regs_from(&s, order, 0, bits.len())
    }

    fn tiny_code() -> ParityCheckMatrix {
        ParityCheckMatrix::from_dense(&[vec![1, 1, 1, 0], vec![0, 1, 1, 1]]).unwrap()
    }

    #[test]
    fn code_model_bookkeeping_single_codeword() {
        let h = crate::gf2::generate_asymmetric_code(24, 12, 3, 1).unwrap();
        let cw = h.encode(&[1, 0, 1, 1, 0, 0, 1, 0, 1, 1, 1, 0]).unwrap();
        let regs = bpsk_identity_frame(&cw, 0);
        assert_eq!(regs.pairs().count(), 24);
        let (p, layout) = build_code_cm_sdp(&regs, &h, &FormulationParams::default(), ModulationScheme::Bpsk).unwrap();
        assert_eq!(p.cones.soc, vec![3; 24]);
        let parity: usize = h.row_degrees().iter().map(|&d| 1usize << (d - 1)).sum();
        assert_eq!(parity, 48);
        assert_eq!(p.cones.nonneg, 2 * regs.len() + parity + 48);
        assert_eq!(p.cones.psd, vec![4]);
        assert_eq!(layout.f.as_ref().unwrap().len(), 24);
        assert_eq!(layout.t.as_ref().unwrap().len(), 24);
    }

    #[test]
    fn code_model_bookkeeping_three_codewords() {
        let h = crate::gf2::generate_asymmetric_code(24, 12, 3, 2).unwrap();
        let mut bits = Vec::new();
        for k in 0..3u8 {
            bits.extend(h.encode(&[k & 1, 1, 0, 1, 0, 0, 1, 1, 0, 1, 0, k >> 1]).unwrap());
        }
        let regs = regs_from(&crate::signal::modulate(&bits, ModulationScheme::Bpsk).unwrap(), 2, 1, 72);
        let (p, layout) = build_code_cm_sdp(&regs, &h, &FormulationParams::default(), ModulationScheme::Bpsk).unwrap();
        let paired = regs.pairs().count();
        assert_eq!(regs.len(), 70);
        assert_eq!(paired, 70);
        assert_eq!(p.cones.soc.len(), paired);
        assert_eq!(p.cones.nonneg, 2 * 70 + 3 * 48 + 2 * 72);
        assert_eq!(p.cones.psd, vec![8]);
        assert_eq!(layout.f.unwrap().len(), 72);
    }

    #[test]
    fn code_model_errors() {
        let h = tiny_code();
        let regs = bpsk_identity_frame(&[0, 0, 0, 0], 0);
        assert!(matches!(
            build_code_cm_sdp(&regs, &h, &FormulationParams::default(), ModulationScheme::Qpsk),
            Err(Error::UnsupportedModulation)
        ));
        let params = FormulationParams { d_max: 2, ..Default::default() };
        assert!(matches!(build_code_cm_sdp(&regs, &h, &params, ModulationScheme::Bpsk), Err(Error::CheckDegree { .. })));
        let odd = bpsk_identity_frame(&[0, 0, 0, 0, 0], 0);
        assert!(build_code_cm_sdp(&odd, &h, &FormulationParams::default(), ModulationScheme::Bpsk).is_err());
    }

    /// Slack of the true point lies in every cone.
    #[test]
    fn truth_is_feasible() {
        let h = crate::gf2::generate_asymmetric_code(24, 12, 3, 4).unwrap();
        let cw = h.encode(&[0, 1, 1, 0, 1, 0, 0, 1, 1, 1, 0, 1]).unwrap();
        let regs = bpsk_identity_frame(&cw, 1);
        let (p, layout) = build_code_cm_sdp(&regs, &h, &FormulationParams::default(), ModulationScheme::Bpsk).unwrap();
        let w = DVector::from_vec(vec![c(1.0), c(0.0)]);
        let w_mat = &w * w.adjoint();
        let tau = vec![0.0; regs.len()];
        let t = vec![0.0; layout.t.as_ref().unwrap().len()];
        let f: Vec<f64> = cw.iter().map(|&b| b as f64).collect();
        let u = layout.pack(&w_mat, Some(&w), &tau, Some(&t), Some(&f)).unwrap();
        let mut s = vec![0.0; p.num_rows()];
        p.a.mul_vec(&u, &mut s);
        for (si, bi) in s.iter_mut().zip(&p.b) {
            *si = bi - *si;
        }
        // zero block must be exactly zero, the rest already inside K
        assert!(s[..p.cones.zero].iter().all(|v| v.abs() < 1e-12));
        let proj = project_cone(&s, &p.cones).unwrap();
        let gap = s.iter().zip(&proj).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(gap < 1e-9, "slack leaves the cone by {gap}");
        let obj: f64 = p.c.iter().zip(&u).map(|(a, b)| a * b).sum();
        assert_eq!(obj, 0.0);
    }

    /// The bordered PSD slack equals `svec(T([[W, w], [w^H, 1]]))`.
    #[test]
    fn bordered_block_matches_embedding() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = tiny_code();
        let regs = bpsk_identity_frame(&[1, 1, 1, 1, 0, 0, 0, 0], 2);
        let (p, layout) = build_code_cm_sdp(&regs, &h, &FormulationParams::default(), ModulationScheme::Bpsk).unwrap();
        let w_mat = random_hermitian(&mut rng, 3);
        let w = DVector::from_fn(3, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let u = layout
            .pack(
                &w_mat,
                Some(&w),
                &vec![0.0; layout.tau.len()],
                Some(&vec![0.0; layout.t.as_ref().unwrap().len()]),
                Some(&[0.0; 8]),
            )
            .unwrap();
        let mut au = vec![0.0; p.num_rows()];
        p.a.mul_vec(&u, &mut au);
        let side = 8;
        let start = p.num_rows() - svec_len(side);
        let slack: Vec<f64> = (start..p.num_rows()).map(|r| p.b[r] - au[r]).collect();
        let expected = svec(&embed_unchecked(&bordered_matrix(&w_mat, &w)));
        for (a, b) in slack.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn extract_round_trip_and_layout_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let rx: Vec<C64> = (0..10).map(|_| C64::new(rng.random_range(-1.0..1.0), 0.0)).collect();
        let regs = regs_from(&rx, 1, 0, 10);
        let (_, layout) = build_basic_cm_sdp(&regs).unwrap();
        let w = random_hermitian(&mut rng, 2);
        let u = layout.pack(&w, None, &vec![0.5; regs.len()], None, None).unwrap();
        let r = extract_vector(&u, &layout).unwrap();
        assert!((r.w_matrix - w).norm() <= 1e-12);
        assert!(r.w.is_none() && r.f.is_none());
        assert!(extract_vector(&u[1..], &layout).is_err());
    }
}
