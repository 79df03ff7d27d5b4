use std::ops::Range;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Product cone `K = {0}^z x R_+^l x SOC(q_1) x .. x PSD(p_1) x ..`, laid
/// out in that order along the slack vector.
///
/// SOC blocks are `(t, x)` with `||x|| <= t`. PSD blocks hold a real
/// symmetric matrix of the given side in scaled lower-triangular packed
/// form (see [`svec`]).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeSpec {
    #[serde(default)]
    pub zero: usize,
    #[serde(default)]
    pub nonneg: usize,
    #[serde(default)]
    pub soc: Vec<usize>,
    #[serde(default)]
    pub psd: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeKind {
    Zero,
    Nonnegative,
    SecondOrder,
    /// Packed PSD block with the given side length.
    Psd(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConeBlock {
    pub kind: ConeKind,
    pub range: Range<usize>,
}

/// Packed length of a symmetric matrix of side `n`.
pub const fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

impl ConeSpec {
    pub fn dim(&self) -> usize {
        self.zero + self.nonneg + self.soc.iter().sum::<usize>() + self.psd.iter().map(|&p| svec_len(p)).sum::<usize>()
    }

    pub fn validate(&self) -> Result<()> {
        if self.soc.contains(&0) {
            return Err(Error::InvalidProblem("second-order cone of dimension 0".into()));
        }
        if self.psd.contains(&0) {
            return Err(Error::InvalidProblem("PSD cone of side 0".into()));
        }
        Ok(())
    }

    /// Blocks in slack order. Zero and nonnegative parts are single blocks
    /// (omitted when empty).
    pub fn blocks(&self) -> Vec<ConeBlock> {
        let mut out = Vec::new();
        let mut at = 0;
        let mut push = |kind, len: usize| {
            out.push(ConeBlock { kind, range: at..at + len });
            at += len;
        };
        if self.zero > 0 {
            push(ConeKind::Zero, self.zero);
        }
        if self.nonneg > 0 {
            push(ConeKind::Nonnegative, self.nonneg);
        }
        for &q in &self.soc {
            push(ConeKind::SecondOrder, q);
        }
        for &p in &self.psd {
            push(ConeKind::Psd(p), svec_len(p));
        }
        out
    }

    /// Range of the zero-cone rows.
    pub fn zero_range(&self) -> Range<usize> {
        0..self.zero
    }
}

/// Euclidean projection onto `K`.
pub fn project_cone(v: &[f64], cones: &ConeSpec) -> Result<Vec<f64>> {
    if v.len() != cones.dim() {
        return Err(Error::Dimension { expected: cones.dim(), got: v.len() });
    }
    cones.validate()?;
    let mut out = v.to_vec();
    project_in_place(&mut out, &cones.blocks());
    Ok(out)
}

/// Euclidean projection onto the dual cone `K*` (free on the zero block,
/// every other block is self-dual).
pub fn project_dual_cone(v: &[f64], cones: &ConeSpec) -> Result<Vec<f64>> {
    if v.len() != cones.dim() {
        return Err(Error::Dimension { expected: cones.dim(), got: v.len() });
    }
    let mut out = v.to_vec();
    let blocks: Vec<ConeBlock> = cones.blocks().into_iter().filter(|b| b.kind != ConeKind::Zero).collect();
    project_in_place(&mut out, &blocks);
    Ok(out)
}

pub(crate) fn project_in_place(v: &mut [f64], blocks: &[ConeBlock]) {
    for block in blocks {
        let part = &mut v[block.range.clone()];
        match block.kind {
            ConeKind::Zero => part.fill(0.0),
            ConeKind::Nonnegative => part.iter_mut().for_each(|x| *x = x.max(0.0)),
            ConeKind::SecondOrder => project_soc(part),
            ConeKind::Psd(side) => project_psd(part, side),
        }
    }
}

fn project_soc(v: &mut [f64]) {
    let t = v[0];
    let norm = v[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= t {
        return;
    }
    if norm <= -t {
        v.fill(0.0);
        return;
    }
    let a = 0.5 * (t + norm);
    v[0] = a;
    let k = a / norm;
    v[1..].iter_mut().for_each(|x| *x *= k);
}

fn project_psd(v: &mut [f64], side: usize) {
    let m = smat(v, side);
    let eig = SymmetricEigen::new(m);
    if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
        return;
    }
    let mut q = eig.eigenvectors;
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        let s = l.max(0.0).sqrt();
        q.column_mut(j).scale_mut(s);
    }
    let p = &q * q.transpose();
    v.copy_from_slice(&svec(&p));
}

/// Index of entry `(i, j)`, `i >= j`, in the packed lower triangle
/// (column-major).
#[inline]
pub fn svec_index(side: usize, i: usize, j: usize) -> usize {
    debug_assert!(i >= j && i < side);
    j * (2 * side - j + 1) / 2 + (i - j)
}

/// Packs the lower triangle column by column, off-diagonals scaled by
/// `sqrt(2)` so that `<svec(A), svec(B)> = tr(AB)`.
pub fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(svec_len(n));
    for j in 0..n {
        out.push(m[(j, j)]);
        for i in j + 1..n {
            out.push(std::f64::consts::SQRT_2 * 0.5 * (m[(i, j)] + m[(j, i)]));
        }
    }
    out
}

/// Inverse of [`svec`].
pub fn smat(v: &[f64], side: usize) -> DMatrix<f64> {
    debug_assert_eq!(v.len(), svec_len(side));
    let mut m = DMatrix::zeros(side, side);
    let mut k = 0;
    for j in 0..side {
        m[(j, j)] = v[k];
        k += 1;
        for i in j + 1..side {
            let x = v[k] * std::f64::consts::FRAC_1_SQRT_2;
            m[(i, j)] = x;
            m[(j, i)] = x;
            k += 1;
        }
    }
    m
}
