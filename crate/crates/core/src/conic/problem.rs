use serde::{Deserialize, Serialize};

use super::cones::ConeSpec;
use crate::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// explicit zeros dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut t = triplets.to_vec();
        for &(r, c, v) in &t {
            if r >= nrows || c >= ncols {
                return Err(Error::InvalidProblem(format!("entry ({r}, {c}) outside {nrows}x{ncols}")));
            }
            if !v.is_finite() {
                return Err(Error::InvalidProblem(format!("non-finite entry at ({r}, {c})")));
            }
        }
        t.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; nrows + 1];
        let mut col_idx = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *values.last_mut().expect("previous entry") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        let mut m = Self { nrows, ncols, row_ptr, col_idx, values };
        m.drop_zeros();
        Ok(m)
    }

    fn drop_zeros(&mut self) {
        if self.values.iter().all(|&v| v != 0.0) {
            return;
        }
        let mut row_ptr = vec![0; self.nrows + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.values[k] != 0.0 {
                    col_idx.push(self.col_idx[k]);
                    values.push(self.values[k]);
                }
            }
            row_ptr[r + 1] = values.len();
        }
        self.row_ptr = row_ptr;
        self.col_idx = col_idx;
        self.values = values;
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(col, value)` pairs of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.nrows).flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v))).collect()
    }

    /// `out = A x`
    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate().take(self.nrows) {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *o = acc;
        }
    }

    /// `out = A^T y`
    pub fn tr_mul_vec(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (r, &yr) in y.iter().enumerate().take(self.nrows) {
            if yr == 0.0 {
                continue;
            }
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out[self.col_idx[k]] += self.values[k] * yr;
            }
        }
    }

    /// `diag(left) * A * diag(right)` in place.
    pub fn scale(&mut self, left: &[f64], right: &[f64]) {
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                self.values[k] *= left[r] * right[self.col_idx[k]];
            }
        }
    }

    /// Max-abs norm of every row and every column.
    pub fn row_col_inf_norms(&self) -> (Vec<f64>, Vec<f64>) {
        let mut rows = vec![0.0f64; self.nrows];
        let mut cols = vec![0.0f64; self.ncols];
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let a = self.values[k].abs();
                rows[r] = rows[r].max(a);
                let c = self.col_idx[k];
                cols[c] = cols[c].max(a);
            }
        }
        (rows, cols)
    }

    pub fn row_is_empty(&self, r: usize) -> bool {
        self.row_ptr[r] == self.row_ptr[r + 1]
    }
}

/// `min c^T u  s.t.  b - A u = s,  s in K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProblem {
    pub c: Vec<f64>,
    pub a: SparseMatrix,
    pub b: Vec<f64>,
    pub cones: ConeSpec,
}

impl ConicProblem {
    pub fn new(c: Vec<f64>, a: SparseMatrix, b: Vec<f64>, cones: ConeSpec) -> Result<Self> {
        let p = Self { c, a, b, cones };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.cones.validate()?;
        let m = self.cones.dim();
        if self.a.nrows() != m || self.b.len() != m {
            return Err(Error::InvalidProblem(format!(
                "A has {} rows and b has {} entries, cones need {m}",
                self.a.nrows(),
                self.b.len()
            )));
        }
        if self.a.ncols() != self.c.len() {
            return Err(Error::InvalidProblem(format!(
                "A has {} columns, c has {} entries",
                self.a.ncols(),
                self.c.len()
            )));
        }
        if self.c.iter().chain(&self.b).any(|v| !v.is_finite()) {
            return Err(Error::InvalidProblem("non-finite entry in c or b".into()));
        }
        if let Some(r) = self.cones.zero_range().find(|&r| self.a.row_is_empty(r)) {
            return Err(Error::InvalidProblem(format!("zero-cone row {r} of A is empty")));
        }
        Ok(())
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ProblemFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ProblemFile = serde_json::from_str(text)?;
        file.try_into()
    }
}

pub const PROBLEM_FORMAT: &str = "cmsdr-conic-v1";

/// On-disk form of a [`ConicProblem`]:
///
/// ```json
/// { "format": "cmsdr-conic-v1", "n": 2, "m": 3,
///   "c": [..], "b": [..],
///   "A": { "rows": [..], "cols": [..], "values": [..] },
///   "cones": { "zero": 0, "nonneg": 1, "soc": [2], "psd": [] } }
/// ```
///
/// `A` is given as 0-based triplets. PSD slacks use the packed
/// lower-triangular, column-major, `sqrt(2)`-scaled layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemFile {
    pub format: String,
    pub n: usize,
    pub m: usize,
    pub c: Vec<f64>,
    pub b: Vec<f64>,
    #[serde(rename = "A")]
    pub a: Triplets,
    pub cones: ConeSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Triplets {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub values: Vec<f64>,
}

impl From<&ConicProblem> for ProblemFile {
    fn from(p: &ConicProblem) -> Self {
        let t = p.a.triplets();
        ProblemFile {
            format: PROBLEM_FORMAT.to_string(),
            n: p.num_vars(),
            m: p.num_rows(),
            c: p.c.clone(),
            b: p.b.clone(),
            a: Triplets {
                rows: t.iter().map(|e| e.0).collect(),
                cols: t.iter().map(|e| e.1).collect(),
                values: t.iter().map(|e| e.2).collect(),
            },
            cones: p.cones.clone(),
        }
    }
}

impl TryFrom<ProblemFile> for ConicProblem {
    type Error = Error;

    fn try_from(f: ProblemFile) -> Result<Self> {
        if f.format != PROBLEM_FORMAT {
            return Err(Error::InvalidProblem(format!("unknown format {:?}", f.format)));
        }
        if f.c.len() != f.n || f.b.len() != f.m {
            return Err(Error::InvalidProblem("declared n/m disagree with c/b".into()));
        }
        let Triplets { rows, cols, values } = f.a;
        if rows.len() != cols.len() || rows.len() != values.len() {
            return Err(Error::InvalidProblem("triplet arrays differ in length".into()));
        }
        let t: Vec<_> = rows.into_iter().zip(cols).zip(values).map(|((r, c), v)| (r, c, v)).collect();
        let a = SparseMatrix::from_triplets(f.m, f.n, &t)?;
        ConicProblem::new(f.c, a, f.b, f.cones)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_and_multiply() {
        let a = SparseMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (1, 2, 2.0), (0, 0, 1.0), (1, 1, 0.0)]).unwrap();
        assert_eq!(a.nnz(), 2);
        let mut out = vec![0.0; 2];
        a.mul_vec(&[1.0, 5.0, 3.0], &mut out);
        assert_eq!(out, vec![2.0, 6.0]);
        let mut back = vec![0.0; 3];
        a.tr_mul_vec(&[1.0, 1.0], &mut back);
        assert_eq!(back, vec![2.0, 0.0, 2.0]);
        assert!(SparseMatrix::from_triplets(1, 1, &[(1, 0, 1.0)]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let a = SparseMatrix::from_triplets(3, 2, &[(0, 0, 1.0), (1, 1, -1.0), (2, 0, 0.5)]).unwrap();
        let p = ConicProblem::new(vec![1.0, 0.0], a, vec![1.0, 0.0, 2.0], ConeSpec { zero: 1, nonneg: 2, ..Default::default() }).unwrap();
        let back = ConicProblem::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn validation() {
        let a = SparseMatrix::from_triplets(2, 1, &[(1, 0, 1.0)]).unwrap();
        let err = ConicProblem::new(vec![1.0], a.clone(), vec![0.0, 0.0], ConeSpec { zero: 1, nonneg: 1, ..Default::default() });
        assert!(matches!(err, Err(Error::InvalidProblem(_))));
        let err = ConicProblem::new(vec![1.0], a, vec![0.0], ConeSpec { nonneg: 2, ..Default::default() });
        assert!(err.is_err());
    }
}
