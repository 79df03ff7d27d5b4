//! Binary parity-check codes: alist I/O, GF(2) elimination and systematic
//! encoding, the asymmetry test, and the parity-polytope inequalities used
//! to relax code membership.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default cap on check degree for inequality enumeration (256 rows/check).
pub const DEFAULT_D_MAX: usize = 8;

/// Sparse binary parity-check matrix stored as check and variable adjacency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityCheckMatrix {
    n_cols: usize,
    checks: Vec<Vec<usize>>,
    vars: Vec<Vec<usize>>,
}

impl ParityCheckMatrix {
    /// Builds a matrix from the column indices (0-based) of each row.
    pub fn from_checks(n_cols: usize, checks: Vec<Vec<usize>>) -> Result<Self> {
        if checks.is_empty() || n_cols == 0 {
            return Err(Error::InvalidMatrix("matrix has no rows or no columns".into()));
        }
        let mut vars = vec![Vec::new(); n_cols];
        let mut sorted = Vec::with_capacity(checks.len());
        for (m, mut row) in checks.into_iter().enumerate() {
            row.sort_unstable();
            if row.is_empty() {
                return Err(Error::InvalidMatrix(format!("row {m} is all zero")));
            }
            if row.windows(2).any(|p| p[0] == p[1]) {
                return Err(Error::InvalidMatrix(format!("row {m} repeats a column")));
            }
            if let Some(&last) = row.last() {
                if last >= n_cols {
                    return Err(Error::InvalidMatrix(format!(
                        "row {m} references column {last} of {n_cols}"
                    )));
                }
            }
            for &n in &row {
                vars[n].push(m);
            }
            sorted.push(row);
        }
        if let Some(n) = vars.iter().position(|v| v.is_empty()) {
            return Err(Error::InvalidMatrix(format!("column {n} is all zero")));
        }
        Ok(Self { n_cols, checks: sorted, vars })
    }

    /// Builds a matrix from dense 0/1 rows.
    pub fn from_dense(rows: &[Vec<u8>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::InvalidMatrix("ragged dense rows".into()));
        }
        let checks = rows
            .iter()
            .map(|r| r.iter().enumerate().filter(|(_, &v)| v != 0).map(|(j, _)| j).collect())
            .collect();
        Self::from_checks(n_cols, checks)
    }

    pub fn rows(&self) -> usize {
        self.checks.len()
    }

    pub fn cols(&self) -> usize {
        self.n_cols
    }

    /// Column indices of check `m` (the neighbourhood `N_m`), sorted.
    pub fn check_neighborhood(&self, m: usize) -> &[usize] {
        &self.checks[m]
    }

    pub fn check_neighborhoods(&self) -> &[Vec<usize>] {
        &self.checks
    }

    /// Checks touching variable `n`.
    pub fn variable_neighborhood(&self, n: usize) -> &[usize] {
        &self.vars[n]
    }

    pub fn row_degrees(&self) -> Vec<usize> {
        self.checks.iter().map(Vec::len).collect()
    }

    pub fn col_degrees(&self) -> Vec<usize> {
        self.vars.iter().map(Vec::len).collect()
    }

    pub fn nnz(&self) -> usize {
        self.checks.iter().map(Vec::len).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<u8>> {
        self.checks
            .iter()
            .map(|row| {
                let mut d = vec![0u8; self.n_cols];
                for &j in row {
                    d[j] = 1;
                }
                d
            })
            .collect()
    }

    fn check_len(&self, bits: &[u8]) -> Result<()> {
        if bits.len() != self.n_cols {
            return Err(Error::Dimension { expected: self.n_cols, got: bits.len() });
        }
        Ok(())
    }

    pub fn syndrome(&self, bits: &[u8]) -> Result<Vec<u8>> {
        self.check_len(bits)?;
        Ok(self.checks.iter().map(|row| row.iter().fold(0u8, |acc, &j| acc ^ (bits[j] & 1))).collect())
    }

    /// True iff every parity sum is even.
    pub fn is_codeword(&self, bits: &[u8]) -> Result<bool> {
        Ok(self.syndrome(bits)?.iter().all(|&s| s == 0))
    }

    pub fn rank(&self) -> usize {
        let mut rows = BitRows::from_matrix(self);
        rows.reduce().len()
    }

    /// A code is asymmetric iff the all-ones word fails some check, i.e. some
    /// row has odd weight. GF(2) sums of even-weight rows stay even, so
    /// looking at single rows is enough.
    pub fn is_asymmetric(&self) -> AsymmetryVerdict {
        let odd_row = self.checks.iter().position(|row| row.len() % 2 == 1);
        AsymmetryVerdict { asymmetric: odd_row.is_some(), odd_row }
    }

    pub fn encoder(&self) -> Result<SystematicEncoder> {
        SystematicEncoder::new(self)
    }

    /// Systematic encoding; see [`SystematicEncoder`].
    pub fn encode(&self, info_bits: &[u8]) -> Result<Vec<u8>> {
        self.encoder()?.encode(info_bits)
    }

    pub fn parity_inequalities(&self, d_max: usize) -> Result<Vec<ParityInequality>> {
        enumerate_parity_inequalities(self, d_max)
    }

    /// Number of parity inequalities without materializing them.
    pub fn parity_inequality_count(&self, d_max: usize) -> Result<usize> {
        self.check_degrees_within(d_max)?;
        Ok(self.checks.iter().map(|row| 1usize << (row.len() - 1)).sum())
    }

    fn check_degrees_within(&self, d_max: usize) -> Result<()> {
        for (m, row) in self.checks.iter().enumerate() {
            if row.len() > d_max {
                return Err(Error::CheckDegree { check: m, degree: row.len(), d_max });
            }
        }
        Ok(())
    }

    pub fn to_alist(&self) -> String {
        write_alist(self)
    }

    pub fn from_alist(text: &str) -> Result<Self> {
        load_alist(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsymmetryVerdict {
    pub asymmetric: bool,
    /// Index of an odd-weight row when the code is asymmetric.
    pub odd_row: Option<usize>,
}

/// Dense GF(2) rows packed into 64-bit words.
#[derive(Debug, Clone)]
struct BitRows {
    n_cols: usize,
    rows: Vec<Vec<u64>>,
}

impl BitRows {
    fn from_matrix(h: &ParityCheckMatrix) -> Self {
        let words = h.n_cols.div_ceil(64);
        let rows = h
            .checks
            .iter()
            .map(|row| {
                let mut r = vec![0u64; words];
                for &j in row {
                    r[j / 64] |= 1 << (j % 64);
                }
                r
            })
            .collect();
        Self { n_cols: h.n_cols, rows }
    }

    fn get(row: &[u64], j: usize) -> bool {
        row[j / 64] >> (j % 64) & 1 == 1
    }

    /// Reduced row echelon form in place; returns pivot columns, one per
    /// leading row. Rows past the pivot count are zero afterwards.
    fn reduce(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for col in 0..self.n_cols {
            if r == self.rows.len() {
                break;
            }
            let Some(p) = (r..self.rows.len()).find(|&i| Self::get(&self.rows[i], col)) else {
                continue;
            };
            self.rows.swap(r, p);
            let pivot = self.rows[r].clone();
            for (i, row) in self.rows.iter_mut().enumerate() {
                if i != r && Self::get(row, col) {
                    for (a, b) in row.iter_mut().zip(&pivot) {
                        *a ^= b;
                    }
                }
            }
            pivots.push(col);
            r += 1;
        }
        pivots
    }
}

/// Systematic encoder derived from the reduced row echelon form of `H`.
///
/// Pivot columns carry parity, the remaining columns carry the information
/// bits in increasing order.
#[derive(Debug, Clone)]
pub struct SystematicEncoder {
    n_cols: usize,
    info_positions: Vec<usize>,
    parity_positions: Vec<usize>,
    /// For each parity position, the information positions it sums.
    parity_sources: Vec<Vec<usize>>,
}

impl SystematicEncoder {
    pub fn new(h: &ParityCheckMatrix) -> Result<Self> {
        let mut rows = BitRows::from_matrix(h);
        let pivots = rows.reduce();
        if pivots.len() < h.rows() {
            return Err(Error::RankDeficient { rank: pivots.len(), rows: h.rows() });
        }
        let mut is_pivot = vec![false; h.n_cols];
        for &p in &pivots {
            is_pivot[p] = true;
        }
        let info_positions: Vec<usize> = (0..h.n_cols).filter(|&j| !is_pivot[j]).collect();
        let parity_sources = pivots
            .iter()
            .enumerate()
            .map(|(r, _)| info_positions.iter().copied().filter(|&j| BitRows::get(&rows.rows[r], j)).collect())
            .collect();
        Ok(Self { n_cols: h.n_cols, info_positions, parity_positions: pivots, parity_sources })
    }

    pub fn info_len(&self) -> usize {
        self.info_positions.len()
    }

    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    pub fn parity_positions(&self) -> &[usize] {
        &self.parity_positions
    }

    pub fn encode(&self, info_bits: &[u8]) -> Result<Vec<u8>> {
        if info_bits.len() != self.info_len() {
            return Err(Error::Dimension { expected: self.info_len(), got: info_bits.len() });
        }
        let mut c = vec![0u8; self.n_cols];
        for (&pos, &b) in self.info_positions.iter().zip(info_bits) {
            c[pos] = b & 1;
        }
        for (&p, src) in self.parity_positions.iter().zip(&self.parity_sources) {
            c[p] = src.iter().fold(0, |acc, &j| acc ^ c[j]);
        }
        Ok(c)
    }

    /// Reads the information bits back from their systematic positions.
    pub fn extract_info(&self, codeword: &[u8]) -> Vec<u8> {
        self.info_positions.iter().map(|&j| codeword[j]).collect()
    }
}

/// One parity-polytope facet: `sum_F f - sum_{N_m \ F} f <= |F| - 1` for
/// an odd-cardinality subset `F` of a check neighbourhood.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParityInequality {
    pub check: usize,
    pub positive: Vec<usize>,
    pub negative: Vec<usize>,
}

impl ParityInequality {
    pub fn rhs(&self) -> f64 {
        (self.positive.len() - 1) as f64
    }

    pub fn lhs(&self, f: &[f64]) -> f64 {
        self.positive.iter().map(|&j| f[j]).sum::<f64>() - self.negative.iter().map(|&j| f[j]).sum::<f64>()
    }

    pub fn is_satisfied(&self, f: &[f64], tol: f64) -> bool {
        self.lhs(f) <= self.rhs() + tol
    }
}

/// Every odd-subset inequality of every check, `2^(d-1)` per degree-`d`
/// check, ordered by check and then by subset bitmask.
pub fn enumerate_parity_inequalities(h: &ParityCheckMatrix, d_max: usize) -> Result<Vec<ParityInequality>> {
    h.check_degrees_within(d_max)?;
    let mut out = Vec::with_capacity(h.parity_inequality_count(d_max)?);
    for (m, row) in h.checks.iter().enumerate() {
        let d = row.len();
        for mask in 0u32..(1 << d) {
            if mask.count_ones() % 2 == 0 {
                continue;
            }
            let (positive, negative): (Vec<usize>, Vec<usize>) =
                (0..d).partition(|&k| mask >> k & 1 == 1);
            out.push(ParityInequality {
                check: m,
                positive: positive.into_iter().map(|k| row[k]).collect(),
                negative: negative.into_iter().map(|k| row[k]).collect(),
            });
        }
    }
    Ok(out)
}

/// Parses MacKay's alist format. Zero padding in the adjacency lists is
/// accepted but optional.
pub fn load_alist(text: &str) -> Result<ParityCheckMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let mut last_line = 0;
    let mut next = |what: &str| -> Result<(usize, Vec<usize>)> {
        let (no, line) = lines.next().ok_or_else(|| Error::Alist {
            line: last_line + 1,
            msg: format!("unexpected end of input, expected {what}"),
        })?;
        last_line = no;
        let nums = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<usize>()
                    .map_err(|_| Error::Alist { line: no, msg: format!("invalid integer {tok:?} in {what}") })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((no, nums))
    };

    let (no, dims) = next("header `n m`")?;
    let [n, m] = dims[..] else {
        return Err(Error::Alist { line: no, msg: "header must be `n m`".into() });
    };
    if n == 0 || m == 0 {
        return Err(Error::Alist { line: no, msg: "dimensions must be positive".into() });
    }
    let (no, maxes) = next("maximum degrees")?;
    let [max_col, max_row] = maxes[..] else {
        return Err(Error::Alist { line: no, msg: "expected `max_col_degree max_row_degree`".into() });
    };
    let (no, col_deg) = next("column degrees")?;
    if col_deg.len() != n {
        return Err(Error::Alist { line: no, msg: format!("expected {n} column degrees, got {}", col_deg.len()) });
    }
    if let Some(d) = col_deg.iter().find(|&&d| d > max_col) {
        return Err(Error::Alist { line: no, msg: format!("column degree {d} exceeds declared maximum {max_col}") });
    }
    let (no, row_deg) = next("row degrees")?;
    if row_deg.len() != m {
        return Err(Error::Alist { line: no, msg: format!("expected {m} row degrees, got {}", row_deg.len()) });
    }
    if let Some(d) = row_deg.iter().find(|&&d| d > max_row) {
        return Err(Error::Alist { line: no, msg: format!("row degree {d} exceeds declared maximum {max_row}") });
    }

    let mut read_lists = |count: usize, degrees: &[usize], bound: usize, what: &str| -> Result<Vec<(usize, Vec<usize>)>> {
        (0..count)
            .map(|i| {
                let (no, entries) = next(&format!("{what} {}", i + 1))?;
                let nz: Vec<usize> = entries.iter().copied().filter(|&e| e != 0).collect();
                if entries.iter().skip(nz.len()).any(|&e| e != 0) {
                    return Err(Error::Alist { line: no, msg: "zero padding must trail the indices".into() });
                }
                if nz.len() != degrees[i] {
                    return Err(Error::Alist {
                        line: no,
                        msg: format!("{what} {} lists {} entries but its degree is {}", i + 1, nz.len(), degrees[i]),
                    });
                }
                if let Some(&e) = nz.iter().find(|&&e| e > bound) {
                    return Err(Error::Alist { line: no, msg: format!("index {e} out of range 1..={bound}") });
                }
                Ok((no, nz.into_iter().map(|e| e - 1).collect()))
            })
            .collect()
    };
    let col_lists = read_lists(n, &col_deg, m, "column")?;
    let row_lists = read_lists(m, &row_deg, n, "row")?;

    let mut from_cols = vec![Vec::new(); m];
    for (j, (_, rows)) in col_lists.iter().enumerate() {
        for &r in rows {
            from_cols[r].push(j);
        }
    }
    for (r, (no, cols)) in row_lists.iter().enumerate() {
        let mut a = cols.clone();
        a.sort_unstable();
        if a.windows(2).any(|p| p[0] == p[1]) {
            return Err(Error::Alist { line: *no, msg: format!("row {} repeats a column", r + 1) });
        }
        let mut b = from_cols[r].clone();
        b.sort_unstable();
        if a != b {
            return Err(Error::Alist {
                line: *no,
                msg: format!("row {} disagrees with the column lists", r + 1),
            });
        }
    }
    ParityCheckMatrix::from_checks(n, row_lists.into_iter().map(|(_, c)| c).collect())
        .map_err(|e| Error::Alist { line: last_line, msg: e.to_string() })
}

/// Writes MacKay's alist format with zero-padded adjacency lists.
pub fn write_alist(h: &ParityCheckMatrix) -> String {
    let col_deg = h.col_degrees();
    let row_deg = h.row_degrees();
    let max_col = col_deg.iter().copied().max().unwrap_or(0);
    let max_row = row_deg.iter().copied().max().unwrap_or(0);
    let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
    let padded = |v: &[usize], width: usize| {
        let mut e: Vec<usize> = v.iter().map(|x| x + 1).collect();
        e.resize(width, 0);
        join(&e)
    };
    let mut s = String::new();
    let _ = writeln!(s, "{} {}", h.cols(), h.rows());
    let _ = writeln!(s, "{max_col} {max_row}");
    let _ = writeln!(s, "{}", join(&col_deg));
    let _ = writeln!(s, "{}", join(&row_deg));
    for v in &h.vars {
        let _ = writeln!(s, "{}", padded(v, max_col));
    }
    for c in &h.checks {
        let _ = writeln!(s, "{}", padded(c, max_row));
    }
    s
}

const GENERATION_ATTEMPTS: usize = 1000;

/// Random full-rank parity-check matrix with `m` rows of weight
/// `row_degree` (one row adjusted to odd weight when `row_degree` is even),
/// so the code is asymmetric by construction.
///
/// Column degrees are balanced: every column gets `floor(E/n)` or
/// `ceil(E/n)` ones where `E = m * row_degree`.
pub fn generate_asymmetric_code(n: usize, m: usize, row_degree: usize, seed: u64) -> Result<ParityCheckMatrix> {
    if m == 0 || n <= m {
        return Err(Error::CodeGeneration(format!("need 0 < m < n, got n = {n}, m = {m}")));
    }
    if row_degree == 0 || row_degree >= n {
        return Err(Error::CodeGeneration(format!("row degree {row_degree} must lie in 1..{n}")));
    }
    if m * row_degree < n {
        return Err(Error::CodeGeneration(format!(
            "{m} rows of degree {row_degree} cannot cover {n} columns"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = m * row_degree;
    for _ in 0..GENERATION_ATTEMPTS {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut sockets = Vec::with_capacity(edges);
        for (k, &j) in order.iter().enumerate() {
            let deg = edges / n + usize::from(k < edges % n);
            sockets.extend(std::iter::repeat_n(j, deg));
        }
        sockets.shuffle(&mut rng);
        if !repair_duplicates(&mut sockets, row_degree, &mut rng) {
            continue;
        }
        let mut rows: Vec<Vec<usize>> = sockets.chunks(row_degree).map(<[usize]>::to_vec).collect();
        if row_degree.is_multiple_of(2) {
            make_first_row_odd(&mut rows, n, &mut rng);
        }
        let Ok(h) = ParityCheckMatrix::from_checks(n, rows) else {
            continue;
        };
        if h.is_asymmetric().asymmetric && h.rank() == m {
            return Ok(h);
        }
    }
    Err(Error::CodeGeneration(format!(
        "no full-rank ({n}, {m}) code with row degree {row_degree} after {GENERATION_ATTEMPTS} attempts"
    )))
}

/// Swaps sockets between rows until no row repeats a column.
fn repair_duplicates(sockets: &mut [usize], row_degree: usize, rng: &mut ChaCha8Rng) -> bool {
    let rows = sockets.len() / row_degree;
    for _ in 0..100 * sockets.len() {
        let bad = (0..rows).find_map(|r| {
            let row = &sockets[r * row_degree..(r + 1) * row_degree];
            (0..row_degree).find(|&i| row[..i].contains(&row[i])).map(|i| r * row_degree + i)
        });
        let Some(pos) = bad else {
            return true;
        };
        let other = rng.random_range(0..sockets.len());
        let (ra, rb) = (pos / row_degree, other / row_degree);
        if ra == rb {
            continue;
        }
        let row_a = &sockets[ra * row_degree..(ra + 1) * row_degree];
        let row_b = &sockets[rb * row_degree..(rb + 1) * row_degree];
        if row_a.contains(&sockets[other]) || row_b.contains(&sockets[pos]) {
            continue;
        }
        sockets.swap(pos, other);
    }
    false
}

/// Drops a column covered elsewhere from row 0, or adds a fresh one.
fn make_first_row_odd(rows: &mut [Vec<usize>], n: usize, rng: &mut ChaCha8Rng) {
    let mut degree = vec![0usize; n];
    for r in rows.iter() {
        for &j in r {
            degree[j] += 1;
        }
    }
    if let Some(i) = rows[0].iter().position(|&j| degree[j] > 1) {
        rows[0].remove(i);
        return;
    }
    let free: Vec<usize> = (0..n).filter(|j| !rows[0].contains(j)).collect();
    rows[0].push(free[rng.random_range(0..free.len())]);
}
