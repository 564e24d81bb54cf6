//! Exchange matrices and matrix mutation.
//!
//! An [`ExchangeMatrix`] is an `m x n` integer matrix (`m >= n`) whose top
//! `n x n` block is the exchange part and whose remaining `m - n` rows are
//! frozen. Indices are 0-based in the API and 1-based in text and errors.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExchangeError {
    #[error("matrix must have at least as many rows as columns (got {rows}x{cols})")]
    Shape { rows: usize, cols: usize },
    #[error("index {index} out of range 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("mutation at {k} breaks sign-skew-symmetry at ({i}, {j}): {bij} vs {bji}")]
    NotMutable { k: usize, i: usize, j: usize, bij: i64, bji: i64 },
    #[error("matrix file: {0}")]
    Parse(String),
}

#[inline]
fn pos(b: i64) -> i64 {
    b.max(0)
}

/// Dense row-major `m x n` integer matrix with `n` exchangeable columns.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExchangeMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<i64>,
}

impl ExchangeMatrix {
    pub fn from_rows(rows: &[Vec<i64>]) -> Result<ExchangeMatrix, ExchangeError> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(ExchangeError::Parse("ragged rows".into()));
        }
        ExchangeMatrix::from_entries(m, n, rows.concat())
    }

    pub fn from_entries(rows: usize, cols: usize, entries: Vec<i64>) -> Result<ExchangeMatrix, ExchangeError> {
        if rows < cols {
            return Err(ExchangeError::Shape { rows, cols });
        }
        assert_eq!(entries.len(), rows * cols, "entry count does not match shape");
        Ok(ExchangeMatrix { rows, cols, entries })
    }

    /// Total row count `m`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Exchangeable count `n`.
    pub fn rank(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[i64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<i64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<i64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// The top `n x n` exchange block.
    pub fn principal_part(&self) -> ExchangeMatrix {
        ExchangeMatrix { rows: self.cols, cols: self.cols, entries: self.entries[..self.cols * self.cols].to_vec() }
    }

    /// The frozen rows `n+1..m` as a matrix of `m - n` rows.
    pub fn frozen_rows(&self) -> Vec<Vec<i64>> {
        (self.cols..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    fn check_index(&self, k: usize) -> Result<(), ExchangeError> {
        if k < self.cols {
            Ok(())
        } else {
            Err(ExchangeError::IndexOutOfRange { index: k + 1, n: self.cols })
        }
    }

    /// First offending pair `(i, j)` of the top block, if any.
    fn sign_skew_violation(&self) -> Option<(usize, usize)> {
        let n = self.cols;
        for i in 0..n {
            if self.get(i, i) != 0 {
                return Some((i, i));
            }
            for j in i + 1..n {
                if self.get(i, j).signum() != -self.get(j, i).signum() {
                    return Some((i, j));
                }
            }
        }
        None
    }

    /// `b_ij` and `b_ji` are both zero or of strictly opposite sign, diagonal zero.
    /// Frozen rows are ignored.
    pub fn is_sign_skew_symmetric(&self) -> bool {
        self.sign_skew_violation().is_none()
    }

    pub fn is_skew_symmetric(&self) -> bool {
        let n = self.cols;
        (0..n).all(|i| (0..n).all(|j| self.get(i, j) == -self.get(j, i)))
    }

    /// True when the digraph with an arrow `i -> j` for each `b_ij > 0` on
    /// the exchangeable indices has no directed cycle.
    pub fn is_acyclic(&self) -> bool {
        let n = self.cols;
        let mut indegree: Vec<usize> = (0..n).map(|j| (0..n).filter(|&i| self.get(i, j) > 0).count()).collect();
        let mut ready: Vec<usize> = (0..n).filter(|&j| indegree[j] == 0).collect();
        let mut seen = 0;
        while let Some(i) = ready.pop() {
            seen += 1;
            for j in 0..n {
                if self.get(i, j) > 0 {
                    indegree[j] -= 1;
                    if indegree[j] == 0 {
                        ready.push(j);
                    }
                }
            }
        }
        seen == n
    }

    /// Matrix mutation at column `k` (0-based), applied to all rows.
    pub fn mutate(&self, k: usize) -> Result<ExchangeMatrix, ExchangeError> {
        self.check_index(k)?;
        let (m, n) = (self.rows, self.cols);
        let mut entries = Vec::with_capacity(m * n);
        for j in 0..m {
            let bjk = self.get(j, k);
            for l in 0..n {
                let bjl = self.get(j, l);
                let v = if j == k || l == k {
                    -bjl
                } else {
                    let bkl = self.get(k, l);
                    bjl + (bjk.abs() * bkl + bjk * bkl.abs()) / 2
                };
                entries.push(v);
            }
        }
        let out = ExchangeMatrix { rows: m, cols: n, entries };
        if let Some((i, j)) = out.sign_skew_violation() {
            return Err(ExchangeError::NotMutable {
                k: k + 1,
                i: i + 1,
                j: j + 1,
                bij: out.get(i, j),
                bji: out.get(j, i),
            });
        }
        Ok(out)
    }

    /// Mutates along `seq` in order.
    pub fn mutate_sequence(&self, seq: &[usize]) -> Result<ExchangeMatrix, ExchangeError> {
        seq.iter().try_fold(self.clone(), |acc, &k| acc.mutate(k))
    }

    /// `[B; I_n]` for square `B`.
    pub fn principal_extension(&self) -> ExchangeMatrix {
        let n = self.cols;
        let mut entries = self.principal_part().entries;
        for i in 0..n {
            entries.extend((0..n).map(|j| i64::from(i == j)));
        }
        ExchangeMatrix { rows: 2 * n, cols: n, entries }
    }

    /// The square matrix `[[B, -B'^T], [B', 0]]` for `self = [B; B']`.
    pub fn square_extension(&self) -> ExchangeMatrix {
        let (m, n) = (self.rows, self.cols);
        let mut entries = vec![0i64; m * m];
        for i in 0..m {
            for j in 0..n {
                entries[i * m + j] = self.get(i, j);
            }
        }
        for i in 0..n {
            for j in n..m {
                entries[i * m + j] = -self.get(j, i);
            }
        }
        ExchangeMatrix { rows: m, cols: m, entries }
    }

    /// Simultaneous permutation: new exchangeable index `a` takes old index
    /// `perm[a]`. Frozen rows keep their order; their columns are permuted.
    pub fn permute(&self, perm: &[usize]) -> ExchangeMatrix {
        let (m, n) = (self.rows, self.cols);
        assert_eq!(perm.len(), n);
        let src_row = |i: usize| if i < n { perm[i] } else { i };
        let mut entries = Vec::with_capacity(m * n);
        for i in 0..m {
            for &pj in perm {
                entries.push(self.get(src_row(i), pj));
            }
        }
        ExchangeMatrix { rows: m, cols: n, entries }
    }

    /// Renders the `exchange <m> <n>` text format.
    pub fn to_text(&self) -> String {
        let mut s = format!("exchange {} {}\n", self.rows, self.cols);
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(i64::to_string).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    /// Compact single-line rendering, e.g. `[[0,1],[-1,0]]`.
    pub fn inline(&self) -> String {
        let rows: Vec<String> = (0..self.rows)
            .map(|i| {
                let r: Vec<String> = self.row(i).iter().map(i64::to_string).collect();
                format!("[{}]", r.join(","))
            })
            .collect();
        format!("[{}]", rows.join(","))
    }

    /// Parses a block starting with an `exchange` header from `lines`,
    /// consuming exactly the header and `m` rows. Blank lines are skipped.
    pub fn parse_lines<'a, I: Iterator<Item = &'a str>>(lines: &mut I) -> Result<ExchangeMatrix, ExchangeError> {
        let err = |s: String| ExchangeError::Parse(s);
        let header =
            lines.by_ref().map(str::trim).find(|l| !l.is_empty()).ok_or_else(|| err("missing header".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let (m, n) = match fields.as_slice() {
            ["exchange", m, n] => (
                m.parse::<usize>().map_err(|_| err(format!("bad row count {m:?}")))?,
                n.parse::<usize>().map_err(|_| err(format!("bad column count {n:?}")))?,
            ),
            _ => return Err(err(format!("expected `exchange <m> <n>`, got {header:?}"))),
        };
        let mut entries = Vec::with_capacity(m * n);
        let mut read = 0;
        while read < m {
            let line = lines.next().ok_or_else(|| err(format!("expected {m} rows, got {read}")))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row: Vec<i64> = line
                .split_whitespace()
                .map(|t| t.parse::<i64>().map_err(|_| err(format!("bad entry {t:?}"))))
                .collect::<Result<_, _>>()?;
            if row.len() != n {
                return Err(err(format!("row {} has {} entries, expected {n}", read + 1, row.len())));
            }
            entries.extend(row);
            read += 1;
        }
        ExchangeMatrix::from_entries(m, n, entries)
    }
}

impl FromStr for ExchangeMatrix {
    type Err = ExchangeError;

    fn from_str(s: &str) -> Result<ExchangeMatrix, ExchangeError> {
        let mut lines = s.lines();
        let out = ExchangeMatrix::parse_lines(&mut lines)?;
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(ExchangeError::Parse("trailing content after matrix".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for ExchangeMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// A path in the exchange tree, as 0-based exchangeable indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MutationSequence(Vec<usize>);

impl MutationSequence {
    pub fn new() -> MutationSequence {
        MutationSequence(Vec::new())
    }

    /// Validates every index against the rank `n`.
    pub fn checked(indices: Vec<usize>, n: usize) -> Result<MutationSequence, ExchangeError> {
        if let Some(&k) = indices.iter().find(|&&k| k >= n) {
            return Err(ExchangeError::IndexOutOfRange { index: k + 1, n });
        }
        Ok(MutationSequence(indices))
    }

    /// Parses whitespace-separated 1-based indices.
    pub fn parse_one_based(s: &str, n: usize) -> Result<MutationSequence, ExchangeError> {
        let indices = s
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| match t.parse::<usize>() {
                Ok(k) if k >= 1 => Ok(k - 1),
                _ => Err(ExchangeError::Parse(format!("bad mutation index {t:?}"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        MutationSequence::checked(indices, n)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> Option<usize> {
        self.0.last().copied()
    }

    pub fn pushed(&self, k: usize) -> MutationSequence {
        let mut v = self.0.clone();
        v.push(k);
        MutationSequence(v)
    }

    /// Space-separated 1-based rendering.
    pub fn to_one_based(&self) -> String {
        let parts: Vec<String> = self.0.iter().map(|k| (k + 1).to_string()).collect();
        parts.join(" ")
    }
}

impl From<Vec<usize>> for MutationSequence {
    fn from(v: Vec<usize>) -> Self {
        MutationSequence(v)
    }
}

/// `[b]_+`.
pub fn positive_part(b: i64) -> i64 {
    pos(b)
}
