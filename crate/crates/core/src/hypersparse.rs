//! Hypersparse matrices stored as a sorted coordinate list.
//!
//! Storage is three parallel vectors (rows, cols, vals) sorted
//! lexicographically by (row, col) with unique coordinates. Stored values may
//! be zero: entries that sum to zero are kept, never dropped, so
//! [`HypersparseMatrix::entries_count`] stays a constant-time length read and
//! the stored pattern is stable under cancellation. A doubly-compressed
//! layout (DCSC/DCSR) would be a valid alternative; the operations needed
//! here (build, sorted merge, count) don't benefit from it.

use thiserror::Error;

/// Largest allowed row/column dimension (2^60). Leaves headroom below 2^64
/// for packed (row, col) key encodings.
pub const MAX_DIM: u64 = 1 << 60;

/// One streaming update: a count value at a (row, col) coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Triple {
    pub row: u64,
    pub col: u64,
    pub val: i64,
}

impl Triple {
    pub fn new(row: u64, col: u64, val: i64) -> Self {
        Triple { row, col, val }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MatrixError {
    #[error("invalid dimensions {nrows}x{ncols}: each must be in 1..=2^60")]
    InvalidDimension { nrows: u64, ncols: u64 },
    #[error("triple {position}: coordinate ({row},{col}) outside {nrows}x{ncols}")]
    TripleOutOfBounds {
        position: usize,
        row: u64,
        col: u64,
        nrows: u64,
        ncols: u64,
    },
    #[error("coordinate ({row},{col}) outside {nrows}x{ncols}")]
    IndexOutOfBounds {
        row: u64,
        col: u64,
        nrows: u64,
        ncols: u64,
    },
    #[error("shape mismatch: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(u64, u64, u64, u64),
    #[error("value overflow accumulating at ({row},{col})")]
    ValueOverflow { row: u64, col: u64 },
}

/// Sparse matrix storing only present entries; dimensions up to 2^60.
///
/// Invariants: coordinates strictly increasing in (row, col) lexicographic
/// order, all within bounds. Values are signed 64-bit counts; addition that
/// overflows is a hard error, never wraparound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HypersparseMatrix {
    nrows: u64,
    ncols: u64,
    rows: Vec<u64>,
    cols: Vec<u64>,
    vals: Vec<i64>,
}

impl HypersparseMatrix {
    /// Empty matrix of the given dimensions.
    pub fn new(nrows: u64, ncols: u64) -> Result<Self, MatrixError> {
        if nrows == 0 || ncols == 0 || nrows > MAX_DIM || ncols > MAX_DIM {
            return Err(MatrixError::InvalidDimension { nrows, ncols });
        }
        Ok(HypersparseMatrix {
            nrows,
            ncols,
            rows: Vec::new(),
            cols: Vec::new(),
            vals: Vec::new(),
        })
    }

    /// Builds a matrix from a batch of triples, accumulating duplicate
    /// coordinates with integer addition. A coordinate whose sum lands on
    /// zero is stored as an explicit zero.
    pub fn from_triples(nrows: u64, ncols: u64, batch: &[Triple]) -> Result<Self, MatrixError> {
        let mut m = Self::new(nrows, ncols)?;
        for (position, t) in batch.iter().enumerate() {
            if t.row >= nrows || t.col >= ncols {
                return Err(MatrixError::TripleOutOfBounds {
                    position,
                    row: t.row,
                    col: t.col,
                    nrows,
                    ncols,
                });
            }
        }
        let mut sorted: Vec<Triple> = batch.to_vec();
        sorted.sort_unstable_by_key(|t| (t.row, t.col));

        m.rows.reserve(sorted.len());
        m.cols.reserve(sorted.len());
        m.vals.reserve(sorted.len());
        for t in sorted {
            match m.rows.last() {
                Some(&r) if r == t.row && *m.cols.last().unwrap() == t.col => {
                    let last = m.vals.last_mut().unwrap();
                    *last = last.checked_add(t.val).ok_or(MatrixError::ValueOverflow {
                        row: t.row,
                        col: t.col,
                    })?;
                }
                _ => {
                    m.rows.push(t.row);
                    m.cols.push(t.col);
                    m.vals.push(t.val);
                }
            }
        }
        Ok(m)
    }

    pub fn nrows(&self) -> u64 {
        self.nrows
    }

    pub fn ncols(&self) -> u64 {
        self.ncols
    }

    /// Number of stored entries, including explicit zeros. Constant time:
    /// this is the storage length, not a scan.
    pub fn entries_count(&self) -> usize {
        self.vals.len()
    }

    /// Number of stored entries with a nonzero value. Scans storage; always
    /// `<= entries_count()`.
    pub fn nnz_count(&self) -> usize {
        self.vals.iter().filter(|v| **v != 0).count()
    }

    /// Stored value at a coordinate, or `None` when absent.
    pub fn get(&self, row: u64, col: u64) -> Result<Option<i64>, MatrixError> {
        if row >= self.nrows || col >= self.ncols {
            return Err(MatrixError::IndexOutOfBounds {
                row,
                col,
                nrows: self.nrows,
                ncols: self.ncols,
            });
        }
        let (mut lo, mut hi) = (0usize, self.rows.len());
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if (self.rows[mid], self.cols[mid]) < (row, col) {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        if lo < self.rows.len() && self.rows[lo] == row && self.cols[lo] == col {
            Ok(Some(self.vals[lo]))
        } else {
            Ok(None)
        }
    }

    /// Entries in ascending (row, col) order, stored zeros included.
    pub fn iter(&self) -> impl Iterator<Item = Triple> + '_ {
        self.rows
            .iter()
            .zip(&self.cols)
            .zip(&self.vals)
            .map(|((&row, &col), &val)| Triple { row, col, val })
    }

    /// Sum of all stored values, with checked 64-bit arithmetic.
    pub fn total_value(&self) -> Result<i64, MatrixError> {
        let mut total: i64 = 0;
        for (i, &v) in self.vals.iter().enumerate() {
            total = total.checked_add(v).ok_or(MatrixError::ValueOverflow {
                row: self.rows[i],
                col: self.cols[i],
            })?;
        }
        Ok(total)
    }

    /// Element-wise `self += source`. The result pattern is the union of both
    /// patterns; shared coordinates sum (overflow is an error), and stored
    /// zeros are retained.
    pub fn add_assign(&mut self, source: &HypersparseMatrix) -> Result<(), MatrixError> {
        self.merge_from(source).map(|_| ())
    }

    /// Sorted two-pointer merge; returns the number of coordinate
    /// comparisons so tests can pin the O(m+n) cost.
    fn merge_from(&mut self, source: &HypersparseMatrix) -> Result<u64, MatrixError> {
        if self.nrows != source.nrows || self.ncols != source.ncols {
            return Err(MatrixError::ShapeMismatch(
                self.nrows,
                self.ncols,
                source.nrows,
                source.ncols,
            ));
        }
        if source.vals.is_empty() {
            return Ok(0);
        }
        if self.vals.is_empty() {
            self.rows = source.rows.clone();
            self.cols = source.cols.clone();
            self.vals = source.vals.clone();
            return Ok(0);
        }

        let (m, n) = (self.vals.len(), source.vals.len());
        let mut rows = Vec::with_capacity(m + n);
        let mut cols = Vec::with_capacity(m + n);
        let mut vals = Vec::with_capacity(m + n);
        let (mut i, mut j) = (0usize, 0usize);
        let mut comparisons = 0u64;
        while i < m && j < n {
            comparisons += 1;
            let a = (self.rows[i], self.cols[i]);
            let b = (source.rows[j], source.cols[j]);
            match a.cmp(&b) {
                std::cmp::Ordering::Less => {
                    rows.push(self.rows[i]);
                    cols.push(self.cols[i]);
                    vals.push(self.vals[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    rows.push(source.rows[j]);
                    cols.push(source.cols[j]);
                    vals.push(source.vals[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    let v = self.vals[i].checked_add(source.vals[j]).ok_or(
                        MatrixError::ValueOverflow {
                            row: a.0,
                            col: a.1,
                        },
                    )?;
                    rows.push(a.0);
                    cols.push(a.1);
                    vals.push(v);
                    i += 1;
                    j += 1;
                }
            }
        }
        rows.extend_from_slice(&self.rows[i..]);
        cols.extend_from_slice(&self.cols[i..]);
        vals.extend_from_slice(&self.vals[i..]);
        rows.extend_from_slice(&source.rows[j..]);
        cols.extend_from_slice(&source.cols[j..]);
        vals.extend_from_slice(&source.vals[j..]);
        self.rows = rows;
        self.cols = cols;
        self.vals = vals;
        Ok(comparisons)
    }
}
