//! Compressed sparse row structures and the graph-side machinery around them:
//! validation, degree features, seeded synthetic generators, probe sampling
//! and the on-disk format.

mod dense;
mod features;
mod generate;
mod io;
mod sample;

use std::fmt;
use std::ops::Range;

pub use dense::{DenseMatrix, ShapeError};
pub use features::{extract_features, GraphFeatures};
pub use generate::{gen_er, gen_hub_fixed, gen_hubskew, hub_count, GenError, DEFAULT_HUB_FACTOR};
pub use io::{load_csr, read_csr, save_csr, write_csr, CsrIoError, FORMAT_VERSION, MAGIC};
pub use sample::{induced_row_sample, RowSample};

/// The first CSR invariant that a matrix breaks, with the offending index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CsrViolation {
    RowptrLength {
        expected: usize,
        found: usize,
    },
    RowptrStart {
        found: usize,
    },
    RowptrDecreasing {
        index: usize,
    },
    RowptrNnzMismatch {
        last: usize,
        nnz: usize,
    },
    ColindOutOfRange {
        index: usize,
        col: u32,
        n_cols: usize,
    },
    ColindUnsorted {
        row: usize,
        index: usize,
    },
    ValueLength {
        expected: usize,
        found: usize,
    },
}

impl CsrViolation {
    /// Short name of the violated invariant.
    pub fn invariant(&self) -> &'static str {
        match self {
            Self::RowptrLength { .. } => "rowptr length",
            Self::RowptrStart { .. } => "rowptr starts at zero",
            Self::RowptrDecreasing { .. } => "rowptr non-decreasing",
            Self::RowptrNnzMismatch { .. } => "rowptr/nnz mismatch",
            Self::ColindOutOfRange { .. } => "colind out of range",
            Self::ColindUnsorted { .. } => "colind strictly increasing per row",
            Self::ValueLength { .. } => "val length",
        }
    }

    /// Index into the array holding the violation, when there is one.
    pub fn index(&self) -> Option<usize> {
        match *self {
            Self::RowptrDecreasing { index }
            | Self::ColindOutOfRange { index, .. }
            | Self::ColindUnsorted { index, .. } => Some(index),
            Self::RowptrStart { .. } => Some(0),
            _ => None,
        }
    }
}

impl fmt::Display for CsrViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::RowptrLength { expected, found } => {
                write!(f, "rowptr length: expected {expected}, found {found}")
            }
            Self::RowptrStart { found } => write!(f, "rowptr starts at zero: rowptr[0] = {found}"),
            Self::RowptrDecreasing { index } => write!(f, "rowptr non-decreasing at index {index}"),
            Self::RowptrNnzMismatch { last, nnz } => {
                write!(f, "rowptr/nnz mismatch: rowptr[last] = {last}, nnz = {nnz}")
            }
            Self::ColindOutOfRange { index, col, n_cols } => {
                write!(f, "colind out of range at index {index}: {col} >= {n_cols}")
            }
            Self::ColindUnsorted { row, index } => {
                write!(
                    f,
                    "colind strictly increasing per row: row {row}, index {index}"
                )
            }
            Self::ValueLength { expected, found } => {
                write!(f, "val length: expected {expected}, found {found}")
            }
        }
    }
}

impl std::error::Error for CsrViolation {}

/// A CSR matrix in canonical form (sorted, duplicate-free columns per row).
///
/// Pattern-only matrices carry no value array; their entries read as `1.0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    rowptr: Vec<usize>,
    colind: Vec<u32>,
    val: Option<Vec<f32>>,
}

/// Check every CSR invariant and report the first one broken.
pub fn validate(
    n_rows: usize,
    n_cols: usize,
    rowptr: &[usize],
    colind: &[u32],
    val: Option<&[f32]>,
) -> Result<(), CsrViolation> {
    if rowptr.len() != n_rows + 1 {
        return Err(CsrViolation::RowptrLength {
            expected: n_rows + 1,
            found: rowptr.len(),
        });
    }
    if rowptr[0] != 0 {
        return Err(CsrViolation::RowptrStart { found: rowptr[0] });
    }
    for i in 1..rowptr.len() {
        if rowptr[i] < rowptr[i - 1] {
            return Err(CsrViolation::RowptrDecreasing { index: i });
        }
    }
    let last = rowptr[n_rows];
    if last != colind.len() {
        return Err(CsrViolation::RowptrNnzMismatch {
            last,
            nnz: colind.len(),
        });
    }
    for row in 0..n_rows {
        let span = rowptr[row]..rowptr[row + 1];
        let mut prev: Option<u32> = None;
        for e in span {
            let col = colind[e];
            if col as usize >= n_cols {
                return Err(CsrViolation::ColindOutOfRange {
                    index: e,
                    col,
                    n_cols,
                });
            }
            if prev.is_some_and(|p| col <= p) {
                return Err(CsrViolation::ColindUnsorted { row, index: e });
            }
            prev = Some(col);
        }
    }
    if let Some(val) = val {
        if val.len() != colind.len() {
            return Err(CsrViolation::ValueLength {
                expected: colind.len(),
                found: val.len(),
            });
        }
    }
    Ok(())
}

impl CsrMatrix {
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        rowptr: Vec<usize>,
        colind: Vec<u32>,
        val: Option<Vec<f32>>,
    ) -> Result<Self, CsrViolation> {
        validate(n_rows, n_cols, &rowptr, &colind, val.as_deref())?;
        Ok(Self {
            n_rows,
            n_cols,
            rowptr,
            colind,
            val,
        })
    }

    /// Build from per-row column lists. Columns are sorted; duplicates are
    /// a violation.
    pub fn from_rows(
        n_cols: usize,
        rows: Vec<Vec<(u32, f32)>>,
        with_values: bool,
    ) -> Result<Self, CsrViolation> {
        let n_rows = rows.len();
        let nnz = rows.iter().map(Vec::len).sum();
        let mut rowptr = Vec::with_capacity(n_rows + 1);
        let mut colind = Vec::with_capacity(nnz);
        let mut val = Vec::with_capacity(if with_values { nnz } else { 0 });
        rowptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                colind.push(c);
                if with_values {
                    val.push(v);
                }
            }
            rowptr.push(colind.len());
        }
        Self::new(n_rows, n_cols, rowptr, colind, with_values.then_some(val))
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            rowptr: (0..=n).collect(),
            colind: (0..n as u32).collect(),
            val: Some(vec![1.0; n]),
        }
    }

    /// `n_rows` x `n_cols` matrix with no stored entries.
    pub fn empty(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            rowptr: vec![0; n_rows + 1],
            colind: Vec::new(),
            val: None,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.colind.len()
    }

    pub fn rowptr(&self) -> &[usize] {
        &self.rowptr
    }

    pub fn colind(&self) -> &[u32] {
        &self.colind
    }

    pub fn values(&self) -> Option<&[f32]> {
        self.val.as_deref()
    }

    pub fn has_values(&self) -> bool {
        self.val.is_some()
    }

    #[inline]
    pub fn row_range(&self, row: usize) -> Range<usize> {
        self.rowptr[row]..self.rowptr[row + 1]
    }

    #[inline]
    pub fn degree(&self, row: usize) -> usize {
        self.rowptr[row + 1] - self.rowptr[row]
    }

    pub fn degrees(&self) -> impl Iterator<Item = usize> + '_ {
        self.rowptr.windows(2).map(|w| w[1] - w[0])
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().max().unwrap_or(0)
    }

    /// Value of stored entry `e`, `1.0` for pattern-only matrices.
    #[inline]
    pub fn value(&self, e: usize) -> f32 {
        match &self.val {
            Some(v) => v[e],
            None => 1.0,
        }
    }

    /// Same pattern with a new value array.
    pub fn with_values(&self, val: Vec<f32>) -> Result<Self, CsrViolation> {
        if val.len() != self.nnz() {
            return Err(CsrViolation::ValueLength {
                expected: self.nnz(),
                found: val.len(),
            });
        }
        Ok(Self {
            val: Some(val),
            ..self.pattern()
        })
    }

    /// Same pattern, values dropped.
    pub fn pattern(&self) -> Self {
        Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            rowptr: self.rowptr.clone(),
            colind: self.colind.clone(),
            val: None,
        }
    }

    pub(crate) fn from_parts_unchecked(
        n_rows: usize,
        n_cols: usize,
        rowptr: Vec<usize>,
        colind: Vec<u32>,
        val: Option<Vec<f32>>,
    ) -> Self {
        debug_assert!(validate(n_rows, n_cols, &rowptr, &colind, val.as_deref()).is_ok());
        Self {
            n_rows,
            n_cols,
            rowptr,
            colind,
            val,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_pattern_is_valid() {
        assert_eq!(validate(2, 2, &[0, 1, 2], &[0, 1], None), Ok(()));
    }

    #[test]
    fn decreasing_rowptr_is_reported_at_its_index() {
        let err = validate(2, 2, &[0, 2, 1], &[0], None).unwrap_err();
        assert_eq!(err.invariant(), "rowptr non-decreasing");
        assert_eq!(err.index(), Some(2));
    }

    #[test]
    fn column_equal_to_n_cols_is_out_of_range() {
        let err = validate(2, 2, &[0, 1, 2], &[0, 2], None).unwrap_err();
        assert_eq!(err.invariant(), "colind out of range");
        assert_eq!(err.index(), Some(1));
    }

    #[test]
    fn unsorted_and_duplicate_columns_are_rejected() {
        let err = validate(1, 4, &[0, 2], &[3, 1], None).unwrap_err();
        assert_eq!(err, CsrViolation::ColindUnsorted { row: 0, index: 1 });
        let err = validate(1, 4, &[0, 2], &[1, 1], None).unwrap_err();
        assert_eq!(err.invariant(), "colind strictly increasing per row");
    }

    #[test]
    fn nnz_and_value_length_mismatches() {
        let err = validate(1, 4, &[0, 3], &[0, 1], None).unwrap_err();
        assert_eq!(err.invariant(), "rowptr/nnz mismatch");
        let err = validate(1, 4, &[0, 2], &[0, 1], Some(&[1.0])).unwrap_err();
        assert_eq!(err.invariant(), "val length");
        let err = validate(2, 4, &[0, 2], &[0, 1], None).unwrap_err();
        assert_eq!(err.invariant(), "rowptr length");
    }

    #[test]
    fn from_rows_sorts_columns() {
        let m = CsrMatrix::from_rows(4, vec![vec![(3, 1.0), (0, 2.0)], vec![]], true).unwrap();
        assert_eq!(m.colind(), &[0, 3]);
        assert_eq!(m.values().unwrap(), &[2.0, 1.0]);
        assert_eq!(m.degree(1), 0);
    }

    #[test]
    fn pattern_only_entries_read_as_one() {
        let m = CsrMatrix::identity(3).pattern();
        assert!(!m.has_values());
        assert_eq!(m.value(2), 1.0);
    }
}
