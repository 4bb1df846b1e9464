//! Sparse matrix storage and the reference SpMV kernel.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SparseError {
    #[error("entry ({row}, {col}) out of bounds for a {nrows}x{ncols} matrix")]
    OutOfBounds {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },
    #[error("entry ({row}, {col}) has non-finite value {val}")]
    NonFinite { row: usize, col: usize, val: f32 },
    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("cannot place {nnz} non-zeros in a {nrows}x{ncols} matrix")]
    InfeasibleNnz { nnz: usize, nrows: usize, ncols: usize },
}

/// One coordinate entry, 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub row: usize,
    pub col: usize,
    pub val: f32,
}

impl Triplet {
    pub fn new(row: usize, col: usize, val: f32) -> Self {
        Triplet { row, col, val }
    }
}

/// Row-compressed sparse matrix.
///
/// Construction normalizes the input: entries are sorted by (row, col),
/// duplicates are summed and explicit zeros are kept, so `nnz` always equals
/// the number of slots the matrix occupies in an accelerator stream.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f32>,
}

impl SparseMatrix {
    pub fn empty(nrows: usize, ncols: usize) -> Self {
        SparseMatrix {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_triplets(nrows: usize, ncols: usize, mut entries: Vec<Triplet>) -> Result<Self, SparseError> {
        for t in &entries {
            if t.row >= nrows || t.col >= ncols {
                return Err(SparseError::OutOfBounds {
                    row: t.row,
                    col: t.col,
                    nrows,
                    ncols,
                });
            }
            if !t.val.is_finite() {
                return Err(SparseError::NonFinite {
                    row: t.row,
                    col: t.col,
                    val: t.val,
                });
            }
        }
        // stable sort keeps duplicate summation in input order
        entries.sort_by_key(|t| (t.row, t.col));

        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f32> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for t in entries {
            if last == Some((t.row, t.col)) {
                *values.last_mut().unwrap() += t.val;
                continue;
            }
            last = Some((t.row, t.col));
            row_ptr[t.row + 1] += 1;
            col_idx.push(t.col);
            values.push(t.val);
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        if let Some((pos, &val)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            // a duplicate sum overflowed
            let row = row_ptr.partition_point(|&p| p <= pos) - 1;
            return Err(SparseError::NonFinite {
                row,
                col: col_idx[pos],
                val,
            });
        }
        Ok(SparseMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
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

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Column indices and values of one row, ascending by column.
    pub fn row(&self, i: usize) -> (&[usize], &[f32]) {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }

    pub fn row_degree(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    /// Entries in CSR order (row-major, ascending column).
    pub fn triplets(&self) -> impl Iterator<Item = Triplet> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&col, &val)| Triplet::new(i, col, val))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DenseVector(Vec<f32>);

impl DenseVector {
    pub fn new(data: Vec<f32>) -> Self {
        DenseVector(data)
    }

    pub fn zeros(len: usize) -> Self {
        DenseVector(vec![0.0; len])
    }

    pub fn filled(len: usize, value: f32) -> Self {
        DenseVector(vec![value; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }
}

impl From<Vec<f32>> for DenseVector {
    fn from(v: Vec<f32>) -> Self {
        DenseVector(v)
    }
}

impl std::ops::Index<usize> for DenseVector {
    type Output = f32;

    fn index(&self, i: usize) -> &f32 {
        &self.0[i]
    }
}

/// `alpha * (A x) + beta * y` in FP32.
///
/// Each row is accumulated from zero in ascending column order; this fixed
/// order is the oracle order the simulator is compared against. A zero
/// `beta` does not read `y`, so non-finite `y` entries cannot leak through.
pub fn reference_spmv(
    a: &SparseMatrix,
    x: &DenseVector,
    y: &DenseVector,
    alpha: f32,
    beta: f32,
) -> Result<DenseVector, SparseError> {
    if x.len() != a.ncols() {
        return Err(SparseError::DimensionMismatch {
            what: "x",
            got: x.len(),
            expected: a.ncols(),
        });
    }
    if y.len() != a.nrows() {
        return Err(SparseError::DimensionMismatch {
            what: "y",
            got: y.len(),
            expected: a.nrows(),
        });
    }
    let xs = x.as_slice();
    let out = (0..a.nrows())
        .map(|i| {
            let (cols, vals) = a.row(i);
            let mut acc = 0.0f32;
            for (&c, &v) in cols.iter().zip(vals) {
                acc += v * xs[c];
            }
            combine(acc, y[i], alpha, beta)
        })
        .collect();
    Ok(DenseVector(out))
}

/// The CompY step shared by the oracle and the simulator.
#[inline]
pub fn combine(acc: f32, y_in: f32, alpha: f32, beta: f32) -> f32 {
    if beta == 0.0 {
        alpha * acc
    } else {
        alpha * acc + beta * y_in
    }
}

/// Elementwise `|a - b| / max(|b|, 1)`, maximised over the vector.
pub fn max_relative_error(actual: &[f32], reference: &[f32]) -> f64 {
    actual
        .iter()
        .zip(reference)
        .map(|(&a, &r)| {
            let (a, r) = (a as f64, r as f64);
            (a - r).abs() / r.abs().max(1.0)
        })
        .fold(0.0, f64::max)
}
