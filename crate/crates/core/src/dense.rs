//! Dense row-major matrix and the kernels shared by every re-ranker.
//!
//! Storage is `f64`. Reductions (dot products, row sums) run in a fixed
//! order per row, so results do not depend on how many threads execute
//! the per-row work.

use std::cmp::Ordering;
use std::ops::Range;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Rows whose Euclidean norm falls below this are left untouched by
/// [`l2_normalize_rows`].
pub const ZERO_NORM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data, rejecting wrong lengths and
    /// non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(format!(
                "data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite entry at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from nested rows. All rows must share one length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::dim(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    /// Internal constructor for kernels whose output is finite by construction.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics; an n x 0 matrix has no data to chunk
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    /// Copies a contiguous band of rows.
    pub fn row_range(&self, range: Range<usize>) -> Matrix {
        assert!(range.end <= self.rows, "row range out of bounds");
        let data = self.data[range.start * self.cols..range.end * self.cols].to_vec();
        Matrix::from_raw(range.len(), self.cols, data)
    }

    /// Copies a rectangular sub-block.
    pub fn block(&self, rows: Range<usize>, cols: Range<usize>) -> Matrix {
        assert!(rows.end <= self.rows && cols.end <= self.cols, "block out of bounds");
        let mut data = Vec::with_capacity(rows.len() * cols.len());
        for i in rows.clone() {
            data.extend_from_slice(&self.row(i)[cols.clone()]);
        }
        Matrix::from_raw(rows.len(), cols.len(), data)
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::dim(format!(
                "cannot stack {} columns on {} columns",
                other.cols, self.cols
            )));
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Matrix::from_raw(self.rows + other.rows, self.cols, data))
    }

    pub fn transpose(&self) -> Matrix {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Matrix::from_raw(self.cols, self.rows, data)
    }

    /// Elementwise sum.
    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    /// Elementwise (Hadamard) product.
    pub fn hadamard(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, factor: f64) -> Matrix {
        self.map(|v| v * factor)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix::from_raw(self.rows, self.cols, self.data.iter().map(|&v| f(v)).collect())
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::dim(format!(
                "shape mismatch {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Matrix::from_raw(self.rows, self.cols, data))
    }

    /// Largest absolute elementwise difference; `None` when shapes differ.
    pub fn max_abs_diff(&self, other: &Matrix) -> Option<f64> {
        (self.shape() == other.shape()).then(|| {
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (i + 1..self.cols).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    /// Applies `f` to every output row in parallel. `f` receives the row
    /// index and the mutable row slice.
    fn par_fill(rows: usize, cols: usize, f: impl Fn(usize, &mut [f64]) + Sync + Send) -> Matrix {
        let mut data = vec![0.0; rows * cols];
        if cols > 0 {
            data.par_chunks_mut(cols).enumerate().for_each(|(i, row)| f(i, row));
        }
        Matrix::from_raw(rows, cols, data)
    }
}

/// Dot product with a fixed eight-lane accumulation order.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

/// Scales each row to unit Euclidean norm.
///
/// Rows with norm below [`ZERO_NORM_EPS`] are copied unchanged; their count
/// is returned alongside the matrix.
pub fn l2_normalize_rows(m: &Matrix) -> Result<(Matrix, usize)> {
    if m.cols == 0 {
        return Err(Error::dim("cannot normalise a matrix with no columns"));
    }
    let mut zero_rows = 0;
    let mut data = Vec::with_capacity(m.data.len());
    for row in m.iter_rows() {
        let norm = dot(row, row).sqrt();
        if norm < ZERO_NORM_EPS {
            zero_rows += 1;
            data.extend_from_slice(row);
        } else {
            data.extend(row.iter().map(|v| v / norm));
        }
    }
    Ok((Matrix::from_raw(m.rows, m.cols, data), zero_rows))
}

/// Cosine similarity between every row of `a` and every row of `b`.
pub fn cosine_similarity(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.cols {
        return Err(Error::dim(format!(
            "cosine similarity needs equal widths, got {} and {}",
            a.cols, b.cols
        )));
    }
    let (na, _) = l2_normalize_rows(a)?;
    let (nb, _) = l2_normalize_rows(b)?;
    Ok(Matrix::par_fill(a.rows, b.rows, |i, out| {
        let ai = na.row(i);
        for (j, o) in out.iter_mut().enumerate() {
            *o = dot(ai, nb.row(j));
        }
    }))
}

/// Cosine similarity of `a` against itself. Only the upper triangle is
/// computed, so the result is exactly symmetric.
pub fn self_cosine_similarity(a: &Matrix) -> Result<Matrix> {
    let (na, _) = l2_normalize_rows(a)?;
    let n = a.rows;
    let mut s = Matrix::par_fill(n, n, |i, out| {
        let ai = na.row(i);
        for j in i..n {
            out[j] = dot(ai, na.row(j));
        }
    });
    for i in 0..n {
        for j in 0..i {
            s.data[i * n + j] = s.data[j * n + i];
        }
    }
    Ok(s)
}

/// Orders column indices by value descending, lower index first on ties.
#[inline]
fn rank_desc(row: &[f64], a: usize, b: usize) -> Ordering {
    row[b].total_cmp(&row[a]).then(a.cmp(&b))
}

/// Indices of the `k` largest entries of `row`, ties toward lower index.
/// The returned indices are in no particular order.
pub(crate) fn topk_indices(row: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    if k < row.len() {
        idx.select_nth_unstable_by(k, |&a, &b| rank_desc(row, a, b));
        idx.truncate(k);
    }
    idx
}

/// Indices of `row` sorted by value descending, ties toward lower index.
pub(crate) fn argsort_desc(row: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_unstable_by(|&a, &b| rank_desc(row, a, b));
    idx
}

fn check_k(s: &Matrix, k: usize) -> Result<()> {
    if k == 0 || k > s.cols {
        return Err(Error::param(format!(
            "top-k size {k} outside 1..={}",
            s.cols
        )));
    }
    Ok(())
}

/// Per row, marks the `k` largest entries with 1 and everything else with 0.
pub fn topk_binary(s: &Matrix, k: usize) -> Result<Matrix> {
    check_k(s, k)?;
    Ok(Matrix::par_fill(s.rows, s.cols, |i, out| {
        for j in topk_indices(s.row(i), k) {
            out[j] = 1.0;
        }
    }))
}

/// Per row, keeps the `k` largest entries and zeroes the rest.
pub fn topk_values(s: &Matrix, k: usize) -> Result<Matrix> {
    check_k(s, k)?;
    Ok(Matrix::par_fill(s.rows, s.cols, |i, out| {
        let row = s.row(i);
        for j in topk_indices(row, k) {
            out[j] = row[j];
        }
    }))
}

/// Divides each row by its sum. An all-zero row becomes the one-hot self
/// row (uniform `1/cols` when the matrix is not square).
pub fn row_normalize(m: &Matrix) -> Result<Matrix> {
    if let Some(pos) = m.data.iter().position(|&v| v < 0.0) {
        return Err(Error::Domain(format!(
            "row normalisation needs non-negative entries, found {} at ({}, {})",
            m.data[pos],
            pos / m.cols,
            pos % m.cols
        )));
    }
    let square = m.rows == m.cols;
    Ok(Matrix::par_fill(m.rows, m.cols, |i, out| {
        let row = m.row(i);
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            for (o, v) in out.iter_mut().zip(row) {
                *o = v / sum;
            }
        } else if square {
            out[i] = 1.0;
        } else {
            out.fill(1.0 / m.cols as f64);
        }
    }))
}

/// Standard matrix product. Zero entries of `a` are skipped, which makes
/// products with sparse neighbourhood operators cheap.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::dim(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    Ok(Matrix::par_fill(a.rows, b.cols, |i, out| {
        for (k, &aik) in a.row(i).iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            for (o, &bkj) in out.iter_mut().zip(b.row(k)) {
                *o += aik * bkj;
            }
        }
    }))
}
