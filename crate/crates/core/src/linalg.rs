//! Dense row-major matrices and the small amount of linear algebra the
//! surrogates need: Cholesky factorization with diagonal jitter escalation
//! and triangular solves.
//!
//! Row-major storage keeps every dot product in the factorization and the
//! solves contiguous, which is what makes repeated likelihood evaluations
//! affordable without a BLAS.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Builds a matrix from row slices; all rows must share one length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
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
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Lower Cholesky factor of a symmetric positive definite matrix, or `None`
/// if a non-positive pivot shows up.
pub fn cholesky(a: &Matrix) -> Option<Matrix> {
    assert_eq!(a.rows, a.cols, "cholesky needs a square matrix");
    let mut l = a.clone();
    if cholesky_in_place(&mut l) {
        Some(l)
    } else {
        None
    }
}

/// Factorizes in place: on success the lower triangle (diagonal included)
/// holds L and the strict upper triangle is zeroed. Only the lower
/// triangle of the input is read.
pub fn cholesky_in_place(a: &mut Matrix) -> bool {
    let n = a.rows;
    debug_assert_eq!(a.rows, a.cols);
    for i in 0..n {
        for j in 0..=i {
            let s = {
                let (head, tail) = a.data.split_at(i * n);
                let ri = &tail[..j];
                if i == j {
                    dot(ri, ri)
                } else {
                    dot(ri, &head[j * n..j * n + j])
                }
            };
            if i == j {
                let d = a.get(i, i) - s;
                if d <= 0.0 || !d.is_finite() {
                    return false;
                }
                a.set(i, j, libm::sqrt(d));
            } else {
                a.set(i, j, (a.get(i, j) - s) / a.get(j, j));
            }
        }
        for j in i + 1..n {
            a.set(i, j, 0.0);
        }
    }
    true
}

/// Factorizes `a + jitter * I`, escalating the jitter by factors of ten
/// (two escalations) when a pivot fails. Returns the factor together with
/// the jitter that finally worked.
pub fn cholesky_with_jitter(a: &Matrix, jitter: f64) -> Option<(Matrix, f64)> {
    let n = a.rows;
    for level in 0..3 {
        let j = jitter * libm::pow(10.0, level as f64);
        let mut shifted = a.clone();
        for i in 0..n {
            shifted.set(i, i, a.get(i, i) + j);
        }
        if let Some(l) = cholesky(&shifted) {
            return Some((l, j));
        }
    }
    None
}

/// Solves `L x = b` by forward substitution (`l` lower triangular).
pub fn solve_lower(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows;
    debug_assert_eq!(b.len(), n);
    let mut x = vec![0.0; n];
    for i in 0..n {
        let row = l.row(i);
        let s = dot(&row[..i], &x[..i]);
        x[i] = (b[i] - s) / row[i];
    }
    x
}

/// Solves `L^T x = b` by backward substitution (`l` lower triangular).
pub fn solve_lower_transposed(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows;
    debug_assert_eq!(b.len(), n);
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        x[i] /= l.get(i, i);
        let xi = x[i];
        // Column i of L below the diagonal, walked row by row.
        for j in 0..i {
            x[j] -= l.get(i, j) * xi;
        }
    }
    x
}

/// Solves `L L^T x = b` given the lower factor.
pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let y = solve_lower(l, b);
    solve_lower_transposed(l, &y)
}
