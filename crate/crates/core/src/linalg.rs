//! Small dense linear algebra used by the one-step market code.

use std::fmt;
use std::ops::{Index, IndexMut};

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from row vectors. Returns `None` for ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Option<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return None;
        }
        Some(Matrix {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// `A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `Aᵀ y`
    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, yi) in y.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * yi;
            }
        }
        out
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries((0..self.rows).map(|i| self.row(i)))
            .finish()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Numerical rank by Gaussian elimination with partial pivoting.
///
/// A column contributes to the rank when its best remaining pivot is at
/// least `rel_tol` times the largest absolute entry of the matrix.
pub fn rank(a: &Matrix, rel_tol: f64) -> usize {
    let scale = a.max_abs();
    if scale == 0.0 {
        return 0;
    }
    let threshold = rel_tol * scale;
    let mut work = a.clone();
    let mut pivot_row = 0;
    for col in 0..work.cols() {
        if pivot_row == work.rows() {
            break;
        }
        let (best, best_abs) = (pivot_row..work.rows())
            .map(|r| (r, work[(r, col)].abs()))
            .fold((pivot_row, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best_abs < threshold {
            continue;
        }
        work.swap_rows(pivot_row, best);
        let pivot = work[(pivot_row, col)];
        for r in pivot_row + 1..work.rows() {
            let factor = work[(r, col)] / pivot;
            if factor != 0.0 {
                for c in col..work.cols() {
                    let v = work[(pivot_row, c)];
                    work[(r, c)] -= factor * v;
                }
            }
        }
        pivot_row += 1;
    }
    pivot_row
}

/// Solves the square system `A x = b` with partial pivoting. Returns `None`
/// when a pivot falls below `rel_tol` times the largest entry.
pub fn solve_square(a: &Matrix, b: &[f64], rel_tol: f64) -> Option<Vec<f64>> {
    let n = a.rows();
    if a.cols() != n || b.len() != n {
        return None;
    }
    let threshold = rel_tol * a.max_abs();
    let mut work = a.clone();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let best = (col..n).max_by(|&x, &y| {
            work[(x, col)]
                .abs()
                .partial_cmp(&work[(y, col)].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if work[(best, col)].abs() <= threshold {
            return None;
        }
        work.swap_rows(col, best);
        rhs.swap(col, best);
        for r in col + 1..n {
            let factor = work[(r, col)] / work[(col, col)];
            for c in col..n {
                let v = work[(col, c)];
                work[(r, c)] -= factor * v;
            }
            rhs[r] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|c| work[(r, c)] * x[c]).sum();
        x[r] = (rhs[r] - tail) / work[(r, r)];
    }
    Some(x)
}
