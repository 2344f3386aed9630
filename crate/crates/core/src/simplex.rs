//! Phase-one simplex for `{x : A x = b, x ≥ 0}` with Bland's rule.
//!
//! On infeasibility the final tableau's duals give a Farkas certificate
//! `y` with `Aᵀ y ≥ 0` and `bᵀ y < 0`.

use crate::linalg::{dot, Matrix};

const MAX_PIVOTS: usize = 50_000;

#[derive(Debug, Clone, PartialEq)]
pub enum PhaseOne {
    Feasible {
        /// A basic feasible solution.
        x: Vec<f64>,
        /// Column indices of the original variables left in the basis.
        basis: Vec<usize>,
    },
    Infeasible {
        /// Farkas vector: `Aᵀ y ≥ 0`, `bᵀ y = -infeasibility < 0`.
        y: Vec<f64>,
        /// Optimal phase-one objective (sum of artificials).
        infeasibility: f64,
    },
}

struct Tableau {
    /// `m` constraint rows of width `n + m + 1`; the last entry is the rhs.
    body: Matrix,
    /// Reduced costs of the phase-one objective, width `n + m`.
    reduced: Vec<f64>,
    basis: Vec<usize>,
    n: usize,
}

impl Tableau {
    fn new(a: &Matrix, b: &[f64]) -> (Self, Vec<f64>) {
        let (m, n) = (a.rows(), a.cols());
        let width = n + m + 1;
        let mut body = Matrix::zeros(m, width);
        let mut signs = vec![1.0; m];
        for i in 0..m {
            let s = if b[i] < 0.0 { -1.0 } else { 1.0 };
            signs[i] = s;
            let row = body.row_mut(i);
            for (dst, src) in row[..n].iter_mut().zip(a.row(i)) {
                *dst = s * src;
            }
            row[n + i] = 1.0;
            row[width - 1] = s * b[i];
        }
        // c = (0, 1) with every artificial basic: d_j = -Σ_i T_ij for originals.
        let mut reduced = vec![0.0; n + m];
        for i in 0..m {
            for (d, t) in reduced[..n].iter_mut().zip(&body.row(i)[..n]) {
                *d -= t;
            }
        }
        let basis = (n..n + m).collect();
        (
            Tableau {
                body,
                reduced,
                basis,
                n,
            },
            signs,
        )
    }

    fn rhs(&self, i: usize) -> f64 {
        self.body[(i, self.body.cols() - 1)]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let width = self.body.cols();
        let p = self.body[(row, col)];
        for v in self.body.row_mut(row) {
            *v /= p;
        }
        let pivot_row = self.body.row(row).to_vec();
        for r in 0..self.body.rows() {
            if r == row {
                continue;
            }
            let factor = self.body[(r, col)];
            if factor != 0.0 {
                for (v, pv) in self.body.row_mut(r).iter_mut().zip(&pivot_row) {
                    *v -= factor * pv;
                }
                self.body[(r, col)] = 0.0;
            }
        }
        let factor = self.reduced[col];
        if factor != 0.0 {
            for (d, pv) in self.reduced.iter_mut().zip(&pivot_row[..width - 1]) {
                *d -= factor * pv;
            }
            self.reduced[col] = 0.0;
        }
        self.basis[row] = col;
    }

    /// Runs Bland's rule to optimality.
    fn optimize(&mut self, pivot_tol: f64) {
        for _ in 0..MAX_PIVOTS {
            let Some(enter) = self.reduced.iter().position(|&d| d < -pivot_tol) else {
                return;
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.body.rows() {
                let coef = self.body[(r, enter)];
                if coef <= pivot_tol {
                    continue;
                }
                let ratio = self.rhs(r).max(0.0) / coef;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((best, best_ratio)) => {
                        let tie = (ratio - best_ratio).abs() <= pivot_tol * (1.0 + best_ratio);
                        if (!tie && ratio < best_ratio)
                            || (tie && self.basis[r] < self.basis[best])
                        {
                            Some((r, ratio))
                        } else {
                            Some((best, best_ratio))
                        }
                    }
                };
            }
            match leave {
                Some((row, _)) => self.pivot(row, enter),
                // Phase one is bounded below by zero, so an unbounded ray
                // only appears through round-off; treat the column as priced out.
                None => self.reduced[enter] = 0.0,
            }
        }
    }
}

/// Solves the phase-one problem `min Σ a` s.t. `A x + a = b`, `x, a ≥ 0`.
///
/// `feas_tol` bounds the phase-one objective accepted as feasible.
pub fn phase_one(a: &Matrix, b: &[f64], feas_tol: f64) -> PhaseOne {
    assert_eq!(a.rows(), b.len(), "rhs length must match row count");
    let (m, n) = (a.rows(), a.cols());
    let scale = a.max_abs().max(1.0);
    let pivot_tol = 1e-12 * scale;

    let (mut tab, signs) = Tableau::new(a, b);
    tab.optimize(pivot_tol);

    let infeasibility: f64 = (0..m)
        .filter(|&i| tab.basis[i] >= n)
        .map(|i| tab.rhs(i).max(0.0))
        .sum();

    if infeasibility <= feas_tol {
        let mut x = vec![0.0; n];
        let mut basis = Vec::new();
        for (i, &j) in tab.basis.iter().enumerate() {
            if j < tab.n {
                x[j] = tab.rhs(i).max(0.0);
                basis.push(j);
            }
        }
        basis.sort_unstable();
        PhaseOne::Feasible { x, basis }
    } else {
        // Dual of the flipped system: y'_k = c_k - d_{n+k} = 1 - d_{n+k}.
        // Optimality gives A'ᵀ y' ≤ 0 and b'ᵀ y' = infeasibility > 0, so the
        // certificate is -y' mapped back through the row signs.
        let y: Vec<f64> = (0..m)
            .map(|k| -signs[k] * (1.0 - tab.reduced[n + k]))
            .collect();
        let infeasibility = -dot(&y, b);
        PhaseOne::Infeasible { y, infeasibility }
    }
}
