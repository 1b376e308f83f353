//! Alternating projections keeping a relaxed permutation inside the set of
//! non-negative matrices with unit row and column sums.

use ndarray::{Array2, Axis};

/// `P − (1/n)(P1 − 1)1ᵀ`: unit row sums.
pub fn project_rows(p: &Array2<f64>) -> Array2<f64> {
    let n = p.ncols() as f64;
    let excess = p.sum_axis(Axis(1)) - 1.0;
    let mut out = p.clone();
    for (mut row, e) in out.rows_mut().into_iter().zip(excess) {
        row -= e / n;
    }
    out
}

/// `P − (1/n)1(1ᵀP − 1ᵀ)`: unit column sums.
pub fn project_cols(p: &Array2<f64>) -> Array2<f64> {
    let n = p.nrows() as f64;
    let excess = p.sum_axis(Axis(0)) - 1.0;
    let mut out = p.clone();
    for mut row in out.rows_mut() {
        row.zip_mut_with(&excess, |x, e| *x -= e / n);
    }
    out
}

/// `ReLU(P)`: non-negativity.
pub fn project_nonneg(p: &Array2<f64>) -> Array2<f64> {
    p.mapv(|x| x.max(0.0))
}

/// One cycle: rows, then columns, then non-negativity.
pub fn project_cycle(p: &Array2<f64>) -> Array2<f64> {
    project_nonneg(&project_cols(&project_rows(p)))
}

/// Largest violation among negativity and row/column-sum deviation.
pub fn constraint_residual(p: &Array2<f64>) -> f64 {
    let neg = p.iter().fold(0.0f64, |m, &x| m.max(-x));
    let rows = p.sum_axis(Axis(1)).iter().fold(0.0f64, |m, &s| m.max((s - 1.0).abs()));
    let cols = p.sum_axis(Axis(0)).iter().fold(0.0f64, |m, &s| m.max((s - 1.0).abs()));
    neg.max(rows).max(cols)
}

/// Runs up to `max_cycles` cycles, stopping once the residual is at most
/// `tol`. Returns the matrix and the number of cycles applied.
pub fn project(p: &Array2<f64>, max_cycles: usize, tol: f64) -> (Array2<f64>, usize) {
    let mut cur = p.clone();
    for cycle in 0..max_cycles {
        if constraint_residual(&cur) <= tol {
            return (cur, cycle);
        }
        cur = project_cycle(&cur);
    }
    (cur, max_cycles)
}
