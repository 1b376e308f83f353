use ndarray::Array2;

use crate::error::{Error, Result};

/// Row-to-column assignment minimising total cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `perm[row] = column`.
    pub perm: Vec<usize>,
    pub cost: f64,
}

impl Assignment {
    /// Binary permutation matrix with `P[row][perm[row]] = 1`.
    pub fn matrix(&self) -> Array2<f64> {
        permutation_matrix(&self.perm)
    }
}

pub fn permutation_matrix(perm: &[usize]) -> Array2<f64> {
    let k = perm.len();
    let mut p = Array2::zeros((k, k));
    for (r, &c) in perm.iter().enumerate() {
        p[[r, c]] = 1.0;
    }
    p
}

/// Exact square linear assignment (shortest augmenting paths with dual
/// potentials, O(n³)).
pub fn hungarian(cost: &Array2<f64>) -> Result<Assignment> {
    let (n, m) = cost.dim();
    if n != m {
        return Err(Error::invalid(format!("cost matrix must be square, got {n}×{m}")));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("cost matrix has a non-finite entry"));
    }
    if n == 0 {
        return Ok(Assignment {
            perm: vec![],
            cost: 0.0,
        });
    }

    // 1-based arrays; column 0 is the virtual start.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut perm = vec![0; n];
    for j in 1..=n {
        perm[row_of[j] - 1] = j - 1;
    }
    let total = perm.iter().enumerate().map(|(r, &c)| cost[[r, c]]).sum();
    Ok(Assignment { perm, cost: total })
}
