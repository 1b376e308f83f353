//! Per-view prototypes and their cross-view matching.
//!
//! Prototypes are k-means centres of a view's observed embeddings. Clusters
//! carry arbitrary labels in each view, so a permutation `P^(i,j)` is needed
//! before `C^(i)` and `C^(j)` can be compared: `P^(i,j) C^(j)` reorders view
//! `j`'s prototypes onto view `i`'s. The hard permutation comes from the
//! exact assignment solver; a relaxed copy is trained by gradient steps and
//! pulled back toward the doubly stochastic set by [`projection`].

pub mod hungarian;
pub mod kmeans;
pub mod projection;

pub use hungarian::{hungarian, permutation_matrix, Assignment};
pub use kmeans::{kmeans, kmeans_restarts, KMeansFit};
pub use projection::{constraint_residual, project, project_cycle};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    pub view_id: usize,
    /// `K × d`.
    pub centers: Array2<f64>,
    /// Cluster index of each observed row, in observed-row order.
    pub assignments: Vec<usize>,
    pub inertia: f64,
}

impl PrototypeSet {
    pub fn from_fit(view_id: usize, fit: KMeansFit) -> Self {
        Self {
            view_id,
            centers: fit.centers,
            assignments: fit.assignments,
            inertia: fit.inertia,
        }
    }
}

/// Matching between the prototypes of `view_i` and `view_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentState {
    pub view_i: usize,
    pub view_j: usize,
    /// Trainable `K × K` surrogate.
    pub relaxed: Array2<f64>,
    /// Hard permutation: `hard[k] = l` pairs view-i prototype `k` with view-j
    /// prototype `l`.
    pub hard: Vec<usize>,
}

impl AlignmentState {
    pub fn hard_matrix(&self) -> Array2<f64> {
        permutation_matrix(&self.hard)
    }

    /// Re-derives `hard` as the permutation carrying the most relaxed mass.
    pub fn round(&mut self) -> Result<()> {
        self.hard = hungarian(&self.relaxed.mapv(|x| -x))?.perm;
        Ok(())
    }
}

/// `D[k][l] = ‖ci_k − cj_l‖²`.
pub fn cost_matrix(ci: &Array2<f64>, cj: &Array2<f64>) -> Result<Array2<f64>> {
    if ci.ncols() != cj.ncols() {
        return Err(Error::invalid(format!(
            "prototype widths differ: {} vs {}",
            ci.ncols(),
            cj.ncols()
        )));
    }
    Ok(Array2::from_shape_fn((ci.nrows(), cj.nrows()), |(k, l)| {
        ci.row(k)
            .iter()
            .zip(cj.row(l).iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }))
}

/// Hard-matches every view pair `i < j` and seeds the relaxed matrices with
/// the hard solution.
pub fn align_prototypes(prototypes: &[Array2<f64>]) -> Result<Vec<AlignmentState>> {
    if prototypes.len() < 2 {
        return Err(Error::invalid("prototype alignment needs at least two views"));
    }
    let k = prototypes[0].nrows();
    if prototypes.iter().any(|c| c.nrows() != k) {
        return Err(Error::invalid("every view needs the same number of prototypes"));
    }
    let mut out = Vec::new();
    for i in 0..prototypes.len() {
        for j in i + 1..prototypes.len() {
            let a = hungarian(&cost_matrix(&prototypes[i], &prototypes[j])?)?;
            out.push(AlignmentState {
                view_i: i,
                view_j: j,
                relaxed: a.matrix(),
                hard: a.perm,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct PrototypeLoss {
    pub value: f64,
    /// Gradient for each view's prototype matrix.
    pub center_grads: Vec<Array2<f64>>,
    /// Gradient for each state's relaxed matrix, in `states` order.
    pub relaxed_grads: Vec<Array2<f64>>,
}

/// `Σ_{states} ‖C^(i) − P^(i,j) C^(j)‖²_F / K`, using the relaxed matrices.
pub fn prototype_alignment_loss(prototypes: &[Array2<f64>], states: &[AlignmentState]) -> Result<PrototypeLoss> {
    let mut center_grads: Vec<Array2<f64>> = prototypes.iter().map(|c| Array2::zeros(c.dim())).collect();
    let mut relaxed_grads = Vec::with_capacity(states.len());
    let mut value = 0.0;
    for s in states {
        let (i, j) = (s.view_i, s.view_j);
        let (ci, cj) = match (prototypes.get(i), prototypes.get(j)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::invalid(format!("state refers to missing view ({i}, {j})"))),
        };
        let k = ci.nrows();
        if ci.dim() != cj.dim() || s.relaxed.dim() != (k, k) {
            return Err(Error::invalid(format!(
                "shape mismatch: C_i {:?}, C_j {:?}, P {:?}",
                ci.dim(),
                cj.dim(),
                s.relaxed.dim()
            )));
        }
        let scale = 1.0 / k as f64;
        let resid = ci - &s.relaxed.dot(cj);
        value += scale * resid.iter().map(|x| x * x).sum::<f64>();
        center_grads[i].scaled_add(2.0 * scale, &resid);
        center_grads[j].scaled_add(-2.0 * scale, &s.relaxed.t().dot(&resid));
        relaxed_grads.push(resid.dot(&cj.t()) * (-2.0 * scale));
    }
    Ok(PrototypeLoss {
        value,
        center_grads,
        relaxed_grads,
    })
}

/// Cluster means of `embeddings` under fixed `assignments`.
pub fn centers_from_assignments(embeddings: &Array2<f64>, assignments: &[usize], k: usize) -> Result<Array2<f64>> {
    if assignments.len() != embeddings.nrows() {
        return Err(Error::invalid("one assignment per embedding row required"));
    }
    let mut centers = Array2::zeros((k, embeddings.ncols()));
    let mut counts = vec![0usize; k];
    for (h, &a) in embeddings.rows().into_iter().zip(assignments) {
        if a >= k {
            return Err(Error::invalid(format!("assignment {a} out of range for k = {k}")));
        }
        centers.row_mut(a).scaled_add(1.0, &h);
        counts[a] += 1;
    }
    for (c, &n) in counts.iter().enumerate() {
        if n == 0 {
            return Err(Error::invalid(format!("cluster {c} is empty")));
        }
        centers.row_mut(c).mapv_inplace(|x| x / n as f64);
    }
    Ok(centers)
}

/// Pulls a gradient on cluster means back to the member embeddings.
pub fn center_grad_to_embeddings(grad_centers: &Array2<f64>, assignments: &[usize], counts: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((assignments.len(), grad_centers.ncols()));
    for (mut row, &a) in out.rows_mut().into_iter().zip(assignments) {
        row.scaled_add(1.0 / counts[a] as f64, &grad_centers.row(a));
    }
    out
}
