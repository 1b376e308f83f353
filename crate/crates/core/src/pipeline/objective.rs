//! The joint training objective on one minibatch.
//!
//! `L = L_rec + α·L_ia + β·L_pa`, with the contrastive loss standing in for
//! `L_ia` under [`LossMode::ContrastiveBaseline`]. The contrastive term sees
//! only batch rows observed in every view; fewer than two such rows make it
//! zero.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::config::{LossMode, TrainConfig};
use crate::alignment::{contrastive_loss, partial_sample_alignment_loss};
use crate::data::PairObservedIndex;
use crate::error::{Error, Result};
use crate::nn::{reconstruction_loss, AeGradients, ViewAutoencoder};
use crate::prototype::{prototype_alignment_loss, AlignmentState};

/// One view's slice of a minibatch.
#[derive(Debug, Clone)]
pub struct ViewBatch {
    /// `B × D_v` inputs after resample completion.
    pub inputs: Array2<f64>,
    /// Whether each batch row is the sample's own observation in this view
    /// (as opposed to a resampled stand-in).
    pub own: Vec<bool>,
}

/// Differentiable cluster means for one view.
///
/// `C_k = (base_sums_k + Σ_{batch rows r with assign[r] = k} h_r) / counts_k`.
/// `base_sums` carries the contribution of rows outside the batch, which
/// are held fixed.
#[derive(Debug, Clone)]
pub struct ClusterContext {
    pub base_sums: Array2<f64>,
    pub counts: Vec<usize>,
    pub batch_assign: Vec<Option<usize>>,
}

impl ClusterContext {
    fn centers(&self, h: &Array2<f64>) -> Result<Array2<f64>> {
        if self.batch_assign.len() != h.nrows() || self.base_sums.ncols() != h.ncols() {
            return Err(Error::invalid("cluster context does not match the batch"));
        }
        let mut c = self.base_sums.clone();
        for (row, a) in h.rows().into_iter().zip(&self.batch_assign) {
            if let Some(a) = *a {
                c.row_mut(a).scaled_add(1.0, &row);
            }
        }
        for (k, &n) in self.counts.iter().enumerate() {
            if n == 0 {
                return Err(Error::invalid(format!("cluster {k} has no members")));
            }
            c.row_mut(k).mapv_inplace(|x| x / n as f64);
        }
        Ok(c)
    }

    fn pull_back(&self, grad_centers: &Array2<f64>, out: &mut Array2<f64>, weight: f64) {
        for (mut row, a) in out.rows_mut().into_iter().zip(&self.batch_assign) {
            if let Some(a) = *a {
                row.scaled_add(weight / self.counts[a] as f64, &grad_centers.row(a));
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct JointBatch {
    pub views: Vec<ViewBatch>,
    /// Pair-observed rows, indexed within the batch.
    pub pairs: Vec<PairObservedIndex>,
    /// Required when the prototype term is active.
    pub clusters: Option<Vec<ClusterContext>>,
}

impl JointBatch {
    /// Batch-local pair indices from the `own` flags.
    pub fn pairs_from_own(views: &[ViewBatch]) -> Vec<PairObservedIndex> {
        let mut out = Vec::new();
        for i in 0..views.len() {
            for j in i + 1..views.len() {
                let rows = (0..views[i].own.len())
                    .filter(|&r| views[i].own[r] && views[j].own[r])
                    .collect();
                out.push(PairObservedIndex {
                    view_i: i,
                    view_j: j,
                    rows,
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLosses {
    pub rec: f64,
    pub ia: Option<f64>,
    pub cl: Option<f64>,
    pub pa: Option<f64>,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct JointGrads {
    pub autoencoders: Vec<AeGradients>,
    /// Gradient for each relaxed permutation, in `states` order; empty when
    /// the prototype term is inactive.
    pub relaxed: Vec<Array2<f64>>,
}

/// Evaluates the active loss terms and their gradients on one batch.
pub fn joint_objective(
    aes: &[ViewAutoencoder],
    batch: &JointBatch,
    states: &[AlignmentState],
    cfg: &TrainConfig,
) -> Result<(StepLosses, JointGrads)> {
    if aes.len() != batch.views.len() {
        return Err(Error::invalid("one autoencoder per batch view required"));
    }
    let mode: LossMode = cfg.loss_mode;

    let mut embeddings = Vec::with_capacity(aes.len());
    let mut recon_grads = Vec::with_capacity(aes.len());
    let mut tapes = Vec::with_capacity(aes.len());
    let mut rec = 0.0;
    for (ae, vb) in aes.iter().zip(&batch.views) {
        let (h, recon, tape) = ae.forward_taped(&vb.inputs)?;
        let (l, g) = reconstruction_loss(&vb.inputs, &recon)?;
        rec += l;
        embeddings.push(h);
        recon_grads.push(g);
        tapes.push(tape);
    }
    let mut grad_h: Vec<Array2<f64>> = embeddings.iter().map(|h| Array2::zeros(h.dim())).collect();
    let mut total = rec;

    let mut ia = None;
    if mode.uses_sample_alignment() {
        let l = partial_sample_alignment_loss(&embeddings, &batch.pairs)?;
        for (g, lg) in grad_h.iter_mut().zip(&l.grads) {
            g.scaled_add(cfg.alpha, lg);
        }
        total += cfg.alpha * l.value;
        ia = Some(l.value);
    }

    let mut cl = None;
    if mode.uses_contrastive() {
        // only rows that are true observations in every view form positives
        let rows: Vec<usize> = (0..batch.views[0].own.len())
            .filter(|&r| batch.views.iter().all(|vb| vb.own[r]))
            .collect();
        let value = if rows.len() < 2 {
            0.0
        } else {
            let sub: Vec<Array2<f64>> = embeddings.iter().map(|h| h.select(Axis(0), &rows)).collect();
            let l = contrastive_loss(&sub, cfg.tau)?;
            for (g, lg) in grad_h.iter_mut().zip(&l.grads) {
                for (src, &r) in rows.iter().enumerate() {
                    g.row_mut(r).scaled_add(cfg.alpha, &lg.row(src));
                }
            }
            l.value
        };
        total += cfg.alpha * value;
        cl = Some(value);
    }

    let mut pa = None;
    let mut relaxed = Vec::new();
    if mode.uses_prototype_alignment() {
        let clusters = batch
            .clusters
            .as_ref()
            .ok_or_else(|| Error::invalid("prototype term needs cluster context"))?;
        if clusters.len() != aes.len() {
            return Err(Error::invalid("one cluster context per view required"));
        }
        let centers = clusters
            .iter()
            .zip(&embeddings)
            .map(|(c, h)| c.centers(h))
            .collect::<Result<Vec<_>>>()?;
        let l = prototype_alignment_loss(&centers, states)?;
        for ((ctx, gc), gh) in clusters.iter().zip(&l.center_grads).zip(grad_h.iter_mut()) {
            ctx.pull_back(gc, gh, cfg.beta);
        }
        relaxed = l.relaxed_grads.into_iter().map(|g| g * cfg.beta).collect();
        total += cfg.beta * l.value;
        pa = Some(l.value);
    }

    let mut ae_grads = Vec::with_capacity(aes.len());
    for ((ae, tape), (gr, gh)) in aes.iter().zip(&tapes).zip(recon_grads.iter().zip(&grad_h)) {
        ae_grads.push(ae.backward(tape, gr, Some(gh))?.0);
    }

    Ok((
        StepLosses { rec, ia, cl, pa, total },
        JointGrads {
            autoencoders: ae_grads,
            relaxed,
        },
    ))
}
