//! Structure-embedding imputation.
//!
//! A sample missing in view `a` but observed in view `b` borrows the view-`a`
//! embedding of a neighbour: among samples observed in both `a` and `b`, the
//! one whose view-`b` embedding is most cosine-similar to the sample's own
//! view-`b` embedding. Rows are copied verbatim, never averaged.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::data::PairObservedIndex;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Observed,
    Imputed,
    Absent,
}

/// One filled cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborRecord {
    pub sample: usize,
    pub target_view: usize,
    pub donor_view: usize,
    pub neighbor: usize,
    /// Neighbour rank actually used (after clamping to the pool size).
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    /// Per view, `N × d`. Absent rows are zero.
    pub views: Vec<Array2<f64>>,
    /// `provenance[sample][view]`.
    pub provenance: Vec<Vec<Provenance>>,
    pub neighbor_log: Vec<NeighborRecord>,
}

impl EmbeddingSet {
    /// Wraps per-view embeddings, marking cells observed where `mask` is set
    /// and zeroing every other row.
    pub fn from_observed(mut views: Vec<Array2<f64>>, mask: &Array2<bool>) -> Result<Self> {
        if views.len() != mask.ncols() {
            return Err(Error::invalid("one embedding matrix per view required"));
        }
        for (v, h) in views.iter_mut().enumerate() {
            if h.nrows() != mask.nrows() {
                return Err(Error::invalid(format!("view {v} embedding has {} rows", h.nrows())));
            }
            for (r, mut row) in h.rows_mut().into_iter().enumerate() {
                if !mask[[r, v]] {
                    row.fill(0.0);
                }
            }
        }
        let provenance = mask
            .rows()
            .into_iter()
            .map(|row| {
                row.iter()
                    .map(|&b| if b { Provenance::Observed } else { Provenance::Absent })
                    .collect()
            })
            .collect();
        Ok(Self {
            views,
            provenance,
            neighbor_log: Vec::new(),
        })
    }

    pub fn n_samples(&self) -> usize {
        self.provenance.len()
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn is_complete(&self) -> bool {
        self.provenance.iter().flatten().all(|&p| p != Provenance::Absent)
    }

    fn observed(&self, s: usize, v: usize) -> bool {
        self.provenance[s][v] == Provenance::Observed
    }
}

/// Errors name the query row when it is degenerate, else the candidate.
fn cosine(query: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>, (s, r): (usize, usize)) -> Result<f64> {
    let a = query;
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    if na < 1e-12 {
        return Err(Error::DegenerateEmbedding { row: s });
    }
    if nb < 1e-12 {
        return Err(Error::DegenerateEmbedding { row: r });
    }
    Ok(a.dot(&b) / (na * nb))
}

fn find_pair(pairs: &[PairObservedIndex], a: usize, b: usize) -> Option<&PairObservedIndex> {
    pairs
        .iter()
        .find(|p| (p.view_i == a && p.view_j == b) || (p.view_i == b && p.view_j == a))
}

/// Fills every absent cell using the `rank`-th most similar donor (1-based).
///
/// The donor view is the observed view of the sample with the largest pool
/// of samples shared with the target view (ties: lowest view id). A rank
/// beyond the pool size is clamped to the pool's last element.
pub fn impute(emb: &EmbeddingSet, pairs: &[PairObservedIndex], rank: usize) -> Result<EmbeddingSet> {
    if rank == 0 {
        return Err(Error::invalid("neighbour rank is 1-based"));
    }
    let mut out = emb.clone();
    let mut clamped = 0usize;
    for s in 0..emb.n_samples() {
        let observed: Vec<usize> = (0..emb.n_views()).filter(|&v| emb.observed(s, v)).collect();
        if observed.is_empty() {
            return Err(Error::DataModel(format!("sample {s} is observed in no view")));
        }
        for a in (0..emb.n_views()).filter(|&v| !emb.observed(s, v)) {
            let mut best: Option<(usize, &PairObservedIndex)> = None;
            for &b in &observed {
                if let Some(p) = find_pair(pairs, a, b) {
                    if !p.is_empty() && best.is_none_or(|(_, q)| p.count() > q.count()) {
                        best = Some((b, p));
                    }
                }
            }
            let (b, pool) = best.ok_or(Error::ImputationInfeasible { sample: s })?;

            let hb = &emb.views[b];
            let query = hb.row(s);
            let mut scored = Vec::with_capacity(pool.count());
            for &r in &pool.rows {
                if !(emb.observed(r, a) && emb.observed(r, b)) {
                    return Err(Error::invalid(format!(
                        "pair index row {r} is not observed in views {a} and {b}"
                    )));
                }
                scored.push((cosine(query, hb.row(r), (s, r))?, r));
            }
            // most similar first, ties by lowest row
            scored.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
            let used = if rank > scored.len() {
                clamped += 1;
                scored.len()
            } else {
                rank
            };
            let neighbor = scored[used - 1].1;
            out.views[a].row_mut(s).assign(&emb.views[a].row(neighbor));
            out.provenance[s][a] = Provenance::Imputed;
            out.neighbor_log.push(NeighborRecord {
                sample: s,
                target_view: a,
                donor_view: b,
                neighbor,
                rank: used,
            });
        }
    }
    if clamped > 0 {
        log::warn!("neighbour rank {rank} exceeded the donor pool for {clamped} cells; used the pool's last element");
    }
    Ok(out)
}

/// Concatenates per-view embeddings in view order: `N × (V·d)`.
pub fn fuse(emb: &EmbeddingSet) -> Result<Array2<f64>> {
    if let Some((s, v)) = emb
        .provenance
        .iter()
        .enumerate()
        .find_map(|(s, row)| row.iter().position(|&p| p == Provenance::Absent).map(|v| (s, v)))
    {
        return Err(Error::invalid(format!("cell (sample {s}, view {v}) is still absent")));
    }
    let views: Vec<_> = emb.views.iter().map(|h| h.view()).collect();
    ndarray::concatenate(ndarray::Axis(1), &views).map_err(|e| Error::invalid(e.to_string()))
}
