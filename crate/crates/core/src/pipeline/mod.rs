//! Two-stage training, imputation, fusion and evaluation.
//!
//! 1. [`pretrain`]: each view's autoencoder fits its own observed rows
//!    (missing rows are filled by resampling observed ones).
//! 2. [`align_train`]: joint training on reconstruction plus the active
//!    alignment terms. Prototypes and their matchings are refreshed once per
//!    epoch; cluster assignments stay frozen within the epoch.
//! 3. [`run`]: impute missing embeddings, concatenate views, cluster with
//!    k-means and score against labels when present.

mod config;
mod objective;

pub use config::{LossMode, TrainConfig};
pub use objective::{joint_objective, ClusterContext, JointBatch, JointGrads, StepLosses, ViewBatch};

use std::time::Instant;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{all_pairs, resample_complete, MultiViewDataset};
use crate::error::{Error, Result};
use crate::imputation::{fuse, impute, EmbeddingSet, NeighborRecord};
use crate::metrics::ClusteringResult;
use crate::nn::{reconstruction_loss, AdamConfig, AdamState, ParamSlot, ViewAutoencoder};
use crate::prototype::{align_prototypes, kmeans_restarts, project, AlignmentState, PrototypeSet};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Pretrain,
    Align,
}

/// Epoch means of each loss component. Inactive terms are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub stage: Stage,
    pub epoch: usize,
    pub rec: f64,
    pub ia: Option<f64>,
    pub cl: Option<f64>,
    pub pa: Option<f64>,
    pub total: f64,
}

fn check_compatible(ds: &MultiViewDataset, cfg: &TrainConfig) -> Result<()> {
    cfg.validate()?;
    if ds.n_views() < 2 && cfg.loss_mode != LossMode::RecOnly {
        return Err(Error::invalid("alignment losses need at least two views"));
    }
    Ok(())
}

pub fn init_autoencoders(ds: &MultiViewDataset, cfg: &TrainConfig) -> Vec<ViewAutoencoder> {
    (0..ds.n_views())
        .map(|v| {
            let mut rng = seed::rng(cfg.seed, "init", &[v as u64]);
            ViewAutoencoder::new(v, ds.view_dim(v), &cfg.hidden, cfg.d, &mut rng)
        })
        .collect()
}

/// Per-view `N × d` embeddings of observed rows; unobserved rows are zero
/// and their features are never touched.
pub fn embed_observed(ds: &MultiViewDataset, aes: &[ViewAutoencoder]) -> Result<Vec<Array2<f64>>> {
    aes.iter()
        .enumerate()
        .map(|(v, ae)| {
            let rows = ds.observed_rows(v);
            let h = ae.encode(&ds.view(v).select(Axis(0), &rows))?;
            let mut out = Array2::zeros((ds.n_samples(), ae.embedding_dim()));
            for (src, &r) in rows.iter().enumerate() {
                out.row_mut(r).assign(&h.row(src));
            }
            Ok(out)
        })
        .collect()
}

fn shuffled(n: usize, cfg: &TrainConfig, stream: &str, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(cfg.seed, stream, &[epoch as u64]));
    order
}

fn resampled(ds: &MultiViewDataset, cfg: &TrainConfig, stream: &str, epoch: usize) -> Result<Vec<Vec<usize>>> {
    let s = seed::derive(cfg.seed, stream, &[epoch as u64]);
    (0..ds.n_views()).map(|v| resample_complete(ds, v, s)).collect()
}

fn adam_for(ae: &ViewAutoencoder, lr: f64) -> AdamState {
    AdamState::new(AdamConfig::with_lr(lr), &ae.tensor_sizes())
}

fn diverged(what: &str, stage: &str, epoch: usize) -> Error {
    Error::Divergence {
        tensor: format!("{what} at {stage} epoch {epoch}"),
    }
}

#[derive(Debug, Clone)]
pub struct Pretrained {
    pub autoencoders: Vec<ViewAutoencoder>,
    pub curve: Vec<EpochLoss>,
}

/// Fits every view's autoencoder on its resample-completed rows.
pub fn pretrain(ds: &MultiViewDataset, cfg: &TrainConfig) -> Result<Pretrained> {
    check_compatible(ds, cfg)?;
    let mut aes = init_autoencoders(ds, cfg);
    let mut adams: Vec<AdamState> = aes.iter().map(|ae| adam_for(ae, cfg.lr_pretrain)).collect();
    let mut curve = Vec::with_capacity(cfg.pretrain_epochs);

    for epoch in 0..cfg.pretrain_epochs {
        let fill = resampled(ds, cfg, "pretrain-resample", epoch)?;
        let order = shuffled(ds.n_samples(), cfg, "pretrain-shuffle", epoch);
        let mut sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let mut batch_loss = 0.0;
            for (v, (ae, adam)) in aes.iter_mut().zip(&mut adams).enumerate() {
                let rows: Vec<usize> = chunk.iter().map(|&s| fill[v][s]).collect();
                let x = ds.view(v).select(Axis(0), &rows);
                let (_, recon, tape) = ae.forward_taped(&x)?;
                let (l, g) = reconstruction_loss(&x, &recon)?;
                let (grads, _) = ae.backward(&tape, &g, None)?;
                adam.step(&mut ae.param_slots(&grads))?;
                batch_loss += l;
            }
            sum += batch_loss;
            batches += 1;
        }
        let rec = sum / batches as f64;
        if !rec.is_finite() {
            return Err(diverged("reconstruction loss", "pretrain", epoch));
        }
        curve.push(EpochLoss {
            stage: Stage::Pretrain,
            epoch,
            rec,
            ia: None,
            cl: None,
            pa: None,
            total: rec,
        });
    }
    Ok(Pretrained {
        autoencoders: aes,
        curve,
    })
}

/// Observed-row k-means per view on the given embeddings, best of
/// `restarts`.
pub fn view_prototypes(
    ds: &MultiViewDataset,
    embeddings: &[Array2<f64>],
    restarts: usize,
    seed_base: u64,
) -> Result<Vec<PrototypeSet>> {
    embeddings
        .iter()
        .enumerate()
        .map(|(v, h)| {
            let obs = h.select(Axis(0), &ds.observed_rows(v));
            let fit = kmeans_restarts(
                &obs,
                ds.n_clusters(),
                restarts,
                seed::derive(seed_base, "view-kmeans", &[v as u64]),
            )?;
            Ok(PrototypeSet::from_fit(v, fit))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Aligned {
    pub autoencoders: Vec<ViewAutoencoder>,
    pub curve: Vec<EpochLoss>,
    /// Prototypes of the final embeddings.
    pub prototypes: Vec<PrototypeSet>,
    /// Hard matchings of the final prototypes for every pair `i < j`.
    pub states: Vec<AlignmentState>,
}

#[derive(Default)]
struct Accum {
    n: usize,
    rec: f64,
    ia: f64,
    cl: f64,
    pa: f64,
    total: f64,
}

impl Accum {
    fn add(&mut self, s: &StepLosses) {
        self.n += 1;
        self.rec += s.rec;
        self.ia += s.ia.unwrap_or(0.0);
        self.cl += s.cl.unwrap_or(0.0);
        self.pa += s.pa.unwrap_or(0.0);
        self.total += s.total;
    }

    fn finish(&self, epoch: usize, mode: LossMode) -> EpochLoss {
        let n = self.n as f64;
        EpochLoss {
            stage: Stage::Align,
            epoch,
            rec: self.rec / n,
            ia: mode.uses_sample_alignment().then(|| self.ia / n),
            cl: mode.uses_contrastive().then(|| self.cl / n),
            pa: mode.uses_prototype_alignment().then(|| self.pa / n),
            total: self.total / n,
        }
    }
}

/// Per-epoch frozen clustering of one view.
struct EpochClusters {
    /// Cluster of each global row (None when unobserved).
    assign: Vec<Option<usize>>,
    sums: Array2<f64>,
    counts: Vec<usize>,
}

impl EpochClusters {
    fn new(ds: &MultiViewDataset, v: usize, h: &Array2<f64>, set: &PrototypeSet) -> Self {
        let k = ds.n_clusters();
        let mut assign = vec![None; ds.n_samples()];
        let mut sums = Array2::zeros((k, h.ncols()));
        let mut counts = vec![0; k];
        for (&r, &a) in ds.observed_rows(v).iter().zip(&set.assignments) {
            assign[r] = Some(a);
            sums.row_mut(a).scaled_add(1.0, &h.row(r));
            counts[a] += 1;
        }
        Self { assign, sums, counts }
    }

    fn context(&self, chunk: &[usize], cached: &Array2<f64>) -> ClusterContext {
        let mut base = self.sums.clone();
        let batch_assign: Vec<Option<usize>> = chunk.iter().map(|&s| self.assign[s]).collect();
        for (&s, a) in chunk.iter().zip(&batch_assign) {
            if let Some(a) = *a {
                base.row_mut(a).scaled_add(-1.0, &cached.row(s));
            }
        }
        ClusterContext {
            base_sums: base,
            counts: self.counts.clone(),
            batch_assign,
        }
    }
}

/// Joint training on the active loss terms, continuing from `aes`.
pub fn align_train(ds: &MultiViewDataset, aes: Vec<ViewAutoencoder>, cfg: &TrainConfig) -> Result<Aligned> {
    check_compatible(ds, cfg)?;
    let mut aes = aes;
    if aes.len() != ds.n_views() {
        return Err(Error::invalid("one autoencoder per view required"));
    }
    let mode = cfg.loss_mode;
    let mut adams: Vec<AdamState> = aes.iter().map(|ae| adam_for(ae, cfg.lr_align)).collect();
    let mut curve = Vec::with_capacity(cfg.align_epochs);

    for epoch in 0..cfg.align_epochs {
        let cached = embed_observed(ds, &aes)?;
        let (clusters, mut states) = if mode.uses_prototype_alignment() {
            let sets = view_prototypes(
                ds,
                &cached,
                cfg.prototype_restarts,
                seed::derive(cfg.seed, "align-kmeans", &[epoch as u64]),
            )?;
            let centers: Vec<Array2<f64>> = sets.iter().map(|s| s.centers.clone()).collect();
            let clusters: Vec<EpochClusters> = sets
                .iter()
                .enumerate()
                .map(|(v, s)| EpochClusters::new(ds, v, &cached[v], s))
                .collect();
            (clusters, align_prototypes(&centers)?)
        } else {
            (Vec::new(), Vec::new())
        };
        let mut p_adams: Vec<AdamState> = states
            .iter()
            .map(|s| AdamState::new(AdamConfig::with_lr(cfg.lr_align), &[s.relaxed.len()]))
            .collect();

        let fill = resampled(ds, cfg, "align-resample", epoch)?;
        let order = shuffled(ds.n_samples(), cfg, "align-shuffle", epoch);
        let mut acc = Accum::default();
        for chunk in order.chunks(cfg.batch_size) {
            let views: Vec<ViewBatch> = (0..ds.n_views())
                .map(|v| {
                    let rows: Vec<usize> = chunk.iter().map(|&s| fill[v][s]).collect();
                    ViewBatch {
                        inputs: ds.view(v).select(Axis(0), &rows),
                        own: chunk.iter().map(|&s| ds.is_observed(s, v)).collect(),
                    }
                })
                .collect();
            let pairs = JointBatch::pairs_from_own(&views);
            let batch = JointBatch {
                views,
                pairs,
                clusters: mode
                    .uses_prototype_alignment()
                    .then(|| clusters.iter().zip(&cached).map(|(c, h)| c.context(chunk, h)).collect()),
            };
            let (losses, grads) = joint_objective(&aes, &batch, &states, cfg)?;
            for ((ae, adam), g) in aes.iter_mut().zip(&mut adams).zip(&grads.autoencoders) {
                adam.step(&mut ae.param_slots(g))?;
            }
            for ((state, adam), g) in states.iter_mut().zip(&mut p_adams).zip(&grads.relaxed) {
                let name = format!("relaxed P({},{})", state.view_i, state.view_j);
                adam.step(&mut [ParamSlot {
                    name,
                    value: state.relaxed.as_slice_mut().expect("standard layout"),
                    grad: g.as_slice().expect("standard layout"),
                }])?;
                state.relaxed = project(&state.relaxed, cfg.projection_cycles, cfg.projection_tol).0;
            }
            acc.add(&losses);
        }
        let e = acc.finish(epoch, mode);
        if !e.total.is_finite() {
            return Err(diverged("joint loss", "align", epoch));
        }
        curve.push(e);
    }

    let final_emb = embed_observed(ds, &aes)?;
    let prototypes = view_prototypes(
        ds,
        &final_emb,
        cfg.prototype_restarts,
        seed::derive(cfg.seed, "final-prototypes", &[]),
    )?;
    let centers: Vec<Array2<f64>> = prototypes.iter().map(|p| p.centers.clone()).collect();
    let states = if ds.n_views() >= 2 {
        align_prototypes(&centers)?
    } else {
        Vec::new()
    };
    Ok(Aligned {
        autoencoders: aes,
        curve,
        prototypes,
        states,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationRecord {
    pub view_i: usize,
    pub view_j: usize,
    /// `perm[k] = l`: prototype `k` of view i matches prototype `l` of view j.
    pub perm: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub acc: f64,
    pub nmi: f64,
    pub fmeasure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationDigest {
    pub imputed_cells: usize,
    /// Cells whose requested rank exceeded the donor pool.
    pub clamped_cells: usize,
    pub log: Vec<NeighborRecord>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub pretrain_ms: f64,
    pub align_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: TrainConfig,
    pub n_samples: usize,
    pub n_views: usize,
    pub n_clusters: usize,
    pub missing_fraction: f64,
    /// `pretrain_epochs + align_epochs` entries.
    pub curve: Vec<EpochLoss>,
    pub permutations: Vec<PermutationRecord>,
    pub metrics: Option<Scores>,
    pub imputation: ImputationDigest,
    pub timing: Timing,
}

impl RunReport {
    /// Copy with timing zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        Self {
            timing: Timing::default(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub autoencoders: Vec<ViewAutoencoder>,
    pub embeddings: EmbeddingSet,
    /// `N × (V·d)` concatenated embeddings.
    pub fused: Array2<f64>,
    pub predicted: Vec<usize>,
    /// Final k-means centres in fused space.
    pub centers: Array2<f64>,
    pub prototypes: Vec<PrototypeSet>,
}

/// Pretrain, align, impute, fuse, cluster and score.
pub fn run(ds: &MultiViewDataset, cfg: &TrainConfig) -> Result<RunOutput> {
    let start = Instant::now();
    let pre = pretrain(ds, cfg).map_err(|e| e.in_stage("pretrain"))?;
    let pretrain_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut out = run_from_pretrained(ds, cfg, pre)?;
    out.report.timing.pretrain_ms = pretrain_ms;
    out.report.timing.align_ms -= pretrain_ms;
    out.report.timing.total_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(out)
}

/// Imputation, fusion, final clustering and scoring for trained
/// autoencoders.
#[derive(Debug, Clone)]
pub struct Finished {
    pub embeddings: EmbeddingSet,
    pub fused: Array2<f64>,
    pub fit: crate::prototype::KMeansFit,
    pub metrics: Option<Scores>,
}

pub fn finish(ds: &MultiViewDataset, aes: &[ViewAutoencoder], cfg: &TrainConfig) -> Result<Finished> {
    let embeddings = (|| {
        let emb = EmbeddingSet::from_observed(embed_observed(ds, aes)?, ds.mask())?;
        impute(&emb, &all_pairs(ds), cfg.rank)
    })()
    .map_err(|e| e.in_stage("impute"))?;
    let fused = fuse(&embeddings).map_err(|e| e.in_stage("fuse"))?;
    let fit = kmeans_restarts(
        &fused,
        ds.n_clusters(),
        cfg.final_restarts,
        seed::derive(cfg.seed, "final-kmeans", &[]),
    )
    .map_err(|e| e.in_stage("cluster"))?;
    let metrics = match ds.labels() {
        Some(truth) => {
            let r = ClusteringResult::evaluate(&fit.assignments, truth).map_err(|e| e.in_stage("evaluate"))?;
            Some(Scores {
                acc: r.acc,
                nmi: r.nmi,
                fmeasure: r.fmeasure,
            })
        }
        None => None,
    };
    Ok(Finished {
        embeddings,
        fused,
        fit,
        metrics,
    })
}

/// Everything after pretraining; `pre` may come from a checkpoint.
pub fn run_from_pretrained(ds: &MultiViewDataset, cfg: &TrainConfig, pre: Pretrained) -> Result<RunOutput> {
    let start = Instant::now();
    let aligned = align_train(ds, pre.autoencoders, cfg).map_err(|e| e.in_stage("align"))?;
    let align_ms = start.elapsed().as_secs_f64() * 1e3;

    let done = finish(ds, &aligned.autoencoders, cfg)?;
    let finished = done.embeddings;
    let fit = done.fit;
    let metrics = done.metrics;

    let clamped = finished.neighbor_log.iter().filter(|r| r.rank < cfg.rank).count();
    let mut curve = pre.curve;
    curve.extend(aligned.curve);
    let report = RunReport {
        config: cfg.clone(),
        n_samples: ds.n_samples(),
        n_views: ds.n_views(),
        n_clusters: ds.n_clusters(),
        missing_fraction: ds.missing_fraction(),
        curve,
        permutations: aligned
            .states
            .iter()
            .map(|s| PermutationRecord {
                view_i: s.view_i,
                view_j: s.view_j,
                perm: s.hard.clone(),
            })
            .collect(),
        metrics,
        imputation: ImputationDigest {
            imputed_cells: finished.neighbor_log.len(),
            clamped_cells: clamped,
            log: finished.neighbor_log.clone(),
        },
        timing: Timing {
            pretrain_ms: 0.0,
            align_ms,
            total_ms: start.elapsed().as_secs_f64() * 1e3,
        },
    };

    Ok(RunOutput {
        report,
        autoencoders: aligned.autoencoders,
        embeddings: finished,
        fused: done.fused,
        predicted: fit.assignments,
        centers: fit.centers,
        prototypes: aligned.prototypes,
    })
}

/// Re-runs imputation, fusion and clustering of a finished run at another
/// neighbour rank. Training does not depend on the rank, so this equals a
/// full [`run`] with `rank` set, apart from timing.
pub fn with_rank(ds: &MultiViewDataset, out: &RunOutput, rank: usize) -> Result<RunOutput> {
    let cfg = TrainConfig {
        rank,
        ..out.report.config.clone()
    };
    cfg.validate()?;
    let start = Instant::now();
    let done = finish(ds, &out.autoencoders, &cfg)?;
    let log = done.embeddings.neighbor_log.clone();
    let report = RunReport {
        config: cfg,
        metrics: done.metrics,
        imputation: ImputationDigest {
            imputed_cells: log.len(),
            clamped_cells: log.iter().filter(|r| r.rank < rank).count(),
            log,
        },
        timing: Timing {
            total_ms: out.report.timing.total_ms - out.report.timing.align_ms - out.report.timing.pretrain_ms
                + start.elapsed().as_secs_f64() * 1e3,
            ..out.report.timing
        },
        ..out.report.clone()
    };
    Ok(RunOutput {
        report,
        autoencoders: out.autoencoders.clone(),
        embeddings: done.embeddings,
        fused: done.fused,
        predicted: done.fit.assignments,
        centers: done.fit.centers,
        prototypes: out.prototypes.clone(),
    })
}
