//! Random finite-difference instances for each loss, on autoencoders small
//! enough (≤ 200 parameters each) for exhaustive central differences.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;

use cpspan::alignment::{contrastive_loss, partial_sample_alignment_loss};
use cpspan::data::PairObservedIndex;
use cpspan::nn::{reconstruction_loss, ViewAutoencoder};
use cpspan::pipeline::{joint_objective, ClusterContext, JointBatch, LossMode, TrainConfig, ViewBatch};
use cpspan::prototype::{
    center_grad_to_embeddings, centers_from_assignments, prototype_alignment_loss, AlignmentState,
};

use super::*;

pub const LOSSES: [&str; 6] = [
    "reconstruction",
    "contrastive",
    "partial-sample alignment",
    "prototype alignment",
    "joint (cpspan)",
    "joint (contrastive-baseline)",
];

const HIDDEN: [usize; 1] = [6];
const D: usize = 3;
const B: usize = 7;

struct Instance {
    aes: Vec<ViewAutoencoder>,
    inputs: Vec<Array2<f64>>,
}

fn instance(seed: u64, label: &str) -> (Instance, ChaCha8Rng) {
    let mut r = rng(seed, label);
    let v = r.random_range(2..=3);
    let dims: Vec<usize> = (0..v).map(|_| r.random_range(3..=5)).collect();
    let aes = tiny_aes(&mut r, &dims, &HIDDEN, D);
    for ae in &aes {
        assert!(ae.param_count() <= 200, "{} parameters", ae.param_count());
    }
    let inputs = dims.iter().map(|&dim| uniform(&mut r, B, dim, -1.5, 1.5)).collect();
    (Instance { aes, inputs }, r)
}

fn random_states(r: &mut ChaCha8Rng, v: usize, k: usize) -> Vec<AlignmentState> {
    let mut out = Vec::new();
    for i in 0..v {
        for j in i + 1..v {
            let mut hard: Vec<usize> = (0..k).collect();
            hard.shuffle(r);
            out.push(AlignmentState {
                view_i: i,
                view_j: j,
                relaxed: uniform(r, k, k, 0.0, 1.0),
                hard,
            });
        }
    }
    out
}

fn covering_assignment(r: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut a: Vec<usize> = (0..n).map(|i| i % k).collect();
    a.shuffle(r);
    a
}

fn pairs_all_rows(r: &mut ChaCha8Rng, v: usize) -> Vec<PairObservedIndex> {
    let mut out = Vec::new();
    for i in 0..v {
        for j in i + 1..v {
            let rows: Vec<usize> = (0..B).filter(|_| r.random_bool(0.7)).collect();
            out.push(PairObservedIndex {
                view_i: i,
                view_j: j,
                rows,
            });
        }
    }
    out
}

pub fn reconstruction(seed: u64) -> f64 {
    let (inst, _) = instance(seed, "gc-rec");
    let loss = |aes: &[ViewAutoencoder]| -> f64 {
        aes.iter()
            .zip(&inst.inputs)
            .map(|(ae, x)| {
                reconstruction_loss(x, &ae.decode(&ae.encode(x).unwrap()).unwrap())
                    .unwrap()
                    .0
            })
            .sum()
    };
    let analytic: Vec<_> = inst
        .aes
        .iter()
        .zip(&inst.inputs)
        .map(|(ae, x)| {
            let (_, recon, tape) = ae.forward_taped(x).unwrap();
            let (_, g) = reconstruction_loss(x, &recon).unwrap();
            ae.backward(&tape, &g, None).unwrap().0
        })
        .collect();
    rel_err(&flatten(&analytic), &fd_params(&inst.aes, loss))
}

pub fn contrastive(seed: u64) -> f64 {
    let (inst, mut r) = instance(seed, "gc-cl");
    let tau = r.random_range(0.3..2.0);
    let loss = |aes: &[ViewAutoencoder]| contrastive_loss(&encode_all(aes, &inst.inputs), tau).unwrap().value;
    let l = contrastive_loss(&encode_all(&inst.aes, &inst.inputs), tau).unwrap();
    let analytic = through_encoders(&inst.aes, &inst.inputs, &l.grads);
    rel_err(&flatten(&analytic), &fd_params(&inst.aes, loss))
}

pub fn sample_alignment(seed: u64) -> f64 {
    let (inst, mut r) = instance(seed, "gc-ia");
    let pairs = pairs_all_rows(&mut r, inst.aes.len());
    let loss = |aes: &[ViewAutoencoder]| {
        partial_sample_alignment_loss(&encode_all(aes, &inst.inputs), &pairs)
            .unwrap()
            .value
    };
    let l = partial_sample_alignment_loss(&encode_all(&inst.aes, &inst.inputs), &pairs).unwrap();
    let analytic = through_encoders(&inst.aes, &inst.inputs, &l.grads);
    rel_err(&flatten(&analytic), &fd_params(&inst.aes, loss))
}

pub fn prototype_alignment(seed: u64) -> f64 {
    let (inst, mut r) = instance(seed, "gc-pa");
    let k = r.random_range(2..=3);
    let v = inst.aes.len();
    let assigns: Vec<Vec<usize>> = (0..v).map(|_| covering_assignment(&mut r, B, k)).collect();
    let states = random_states(&mut r, v, k);
    let centers = |aes: &[ViewAutoencoder]| -> Vec<Array2<f64>> {
        encode_all(aes, &inst.inputs)
            .iter()
            .zip(&assigns)
            .map(|(h, a)| centers_from_assignments(h, a, k).unwrap())
            .collect()
    };

    let l = prototype_alignment_loss(&centers(&inst.aes), &states).unwrap();
    let grad_h: Vec<Array2<f64>> = l
        .center_grads
        .iter()
        .zip(&assigns)
        .map(|(g, a)| {
            let counts: Vec<usize> = (0..k).map(|c| a.iter().filter(|&&x| x == c).count()).collect();
            center_grad_to_embeddings(g, a, &counts)
        })
        .collect();
    let analytic = through_encoders(&inst.aes, &inst.inputs, &grad_h);
    let net = rel_err(
        &flatten(&analytic),
        &fd_params(&inst.aes, |aes| {
            prototype_alignment_loss(&centers(aes), &states).unwrap().value
        }),
    );
    let fixed = centers(&inst.aes);
    let p = rel_err(
        &flatten_mats(&l.relaxed_grads),
        &fd_relaxed(&states, |s| prototype_alignment_loss(&fixed, s).unwrap().value),
    );
    net.max(p)
}

fn joint(seed: u64, mode: LossMode) -> f64 {
    let (inst, mut r) = instance(seed, "gc-joint");
    let v = inst.aes.len();
    let k = r.random_range(2..=3);
    let views: Vec<ViewBatch> = inst
        .inputs
        .iter()
        .map(|x| ViewBatch {
            inputs: x.clone(),
            own: (0..B).map(|_| r.random_bool(0.75)).collect(),
        })
        .collect();
    let clusters: Vec<ClusterContext> = (0..v)
        .map(|_| {
            let batch_assign: Vec<Option<usize>> = (0..B)
                .map(|_| r.random_bool(0.8).then(|| r.random_range(0..k)))
                .collect();
            let counts: Vec<usize> = (0..k)
                .map(|c| batch_assign.iter().filter(|a| **a == Some(c)).count() + r.random_range(1..4))
                .collect();
            ClusterContext {
                base_sums: uniform(&mut r, k, D, -2.0, 2.0),
                counts,
                batch_assign,
            }
        })
        .collect();
    let pairs = JointBatch::pairs_from_own(&views);
    let batch = JointBatch {
        views,
        pairs,
        clusters: Some(clusters),
    };
    let states = random_states(&mut r, v, k);
    let cfg = TrainConfig {
        loss_mode: mode,
        alpha: r.random_range(0.2..2.0),
        beta: r.random_range(0.2..2.0),
        tau: r.random_range(0.5..2.0),
        ..TrainConfig::default()
    };

    let (_, grads) = joint_objective(&inst.aes, &batch, &states, &cfg).unwrap();
    let net = rel_err(
        &flatten(&grads.autoencoders),
        &fd_params(&inst.aes, |aes| {
            joint_objective(aes, &batch, &states, &cfg).unwrap().0.total
        }),
    );
    let p = rel_err(
        &flatten_mats(&grads.relaxed),
        &fd_relaxed(&states, |s| {
            joint_objective(&inst.aes, &batch, s, &cfg).unwrap().0.total
        }),
    );
    net.max(p)
}

pub fn joint_cpspan(seed: u64) -> f64 {
    joint(seed, LossMode::Cpspan)
}

pub fn joint_contrastive(seed: u64) -> f64 {
    joint(seed, LossMode::ContrastiveBaseline)
}

pub fn check(loss: &str, seed: u64) -> f64 {
    match loss {
        "reconstruction" => reconstruction(seed),
        "contrastive" => contrastive(seed),
        "partial-sample alignment" => sample_alignment(seed),
        "prototype alignment" => prototype_alignment(seed),
        "joint (cpspan)" => joint_cpspan(seed),
        "joint (contrastive-baseline)" => joint_contrastive(seed),
        other => panic!("unknown loss {other}"),
    }
}
