#![allow(dead_code)]

use std::collections::HashMap;

use itertools::Itertools;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use cpspan::data::{generate_mask, synth_gaussian, MaskSpec, MultiViewDataset};
use cpspan::nn::{AeGradients, ViewAutoencoder};
use cpspan::prototype::AlignmentState;

pub const FD_STEP: f64 = 1e-5;

pub fn rng(seed: u64, label: &str) -> ChaCha8Rng {
    cpspan::seed::rng(seed, label, &[])
}

pub fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(lo..hi))
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(&mut *rng))
}

/// Glorot-initialised autoencoders with random (non-zero) biases, so no
/// activation sits exactly on a ReLU kink.
pub fn tiny_aes(rng: &mut ChaCha8Rng, dims: &[usize], hidden: &[usize], d: usize) -> Vec<ViewAutoencoder> {
    dims.iter()
        .enumerate()
        .map(|(v, &dim)| {
            let mut ae = ViewAutoencoder::new(v, dim, hidden, d, rng);
            for layer in ae.encoder.layers.iter_mut().chain(ae.decoder.layers.iter_mut()) {
                layer.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
            }
            ae
        })
        .collect()
}

pub fn flatten(grads: &[AeGradients]) -> Vec<f64> {
    grads
        .iter()
        .flat_map(|g| g.tensors().into_iter().flatten().copied().collect::<Vec<_>>())
        .collect()
}

/// Central differences over every network parameter, in [`flatten`] order.
pub fn fd_params(aes: &[ViewAutoencoder], f: impl Fn(&[ViewAutoencoder]) -> f64) -> Vec<f64> {
    let mut work = aes.to_vec();
    let mut out = Vec::new();
    for v in 0..work.len() {
        let sizes = work[v].tensor_sizes();
        for (t, &size) in sizes.iter().enumerate() {
            for e in 0..size {
                let orig = work[v].tensors_mut()[t][e];
                work[v].tensors_mut()[t][e] = orig + FD_STEP;
                let plus = f(&work);
                work[v].tensors_mut()[t][e] = orig - FD_STEP;
                let minus = f(&work);
                work[v].tensors_mut()[t][e] = orig;
                out.push((plus - minus) / (2.0 * FD_STEP));
            }
        }
    }
    out
}

/// Central differences over every relaxed matrix entry, state by state.
pub fn fd_relaxed(states: &[AlignmentState], f: impl Fn(&[AlignmentState]) -> f64) -> Vec<f64> {
    let mut work = states.to_vec();
    let mut out = Vec::new();
    for s in 0..work.len() {
        let dim = work[s].relaxed.dim();
        for idx in (0..dim.0).cartesian_product(0..dim.1) {
            let orig = work[s].relaxed[idx];
            work[s].relaxed[idx] = orig + FD_STEP;
            let plus = f(&work);
            work[s].relaxed[idx] = orig - FD_STEP;
            let minus = f(&work);
            work[s].relaxed[idx] = orig;
            out.push((plus - minus) / (2.0 * FD_STEP));
        }
    }
    out
}

pub fn flatten_mats(ms: &[Array2<f64>]) -> Vec<f64> {
    ms.iter().flat_map(|m| m.iter().copied().collect::<Vec<_>>()).collect()
}

/// Largest elementwise `|a − n| / max(|a|, |n|)`; entries where both sides
/// are below 1e-8 count their absolute difference instead.
pub fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| {
            let scale = a.abs().max(n.abs());
            if scale < 1e-8 {
                (a - n).abs()
            } else {
                (a - n).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}

/// Pushes an embedding gradient back through each encoder only.
pub fn through_encoders(aes: &[ViewAutoencoder], inputs: &[Array2<f64>], grad_h: &[Array2<f64>]) -> Vec<AeGradients> {
    aes.iter()
        .zip(inputs)
        .zip(grad_h)
        .map(|((ae, x), g)| {
            let (_, recon, tape) = ae.forward_taped(x).unwrap();
            ae.backward(&tape, &Array2::zeros(recon.dim()), Some(g)).unwrap().0
        })
        .collect()
}

pub fn encode_all(aes: &[ViewAutoencoder], inputs: &[Array2<f64>]) -> Vec<Array2<f64>> {
    aes.iter().zip(inputs).map(|(ae, x)| ae.encode(x).unwrap()).collect()
}

// ---- oracles ----

pub fn brute_force_min_cost(cost: &Array2<f64>) -> f64 {
    let n = cost.nrows();
    (0..n)
        .permutations(n)
        .map(|p| p.iter().enumerate().map(|(r, &c)| cost[[r, c]]).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

fn relabel(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut ids = HashMap::new();
    let out = labels
        .iter()
        .map(|l| {
            let next = ids.len();
            *ids.entry(*l).or_insert(next)
        })
        .collect();
    (out, ids.len())
}

/// Best agreement over every injective cluster→class map.
pub fn accuracy_oracle(pred: &[usize], truth: &[usize]) -> f64 {
    let (p, np) = relabel(pred);
    let (t, nt) = relabel(truth);
    let m = np.max(nt);
    let best = (0..m)
        .permutations(m)
        .map(|map| p.iter().zip(&t).filter(|(a, b)| map[**a] == **b).count())
        .max()
        .unwrap();
    best as f64 / pred.len() as f64
}

/// NMI from joint and marginal probabilities, base-2 logs, geometric-mean
/// normalisation.
pub fn nmi_oracle(pred: &[usize], truth: &[usize]) -> f64 {
    let n = pred.len() as f64;
    let mut joint: HashMap<(usize, usize), f64> = HashMap::new();
    let mut pa: HashMap<usize, f64> = HashMap::new();
    let mut pb: HashMap<usize, f64> = HashMap::new();
    for (&a, &b) in pred.iter().zip(truth) {
        *joint.entry((a, b)).or_default() += 1.0 / n;
        *pa.entry(a).or_default() += 1.0 / n;
        *pb.entry(b).or_default() += 1.0 / n;
    }
    let h = |m: &HashMap<usize, f64>| -m.values().map(|p| p * p.log2()).sum::<f64>();
    let (ha, hb) = (h(&pa), h(&pb));
    if ha == 0.0 || hb == 0.0 {
        return if ha == 0.0 && hb == 0.0 { 1.0 } else { 0.0 };
    }
    let mi: f64 = joint
        .iter()
        .map(|(&(a, b), &p)| p * (p / (pa[&a] * pb[&b])).log2())
        .sum();
    mi / (ha * hb).sqrt()
}

/// Pairwise F-measure by walking every sample pair.
pub fn fmeasure_oracle(pred: &[usize], truth: &[usize]) -> f64 {
    let (mut tp, mut pp, mut tt) = (0usize, 0usize, 0usize);
    for (i, j) in (0..pred.len()).tuple_combinations() {
        let sp = pred[i] == pred[j];
        let st = truth[i] == truth[j];
        tp += (sp && st) as usize;
        pp += sp as usize;
        tt += st as usize;
    }
    if pp == 0 && tt == 0 {
        return 1.0;
    }
    if tp == 0 {
        return 0.0;
    }
    let precision = tp as f64 / pp as f64;
    let recall = tp as f64 / tt as f64;
    2.0 * precision * recall / (precision + recall)
}

pub fn random_labels(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..k)).collect()
}

/// Prototypes `C_j` plus `C_i[k] = C_j[σ(k)] + noise`, where every noise
/// row has length `ratio · min_{a≠b} ‖C_j[a] − C_j[b]‖`.
pub fn planted_prototypes(
    rng: &mut ChaCha8Rng,
    k: usize,
    d: usize,
    ratio: f64,
) -> (Array2<f64>, Array2<f64>, Vec<usize>) {
    let cj = gaussian(rng, k, d) * 4.0;
    let gap = (0..k)
        .tuple_combinations()
        .map(|(a, b)| (&cj.row(a) - &cj.row(b)).mapv(|x| x * x).sum().sqrt())
        .fold(f64::INFINITY, f64::min);
    let mut sigma: Vec<usize> = (0..k).collect();
    sigma.shuffle(rng);
    let mut ci = Array2::zeros((k, d));
    for (row, &s) in sigma.iter().enumerate() {
        let dir = gaussian(rng, 1, d);
        let len = dir.mapv(|x| x * x).sum().sqrt();
        let noise = dir.row(0).mapv(|x| x / len * ratio * gap);
        ci.row_mut(row).assign(&(&cj.row(s) + &noise));
    }
    (ci, cj, sigma)
}

/// The shared synthetic benchmark: N=1000, V=3, K=5, separation 8.
pub fn benchmark(rate: f64, seed: u64) -> MultiViewDataset {
    let ds = synth_gaussian(1000, 3, 5, &[20, 30, 40], 8.0, seed).unwrap();
    let mask = generate_mask(1000, 3, &MaskSpec::uniform(rate, seed)).unwrap();
    ds.with_mask(mask).unwrap()
}

pub mod gradcheck;
