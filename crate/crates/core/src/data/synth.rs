use ndarray::Array2;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use super::MultiViewDataset;
use crate::error::{Error, Result};
use crate::seed;

/// Gaussian blobs, one independent set of cluster means per view.
///
/// Each view places its `k` means uniformly on a sphere of radius
/// `separation` and adds unit-variance isotropic noise. Labels are balanced
/// (cluster sizes differ by at most one) and shuffled. The returned dataset
/// is fully observed; apply a mask with [`MultiViewDataset::with_mask`].
pub fn synth_gaussian(
    n: usize,
    v: usize,
    k: usize,
    dims: &[usize],
    separation: f64,
    seed: u64,
) -> Result<MultiViewDataset> {
    if k < 2 || n < k {
        return Err(Error::invalid(format!("need n >= k >= 2, got n={n}, k={k}")));
    }
    if v == 0 || dims.len() != v {
        return Err(Error::invalid(format!("{} dims given for {v} views", dims.len())));
    }
    if dims.iter().any(|&d| d < 2) {
        return Err(Error::invalid("every view needs at least 2 dimensions"));
    }
    if !separation.is_finite() || separation < 0.0 {
        return Err(Error::invalid("separation must be finite and non-negative"));
    }

    let mut labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    labels.shuffle(&mut seed::rng(seed, "synth-labels", &[]));

    let views = dims
        .iter()
        .enumerate()
        .map(|(view, &d)| {
            let mut rng = seed::rng(seed, "synth-view", &[view as u64]);
            let mut means = Array2::<f64>::zeros((k, d));
            for mut m in means.rows_mut() {
                let raw: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                for (dst, x) in m.iter_mut().zip(raw) {
                    *dst = separation * x / norm;
                }
            }
            Array2::from_shape_fn((n, d), |(r, c)| {
                let z: f64 = StandardNormal.sample(&mut rng);
                means[[labels[r], c]] + z
            })
        })
        .collect();

    MultiViewDataset::complete(views, Some(labels), k)
}
