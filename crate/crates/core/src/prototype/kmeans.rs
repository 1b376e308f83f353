use ndarray::{Array2, ArrayView1, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;

pub const MAX_ITER: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centers: Array2<f64>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    /// Inertia after every Lloyd update, in order.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(x: ArrayView1<'_, f64>, centers: &Array2<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, row) in centers.rows().into_iter().enumerate() {
        let d = sq_dist(x, row);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn sample_weighted<R: Rng>(weights: &[f64], total: f64, rng: &mut R) -> usize {
    if total <= 0.0 {
        return rng.random_range(0..weights.len());
    }
    let mut target = rng.random_range(0.0..total);
    for (i, &w) in weights.iter().enumerate() {
        if target < w {
            return i;
        }
        target -= w;
    }
    weights.len() - 1
}

/// Greedy k-means++: each new centre is the best of `2 + ⌊ln k⌋` D²-weighted
/// candidates, judged by the potential it leaves.
fn plus_plus<R: Rng>(data: &Array2<f64>, k: usize, rng: &mut R) -> Array2<f64> {
    let n = data.nrows();
    let trials = 2 + (k as f64).ln().floor() as usize;
    let mut centers = Array2::zeros((k, data.ncols()));
    let first = rng.random_range(0..n);
    centers.row_mut(0).assign(&data.row(first));
    let mut d2: Vec<f64> = data.rows().into_iter().map(|x| sq_dist(x, data.row(first))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let mut best: Option<(f64, Vec<f64>, usize)> = None;
        for _ in 0..trials {
            let cand = sample_weighted(&d2, total, rng);
            let next: Vec<f64> = data
                .rows()
                .into_iter()
                .zip(&d2)
                .map(|(x, &d)| d.min(sq_dist(x, data.row(cand))))
                .collect();
            let potential: f64 = next.iter().sum();
            if best.as_ref().is_none_or(|(p, _, _)| potential < *p) {
                best = Some((potential, next, cand));
            }
        }
        let (_, next, pick) = best.expect("at least one trial");
        centers.row_mut(c).assign(&data.row(pick));
        d2 = next;
    }
    centers
}

fn inertia(data: &Array2<f64>, centers: &Array2<f64>, assignments: &[usize]) -> f64 {
    data.rows()
        .into_iter()
        .zip(assignments)
        .map(|(x, &a)| sq_dist(x, centers.row(a)))
        .sum()
}

/// Moves the farthest point (from its own centre, among clusters with more
/// than one member) into each empty cluster. Ties go to the lowest index.
fn repair_empty(data: &Array2<f64>, centers: &Array2<f64>, assignments: &mut [usize], k: usize) {
    let mut counts = vec![0usize; k];
    for &a in assignments.iter() {
        counts[a] += 1;
    }
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, x) in data.rows().into_iter().enumerate() {
            let a = assignments[i];
            if counts[a] < 2 {
                continue;
            }
            let d = sq_dist(x, centers.row(a));
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        let (i, _) = best.expect("n >= k leaves a cluster with two members");
        counts[assignments[i]] -= 1;
        assignments[i] = empty;
        counts[empty] = 1;
    }
}

fn update_centers(data: &Array2<f64>, assignments: &[usize], k: usize) -> Array2<f64> {
    let mut centers = Array2::zeros((k, data.ncols()));
    let mut counts = vec![0usize; k];
    for (x, &a) in data.rows().into_iter().zip(assignments) {
        centers.row_mut(a).scaled_add(1.0, &x);
        counts[a] += 1;
    }
    for (mut c, &n) in centers.axis_iter_mut(Axis(0)).zip(&counts) {
        c /= n as f64;
    }
    centers
}

/// Lloyd's algorithm from greedy k-means++ seeding.
///
/// Stops at an assignment fixpoint or after [`MAX_ITER`] iterations.
pub fn kmeans(data: &Array2<f64>, k: usize, seed: u64) -> Result<KMeansFit> {
    let n = data.nrows();
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    if n < k {
        return Err(Error::invalid(format!("{n} points cannot form {k} clusters")));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("k-means input has non-finite values"));
    }

    let mut rng = seed::rng(seed, "kmeans++", &[]);
    let mut centers = plus_plus(data, k, &mut rng);
    let mut assignments: Vec<usize> = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..MAX_ITER {
        let mut next: Vec<usize> = data.rows().into_iter().map(|x| nearest(x, &centers).0).collect();
        repair_empty(data, &centers, &mut next, k);
        if next == assignments {
            converged = true;
            break;
        }
        assignments = next;
        centers = update_centers(data, &assignments, k);
        history.push(inertia(data, &centers, &assignments));
        iterations += 1;
    }

    Ok(KMeansFit {
        inertia: inertia(data, &centers, &assignments),
        centers,
        assignments,
        history,
        iterations,
        converged,
    })
}

/// Best-inertia fit over `restarts` independently seeded runs.
pub fn kmeans_restarts(data: &Array2<f64>, k: usize, restarts: usize, seed: u64) -> Result<KMeansFit> {
    let mut best: Option<KMeansFit> = None;
    for r in 0..restarts.max(1) {
        let fit = kmeans(data, k, seed::derive(seed, "kmeans-restart", &[r as u64]))?;
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn random_points(seed: u64, n: usize, d: usize) -> Array2<f64> {
        let mut rng = seed::rng(seed, "kmeans-test", &[]);
        Array2::from_shape_fn((n, d), |_| rng.random_range(0.0..1.0))
    }

    #[test]
    fn single_cluster_is_mean() {
        let x = random_points(1, 30, 3);
        let fit = kmeans(&x, 1, 0).unwrap();
        let mean = x.mean_axis(Axis(0)).unwrap();
        for (a, b) in fit.centers.row(0).iter().zip(mean.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        let ss: f64 = x.rows().into_iter().map(|r| sq_dist(r, mean.view())).sum();
        assert!((fit.inertia - ss).abs() < 1e-9);
    }

    #[test]
    fn two_pairs_give_midpoints() {
        let x = array![[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]];
        let fit = kmeans(&x, 2, 3).unwrap();
        let mut centers: Vec<Vec<f64>> = fit.centers.rows().into_iter().map(|r| r.to_vec()).collect();
        centers.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        assert_eq!(centers, vec![vec![0.0, 0.5], vec![10.0, 0.5]]);
        assert!((fit.inertia - 1.0).abs() < 1e-12);
    }

    #[test]
    fn history_non_increasing_and_centers_are_means() {
        for seed in 0..10 {
            let x = random_points(seed, 200, 4);
            let fit = kmeans(&x, 6, seed).unwrap();
            for w in fit.history.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "{:?}", fit.history);
            }
            let means = update_centers(&x, &fit.assignments, 6);
            assert!((&means - &fit.centers).iter().all(|d| d.abs() < 1e-9));
        }
    }

    #[test]
    fn duplicates_force_repair() {
        // Six identical points and k = 3: only repair can fill clusters.
        let x = Array2::from_elem((6, 2), 1.0);
        let fit = kmeans(&x, 3, 0).unwrap();
        for c in 0..3 {
            assert!(fit.assignments.contains(&c));
        }
        assert_eq!(fit.inertia, 0.0);
    }

    #[test]
    fn too_few_points() {
        assert!(kmeans(&Array2::zeros((2, 2)), 3, 0).is_err());
        assert!(kmeans(&Array2::zeros((2, 2)), 0, 0).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let x = random_points(4, 50, 2);
        assert_eq!(kmeans(&x, 3, 9).unwrap(), kmeans(&x, 3, 9).unwrap());
    }
}
