//! Cross-view sample alignment losses.
//!
//! [`partial_sample_alignment_loss`] asks only that a sample observed in two
//! views has cosine similarity one between its two embeddings; how it relates
//! to other samples is left free. [`contrastive_loss`] is the usual
//! inner-product InfoNCE-style objective kept as a comparison baseline.

use ndarray::{Array1, Array2, ArrayView1};

use crate::data::PairObservedIndex;
use crate::error::{Error, Result};

const MIN_NORM: f64 = 1e-12;

fn row_norms(h: &Array2<f64>) -> Result<Array1<f64>> {
    let norms: Array1<f64> = h.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    if let Some(row) = norms.iter().position(|&n| n < MIN_NORM) {
        return Err(Error::DegenerateEmbedding { row });
    }
    Ok(norms)
}

/// `S[p][q] = cos(hp_p, hq_q)`.
pub fn cosine_similarity(hp: &Array2<f64>, hq: &Array2<f64>) -> Result<Array2<f64>> {
    if hp.ncols() != hq.ncols() {
        return Err(Error::invalid(format!(
            "embedding widths differ: {} vs {}",
            hp.ncols(),
            hq.ncols()
        )));
    }
    let np = row_norms(hp)?;
    let nq = row_norms(hq)?;
    let mut s = hp.dot(&hq.t());
    for ((p, q), v) in s.indexed_iter_mut() {
        *v /= np[p] * nq[q];
    }
    Ok(s)
}

fn cosine(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> (f64, f64, f64) {
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    (a.dot(&b) / (na * nb), na, nb)
}

/// Loss value with gradients for each input embedding matrix.
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub value: f64,
    pub grads: Vec<Array2<f64>>,
}

/// `Σ_{pairs} ‖diag(S) − 1‖² / N_(i,j)`.
///
/// `embeddings[v]` is row-aligned across views; each pair's `rows` index into
/// those matrices. Pairs with no shared rows contribute nothing. Rows outside
/// every pair are never read.
pub fn partial_sample_alignment_loss(embeddings: &[Array2<f64>], pairs: &[PairObservedIndex]) -> Result<LossGrad> {
    let mut grads: Vec<Array2<f64>> = embeddings.iter().map(|h| Array2::zeros(h.dim())).collect();
    let mut value = 0.0;
    for pair in pairs {
        let (i, j) = (pair.view_i, pair.view_j);
        if i >= embeddings.len() || j >= embeddings.len() || i == j {
            return Err(Error::invalid(format!("bad view pair ({i}, {j})")));
        }
        if pair.is_empty() {
            continue;
        }
        let (hi, hj) = (&embeddings[i], &embeddings[j]);
        if hi.ncols() != hj.ncols() {
            return Err(Error::invalid("embedding widths differ across views"));
        }
        let scale = 1.0 / pair.count() as f64;
        for &r in &pair.rows {
            if r >= hi.nrows() || r >= hj.nrows() {
                return Err(Error::invalid(format!("pair row {r} out of range")));
            }
            let (a, b) = (hi.row(r), hj.row(r));
            let (c, na, nb) = cosine(a, b);
            if na < MIN_NORM || nb < MIN_NORM {
                return Err(Error::DegenerateEmbedding { row: r });
            }
            value += scale * (c - 1.0).powi(2);
            let w = 2.0 * scale * (c - 1.0);
            // ∂c/∂a = b/(|a||b|) − c·a/|a|²
            let ga = (&b / (na * nb) - &a * (c / (na * na))) * w;
            let gb = (&a / (na * nb) - &b * (c / (nb * nb))) * w;
            grads[i].row_mut(r).scaled_add(1.0, &ga);
            grads[j].row_mut(r).scaled_add(1.0, &gb);
        }
    }
    Ok(LossGrad { value, grads })
}

/// Multi-view contrastive loss over row-aligned embeddings.
///
/// For sample `i` in view `v`:
/// `ℓ = −Σ_{r≠v} log( exp(h_i^v·h_i^r/τ) / Σ_{t≠v} Σ_{j≠i} exp(h_i^v·h_j^t/τ) )`,
/// and the total is `Σ_v Σ_i ℓ / N`. The denominator excludes the sample's
/// own rows. A single view gives zero.
pub fn contrastive_loss(embeddings: &[Array2<f64>], tau: f64) -> Result<LossGrad> {
    if tau <= 0.0 || !tau.is_finite() {
        return Err(Error::invalid(format!("temperature must be positive, got {tau}")));
    }
    let v_count = embeddings.len();
    let mut grads: Vec<Array2<f64>> = embeddings.iter().map(|h| Array2::zeros(h.dim())).collect();
    if v_count < 2 {
        return Ok(LossGrad { value: 0.0, grads });
    }
    let n = embeddings[0].nrows();
    if embeddings
        .iter()
        .any(|h| h.nrows() != n || h.ncols() != embeddings[0].ncols())
    {
        return Err(Error::invalid("contrastive loss needs equally shaped views"));
    }
    if n < 2 {
        return Err(Error::invalid("contrastive loss needs at least two samples"));
    }

    // sims[v][t] = H_v H_tᵀ / τ
    let sims: Vec<Vec<Array2<f64>>> = embeddings
        .iter()
        .map(|hv| embeddings.iter().map(|ht| hv.dot(&ht.t()) / tau).collect())
        .collect();

    let inv_n = 1.0 / n as f64;
    let others = (v_count - 1) as f64;
    let mut value = 0.0;
    for v in 0..v_count {
        for i in 0..n {
            let mut max = f64::NEG_INFINITY;
            for t in (0..v_count).filter(|&t| t != v) {
                for j in (0..n).filter(|&j| j != i) {
                    max = max.max(sims[v][t][[i, j]]);
                }
            }
            let mut z = 0.0;
            for t in (0..v_count).filter(|&t| t != v) {
                for j in (0..n).filter(|&j| j != i) {
                    z += (sims[v][t][[i, j]] - max).exp();
                }
            }
            let log_z = max + z.ln();

            for r in (0..v_count).filter(|&r| r != v) {
                value += inv_n * (log_z - sims[v][r][[i, i]]);
                // positive term: −h_i^v·h_i^r/τ
                grads[v].row_mut(i).scaled_add(-inv_n / tau, &embeddings[r].row(i));
                grads[r].row_mut(i).scaled_add(-inv_n / tau, &embeddings[v].row(i));
            }
            // (V−1)·log Z, softmax-weighted
            for t in (0..v_count).filter(|&t| t != v) {
                for j in (0..n).filter(|&j| j != i) {
                    let w = others * inv_n * (sims[v][t][[i, j]] - log_z).exp() / tau;
                    grads[v].row_mut(i).scaled_add(w, &embeddings[t].row(j));
                    grads[t].row_mut(j).scaled_add(w, &embeddings[v].row(i));
                }
            }
        }
    }
    Ok(LossGrad { value, grads })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;

    fn rand_mat(seed: u64, r: usize, c: usize) -> Array2<f64> {
        let mut rng = crate::seed::rng(seed, "align-test", &[]);
        Array2::from_shape_fn((r, c), |_| rng.random_range(-1.0..1.0))
    }

    fn pair(i: usize, j: usize, rows: Vec<usize>) -> PairObservedIndex {
        PairObservedIndex {
            view_i: i,
            view_j: j,
            rows,
        }
    }

    #[test]
    fn self_cosine_diagonal_is_one() {
        let h = rand_mat(1, 4, 3);
        let s = cosine_similarity(&h, &h).unwrap();
        for p in 0..4 {
            assert!((s[[p, p]] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn antipodal_rows() {
        let h = rand_mat(2, 3, 5);
        let s = cosine_similarity(&h, &(-&h)).unwrap();
        for p in 0..3 {
            assert!((s[[p, p]] + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cosine_matches_elementwise_oracle() {
        let a = rand_mat(3, 5, 10);
        let b = rand_mat(4, 5, 10);
        let s = cosine_similarity(&a, &b).unwrap();
        for p in 0..5 {
            for q in 0..5 {
                let mut dot = 0.0;
                let mut na = 0.0;
                let mut nb = 0.0;
                for k in 0..10 {
                    dot += a[[p, k]] * b[[q, k]];
                    na += a[[p, k]] * a[[p, k]];
                    nb += b[[q, k]] * b[[q, k]];
                }
                let want = dot / (na.sqrt() * nb.sqrt());
                assert!((s[[p, q]] - want).abs() < 1e-12);
                assert!(s[[p, q]].abs() <= 1.0 + 1e-6);
            }
        }
    }

    #[test]
    fn zero_row_is_degenerate() {
        let mut a = rand_mat(5, 3, 2);
        a.row_mut(1).fill(0.0);
        match cosine_similarity(&a, &rand_mat(6, 3, 2)) {
            Err(Error::DegenerateEmbedding { row }) => assert_eq!(row, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn positive_multiples_give_zero_loss() {
        let h0 = rand_mat(7, 6, 4);
        let h1 = &h0 * 3.5;
        let l = partial_sample_alignment_loss(&[h0, h1], &[pair(0, 1, vec![0, 2, 5])]).unwrap();
        assert!(l.value.abs() < 1e-12);
    }

    #[test]
    fn orthogonal_pair_costs_one() {
        let h0 = array![[1.0, 0.0]];
        let h1 = array![[0.0, 2.0]];
        let l = partial_sample_alignment_loss(&[h0, h1], &[pair(0, 1, vec![0])]).unwrap();
        assert!((l.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn three_view_hand_sum() {
        let hs: Vec<Array2<f64>> = (0..3).map(|v| rand_mat(10 + v, 5, 3)).collect();
        let pairs = vec![pair(0, 1, vec![0, 1, 3]), pair(0, 2, vec![2]), pair(1, 2, vec![0, 4])];
        let l = partial_sample_alignment_loss(&hs, &pairs).unwrap();
        let mut want = 0.0;
        for p in &pairs {
            let s = cosine_similarity(&hs[p.view_i], &hs[p.view_j]).unwrap();
            let mut term = 0.0;
            for &r in &p.rows {
                term += (s[[r, r]] - 1.0).powi(2);
            }
            want += term / p.count() as f64;
        }
        assert!((l.value - want).abs() < 1e-12);
    }

    #[test]
    fn empty_pair_skipped() {
        let hs = vec![rand_mat(1, 3, 2), rand_mat(2, 3, 2)];
        let l = partial_sample_alignment_loss(&hs, &[pair(0, 1, vec![])]).unwrap();
        assert_eq!(l.value, 0.0);
    }

    /// Direct evaluation of the contrastive formula, no shared code.
    fn contrastive_oracle(hs: &[Array2<f64>], tau: f64) -> f64 {
        let v = hs.len();
        let n = hs[0].nrows();
        let dot = |a: ArrayView1<f64>, b: ArrayView1<f64>| a.dot(&b);
        let mut total = 0.0;
        for vv in 0..v {
            for i in 0..n {
                let mut denom = 0.0;
                for t in 0..v {
                    if t == vv {
                        continue;
                    }
                    for j in 0..n {
                        if j != i {
                            denom += (dot(hs[vv].row(i), hs[t].row(j)) / tau).exp();
                        }
                    }
                }
                for r in 0..v {
                    if r != vv {
                        let num = (dot(hs[vv].row(i), hs[r].row(i)) / tau).exp();
                        total -= (num / denom).ln();
                    }
                }
            }
        }
        total / n as f64
    }

    #[test]
    fn contrastive_orthonormal_two_by_two() {
        // Four orthonormal vectors: every inner product between distinct
        // rows is 0, and each denominator holds a single term e^0, so every
        // ℓ is −log(1/1) = 0.
        let h0 = array![[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]];
        let h1 = array![[0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]];
        let l = contrastive_loss(&[h0.clone(), h1.clone()], 1.0).unwrap();
        assert!(l.value.abs() < 1e-15);
        assert!((l.value - contrastive_oracle(&[h0, h1], 1.0)).abs() < 1e-15);
    }

    #[test]
    fn contrastive_matches_oracle() {
        let hs: Vec<Array2<f64>> = (0..3).map(|v| rand_mat(20 + v, 4, 3)).collect();
        let l = contrastive_loss(&hs, 0.5).unwrap();
        assert!((l.value - contrastive_oracle(&hs, 0.5)).abs() < 1e-10);
    }

    #[test]
    fn contrastive_is_not_scale_invariant() {
        let hs: Vec<Array2<f64>> = (0..2).map(|v| rand_mat(30 + v, 5, 3)).collect();
        let scaled: Vec<Array2<f64>> = hs.iter().map(|h| h * 3.0).collect();
        let a = contrastive_loss(&hs, 1.0).unwrap().value;
        let b = contrastive_loss(&scaled, 1.0).unwrap().value;
        assert!((a - b).abs() > 1e-6);
    }

    #[test]
    fn contrastive_decreases_with_positive_similarity() {
        // The last coordinate is zero everywhere except sample 0 in both
        // views, so growing it raises only h_0^0 · h_0^1; every negative
        // inner product stays put.
        let mut h0 = array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, 0.2, 0.0]];
        let mut h1 = array![[0.3, 0.5, 0.0], [0.1, -0.4, 0.0], [0.2, 0.9, 0.0]];
        let mut prev = contrastive_loss(&[h0.clone(), h1.clone()], 1.0).unwrap().value;
        for step in 1..=3 {
            let e = 0.5 * step as f64;
            h0[[0, 2]] = e;
            h1[[0, 2]] = e;
            let l = contrastive_loss(&[h0.clone(), h1.clone()], 1.0).unwrap().value;
            assert!(l < prev);
            assert!((l - contrastive_oracle(&[h0.clone(), h1.clone()], 1.0)).abs() < 1e-12);
            prev = l;
        }
    }

    #[test]
    fn contrastive_edge_cases() {
        let h = rand_mat(1, 3, 2);
        assert_eq!(contrastive_loss(std::slice::from_ref(&h), 1.0).unwrap().value, 0.0);
        assert!(contrastive_loss(&[h.clone(), h.clone()], 0.0).is_err());
        assert!(contrastive_loss(&[h.clone(), h], -1.0).is_err());
        let one = rand_mat(2, 1, 2);
        assert!(contrastive_loss(&[one.clone(), one], 1.0).is_err());
    }
}
