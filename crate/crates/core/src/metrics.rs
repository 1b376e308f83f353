//! External clustering scores: ACC, NMI and pairwise F-measure.

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prototype::hungarian;

fn check(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::invalid("empty labelling"));
    }
    Ok(())
}

/// Relabels to `0..m` in ascending order of the original label.
fn compact(labels: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut ids = BTreeMap::new();
    for &l in labels {
        let next = ids.len();
        ids.entry(l).or_insert(next);
    }
    // BTreeMap iteration is sorted; reassign in that order
    let originals: Vec<usize> = ids.keys().copied().collect();
    let index: BTreeMap<usize, usize> = originals.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    (labels.iter().map(|l| index[l]).collect(), originals)
}

fn contingency(pred: &[usize], truth: &[usize]) -> (Array2<f64>, Vec<usize>, Vec<usize>) {
    let (p, p_ids) = compact(pred);
    let (t, t_ids) = compact(truth);
    let mut table = Array2::zeros((p_ids.len(), t_ids.len()));
    for (&a, &b) in p.iter().zip(&t) {
        table[[a, b]] += 1.0;
    }
    (table, p_ids, t_ids)
}

/// Best one-to-one cluster→class agreement. Returns the accuracy and the
/// `(cluster, class)` pairs of the optimal matching.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<(f64, Vec<(usize, usize)>)> {
    check(pred, truth)?;
    let (table, p_ids, t_ids) = contingency(pred, truth);
    let m = p_ids.len().max(t_ids.len());
    let mut cost = Array2::zeros((m, m));
    for ((a, b), &c) in table.indexed_iter() {
        cost[[a, b]] = -c;
    }
    let assign = hungarian(&cost)?;
    let mut matching = Vec::new();
    let mut hits = 0.0;
    for (a, &b) in assign.perm.iter().enumerate() {
        if a < p_ids.len() && b < t_ids.len() {
            hits += table[[a, b]];
            matching.push((p_ids[a], t_ids[b]));
        }
    }
    Ok((hits / pred.len() as f64, matching))
}

fn entropy(counts: impl Iterator<Item = f64>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0.0)
        .map(|c| {
            let p = c / n;
            -p * p.ln()
        })
        .sum()
}

/// `I(pred; truth) / sqrt(H(pred) · H(truth))`, natural log.
///
/// When either entropy is zero the score is 1 if both labellings are
/// constant (identical up to relabelling) and 0 otherwise.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check(pred, truth)?;
    let n = pred.len() as f64;
    let (table, _, _) = contingency(pred, truth);
    let rows = table.sum_axis(ndarray::Axis(1));
    let cols = table.sum_axis(ndarray::Axis(0));
    let hp = entropy(rows.iter().copied(), n);
    let ht = entropy(cols.iter().copied(), n);
    if hp == 0.0 || ht == 0.0 {
        return Ok(if hp == 0.0 && ht == 0.0 { 1.0 } else { 0.0 });
    }
    let mut mi = 0.0;
    for ((a, b), &c) in table.indexed_iter() {
        if c > 0.0 {
            mi += c / n * (n * c / (rows[a] * cols[b])).ln();
        }
    }
    Ok((mi / (hp * ht).sqrt()).clamp(0.0, 1.0))
}

/// Pairwise F-measure over same-cluster sample pairs.
///
/// If neither labelling puts any two samples together the partitions agree
/// and the score is 1; if only one of them does, or no pair is shared, it
/// is 0.
pub fn fmeasure(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check(pred, truth)?;
    if pred.len() < 2 {
        return Err(Error::invalid("pairwise F-measure needs at least two samples"));
    }
    let pairs = |c: f64| c * (c - 1.0) / 2.0;
    let (table, _, _) = contingency(pred, truth);
    let tp: f64 = table.iter().map(|&c| pairs(c)).sum();
    let pred_pairs: f64 = table.sum_axis(ndarray::Axis(1)).iter().map(|&c| pairs(c)).sum();
    let true_pairs: f64 = table.sum_axis(ndarray::Axis(0)).iter().map(|&c| pairs(c)).sum();
    if pred_pairs == 0.0 && true_pairs == 0.0 {
        return Ok(1.0);
    }
    if pred_pairs == 0.0 || true_pairs == 0.0 || tp == 0.0 {
        return Ok(0.0);
    }
    let precision = tp / pred_pairs;
    let recall = tp / true_pairs;
    Ok(2.0 * precision * recall / (precision + recall))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub predicted: Vec<usize>,
    pub truth: Vec<usize>,
    pub acc: f64,
    pub nmi: f64,
    pub fmeasure: f64,
    pub matching: Vec<(usize, usize)>,
}

impl ClusteringResult {
    pub fn evaluate(predicted: &[usize], truth: &[usize]) -> Result<Self> {
        let (acc, matching) = accuracy(predicted, truth)?;
        Ok(Self {
            predicted: predicted.to_vec(),
            truth: truth.to_vec(),
            acc,
            nmi: nmi(predicted, truth)?,
            fmeasure: fmeasure(predicted, truth)?,
            matching,
        })
    }
}
