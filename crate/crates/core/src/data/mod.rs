//! Incomplete multi-view data model.
//!
//! A [`MultiViewDataset`] holds one `N × D_v` matrix per view together with an
//! `N × V` observation mask. Rows whose mask entry is zero carry arbitrary
//! filler values; nothing downstream reads them.

mod csv;
mod synth;

pub use self::csv::{format_matrix, load_csv, parse_labels, parse_mask, parse_matrix, save_csv, write_matrix};
pub use self::synth::synth_gaussian;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Filler written into unobserved rows by [`MultiViewDataset::with_sentinel`].
pub const DEFAULT_SENTINEL: f64 = 0.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    views: Vec<Array2<f64>>,
    mask: Array2<bool>,
    labels: Option<Vec<usize>>,
    n_clusters: usize,
}

impl MultiViewDataset {
    pub fn new(
        views: Vec<Array2<f64>>,
        mask: Array2<bool>,
        labels: Option<Vec<usize>>,
        n_clusters: usize,
    ) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::invalid("dataset needs at least one view"));
        }
        let n = views[0].nrows();
        if n == 0 {
            return Err(Error::invalid("dataset has no samples"));
        }
        for (v, x) in views.iter().enumerate() {
            if x.nrows() != n {
                return Err(Error::invalid(format!(
                    "view {v} has {} rows, view 0 has {n}",
                    x.nrows()
                )));
            }
            if x.ncols() == 0 {
                return Err(Error::invalid(format!("view {v} has zero features")));
            }
        }
        if mask.dim() != (n, views.len()) {
            return Err(Error::invalid(format!(
                "mask is {:?}, expected ({n}, {})",
                mask.dim(),
                views.len()
            )));
        }
        if let Some(r) = mask.rows().into_iter().position(|row| !row.iter().any(|&b| b)) {
            return Err(Error::DataModel(format!("sample {r} is observed in no view")));
        }
        for (v, x) in views.iter().enumerate() {
            for (r, row) in x.rows().into_iter().enumerate() {
                if mask[[r, v]] && row.iter().any(|f| !f.is_finite()) {
                    return Err(Error::invalid(format!(
                        "view {v} row {r} has a non-finite observed feature"
                    )));
                }
            }
        }
        if n_clusters == 0 {
            return Err(Error::invalid("cluster count must be positive"));
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::invalid(format!("{} labels for {n} samples", l.len())));
            }
        }
        Ok(Self {
            views,
            mask,
            labels,
            n_clusters,
        })
    }

    /// Fully observed dataset.
    pub fn complete(views: Vec<Array2<f64>>, labels: Option<Vec<usize>>, n_clusters: usize) -> Result<Self> {
        let n = views.first().map_or(0, |x| x.nrows());
        let mask = Array2::from_elem((n, views.len()), true);
        Self::new(views, mask, labels, n_clusters)
    }

    pub fn n_samples(&self) -> usize {
        self.mask.nrows()
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn view_dim(&self, v: usize) -> usize {
        self.views[v].ncols()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.views.iter().map(|x| x.ncols()).collect()
    }

    /// Raw view matrix, including filler rows. Callers must consult the mask.
    pub fn view(&self, v: usize) -> ArrayView2<'_, f64> {
        self.views[v].view()
    }

    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }

    pub fn is_observed(&self, row: usize, view: usize) -> bool {
        self.mask[[row, view]]
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Sorted indices of rows observed in view `v`.
    pub fn observed_rows(&self, v: usize) -> Vec<usize> {
        (0..self.n_samples()).filter(|&r| self.mask[[r, v]]).collect()
    }

    /// Observed rows of view `v`, stacked in ascending row order.
    pub fn observed_features(&self, v: usize) -> Array2<f64> {
        self.views[v].select(Axis(0), &self.observed_rows(v))
    }

    /// Replaces the mask, keeping features and labels.
    pub fn with_mask(&self, mask: Array2<bool>) -> Result<Self> {
        Self::new(self.views.clone(), mask, self.labels.clone(), self.n_clusters)
    }

    /// Copy with every unobserved feature entry overwritten by `value`.
    pub fn with_sentinel(&self, value: f64) -> Self {
        let mut out = self.clone();
        for (v, x) in out.views.iter_mut().enumerate() {
            for (r, mut row) in x.rows_mut().into_iter().enumerate() {
                if !self.mask[[r, v]] {
                    row.fill(value);
                }
            }
        }
        out
    }

    /// Fraction of mask cells that are zero.
    pub fn missing_fraction(&self) -> f64 {
        let zeros = self.mask.iter().filter(|&&b| !b).count();
        zeros as f64 / self.mask.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskScheme {
    UniformCell,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub missing_rate: f64,
    pub seed: u64,
    pub scheme: MaskScheme,
}

impl MaskSpec {
    pub fn uniform(missing_rate: f64, seed: u64) -> Self {
        Self {
            missing_rate,
            seed,
            scheme: MaskScheme::UniformCell,
        }
    }
}

/// Draws an `n × v` observation mask with `round(rate · n · v)` missing cells.
///
/// Cells are visited in a uniformly shuffled order and removed unless that
/// would leave their row with no observed view, until the target count is
/// reached. The target never exceeds `n · (v - 1)`, so the walk always
/// finishes.
pub fn generate_mask(n: usize, v: usize, spec: &MaskSpec) -> Result<Array2<bool>> {
    if n == 0 {
        return Err(Error::invalid("mask needs at least one sample"));
    }
    if v < 2 {
        return Err(Error::invalid("mask needs at least two views"));
    }
    let rate = spec.missing_rate;
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!("missing rate {rate} outside [0, 1)")));
    }
    let limit = (v - 1) as f64 / v as f64;
    if rate >= limit {
        return Err(Error::invalid(format!(
            "missing rate {rate} cannot keep one view per sample with {v} views (limit {limit})"
        )));
    }

    let target = ((rate * (n * v) as f64).round() as usize).min(n * (v - 1));
    let mut mask = Array2::from_elem((n, v), true);
    let mut kept = vec![v; n];
    let mut cells: Vec<usize> = (0..n * v).collect();
    let mut rng = seed::rng(spec.seed, "mask", &[]);
    cells.shuffle(&mut rng);

    let mut removed = 0;
    for cell in cells {
        if removed == target {
            break;
        }
        let (r, c) = (cell / v, cell % v);
        if kept[r] > 1 {
            mask[[r, c]] = false;
            kept[r] -= 1;
            removed += 1;
        }
    }
    Ok(mask)
}

/// Samples observed in both `view_i` and `view_j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairObservedIndex {
    pub view_i: usize,
    pub view_j: usize,
    pub rows: Vec<usize>,
}

impl PairObservedIndex {
    pub fn count(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Builds the index from an explicit mask over arbitrary rows.
    pub fn from_mask(mask: ArrayView2<'_, bool>, view_i: usize, view_j: usize) -> Self {
        let rows = (0..mask.nrows())
            .filter(|&r| mask[[r, view_i]] && mask[[r, view_j]])
            .collect();
        Self { view_i, view_j, rows }
    }
}

pub fn pair_observed(ds: &MultiViewDataset, i: usize, j: usize) -> Result<PairObservedIndex> {
    let v = ds.n_views();
    if i >= v || j >= v {
        return Err(Error::invalid(format!(
            "view pair ({i}, {j}) out of range for {v} views"
        )));
    }
    if i == j {
        return Err(Error::invalid(format!("view pair ({i}, {j}) must be distinct")));
    }
    Ok(PairObservedIndex::from_mask(ds.mask.view(), i, j))
}

/// Pair-observed indices for every `i < j`.
pub fn all_pairs(ds: &MultiViewDataset) -> Vec<PairObservedIndex> {
    let v = ds.n_views();
    let mut out = Vec::with_capacity(v * (v - 1) / 2);
    for i in 0..v {
        for j in i + 1..v {
            out.push(PairObservedIndex::from_mask(ds.mask.view(), i, j));
        }
    }
    out
}

/// For every global row, an observed row of view `v` to stand in for it.
///
/// Observed rows map to themselves; missing rows draw uniformly with
/// replacement from the observed rows.
pub fn resample_complete(ds: &MultiViewDataset, v: usize, seed: u64) -> Result<Vec<usize>> {
    if v >= ds.n_views() {
        return Err(Error::invalid(format!("view {v} out of range")));
    }
    let observed = ds.observed_rows(v);
    if observed.is_empty() {
        return Err(Error::invalid(format!("view {v} has no observed rows")));
    }
    let mut rng = seed::rng(seed, "resample", &[v as u64]);
    Ok((0..ds.n_samples())
        .map(|r| {
            if ds.is_observed(r, v) {
                r
            } else {
                observed[rng.random_range(0..observed.len())]
            }
        })
        .collect())
}
