use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which alignment terms join the reconstruction loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LossMode {
    #[serde(rename = "cpspan")]
    Cpspan,
    /// Sample-alignment term swapped for the contrastive loss.
    #[serde(rename = "contrastive-baseline")]
    ContrastiveBaseline,
    #[serde(rename = "rec-only")]
    RecOnly,
    #[serde(rename = "rec+ia")]
    RecIa,
    #[serde(rename = "rec+pa")]
    RecPa,
}

impl LossMode {
    pub const ALL: [LossMode; 5] = [
        LossMode::Cpspan,
        LossMode::ContrastiveBaseline,
        LossMode::RecOnly,
        LossMode::RecIa,
        LossMode::RecPa,
    ];

    /// The four rows of the ablation table, top to bottom.
    pub const ABLATION: [LossMode; 4] = [LossMode::RecOnly, LossMode::RecIa, LossMode::RecPa, LossMode::Cpspan];

    pub fn as_str(self) -> &'static str {
        match self {
            LossMode::Cpspan => "cpspan",
            LossMode::ContrastiveBaseline => "contrastive-baseline",
            LossMode::RecOnly => "rec-only",
            LossMode::RecIa => "rec+ia",
            LossMode::RecPa => "rec+pa",
        }
    }

    pub fn uses_sample_alignment(self) -> bool {
        matches!(self, LossMode::Cpspan | LossMode::RecIa)
    }

    pub fn uses_contrastive(self) -> bool {
        self == LossMode::ContrastiveBaseline
    }

    pub fn uses_prototype_alignment(self) -> bool {
        matches!(self, LossMode::Cpspan | LossMode::RecPa | LossMode::ContrastiveBaseline)
    }
}

impl fmt::Display for LossMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown loss mode {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub pretrain_epochs: usize,
    pub align_epochs: usize,
    /// Embedding width shared by all views.
    pub d: usize,
    /// Encoder hidden widths; decoders mirror them.
    pub hidden: Vec<usize>,
    pub lr_pretrain: f64,
    pub lr_align: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Temperature of the contrastive baseline.
    pub tau: f64,
    /// Neighbour rank used by imputation (1 = nearest).
    pub rank: usize,
    pub seed: u64,
    pub loss_mode: LossMode,
    /// Projection cycles after each relaxed-permutation update.
    pub projection_cycles: usize,
    pub projection_tol: f64,
    /// k-means restarts for the per-view prototypes.
    pub prototype_restarts: usize,
    /// k-means restarts on the fused embedding.
    pub final_restarts: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 256,
            pretrain_epochs: 200,
            align_epochs: 50,
            d: 10,
            hidden: vec![500, 500, 2000],
            lr_pretrain: 5e-4,
            lr_align: 1e-4,
            alpha: 1e-3,
            beta: 1e-3,
            tau: 1.0,
            rank: 1,
            seed: 0,
            loss_mode: LossMode::Cpspan,
            projection_cycles: 20,
            projection_tol: 1e-4,
            prototype_restarts: 5,
            final_restarts: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        let non_negative = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be non-negative, got {v}")))
            }
        };
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be positive"));
        }
        if self.d == 0 {
            return Err(Error::invalid("d must be positive"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::invalid("hidden widths must be positive"));
        }
        if self.rank == 0 {
            return Err(Error::invalid("rank must be at least 1"));
        }
        if self.final_restarts == 0 || self.prototype_restarts == 0 {
            return Err(Error::invalid("k-means restarts must be at least 1"));
        }
        non_negative("lr_pretrain", self.lr_pretrain)?;
        non_negative("lr_align", self.lr_align)?;
        non_negative("alpha", self.alpha)?;
        non_negative("beta", self.beta)?;
        positive("tau", self.tau)?;
        non_negative("projection_tol", self.projection_tol)?;
        Ok(())
    }
}
