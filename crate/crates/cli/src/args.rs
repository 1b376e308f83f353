use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use cpspan::{LossMode, TrainConfig};

use crate::CliError;

/// Environment variable that overrides the default output root.
pub const OUTPUT_ROOT_ENV: &str = "CPSPAN_OUTPUT_ROOT";

#[derive(Debug, Parser)]
#[command(name = "cpspan", version, about = "Incomplete multi-view clustering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset as view, mask and label CSVs.
    Generate(GenerateArgs),
    /// Train and evaluate over a grid of missing rates and seeds.
    Run(SweepArgs),
    /// Run the four loss-mode ablation rows over the rate grid.
    Ablate(SweepArgs),
    /// Sweep alpha and beta over a cartesian grid at one missing rate.
    Sensitivity(SensitivityArgs),
    /// Re-impute one trained model per seed at several neighbour ranks.
    RankSweep(RankSweepArgs),
    /// Write fused embeddings, labels and cluster centres of a finished run.
    DumpEmbeddings(DumpArgs),
}

/// Synthetic Gaussian-blob dataset.
#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long = "n_samples", default_value_t = 1000)]
    pub n_samples: usize,
    #[arg(long = "n_views", default_value_t = 3)]
    pub n_views: usize,
    /// Cluster count; for CSV data it defaults to the distinct label count.
    #[arg(long = "n_clusters")]
    pub n_clusters: Option<usize>,
    /// Per-view feature widths; defaults to 20, 30, 40, ... for each view.
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    #[arg(long, default_value_t = 8.0)]
    pub separation: f64,
    /// Seed for the features and labels; masks use the run seed.
    #[arg(long = "data_seed", default_value_t = 0)]
    pub data_seed: u64,
}

impl SynthArgs {
    pub fn dims(&self) -> Vec<usize> {
        self.dims
            .clone()
            .unwrap_or_else(|| (0..self.n_views).map(|v| 20 + 10 * v).collect())
    }
}

/// Dataset source: CSV files when `--views` is given, synthetic otherwise.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    #[command(flatten)]
    pub synth: SynthArgs,
    /// Per-view feature CSVs.
    #[arg(long, value_delimiter = ',')]
    pub views: Option<Vec<PathBuf>>,
    /// Observation mask CSV; without it CSV data is masked per rate.
    #[arg(long, requires = "views")]
    pub mask: Option<PathBuf>,
    /// Ground-truth labels, one integer per line.
    #[arg(long, requires = "views")]
    pub labels: Option<PathBuf>,
}

/// TrainConfig overrides, applied on top of `--config` or the defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    /// JSON file holding a (partial) TrainConfig.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "batch_size")]
    pub batch_size: Option<usize>,
    #[arg(long = "pretrain_epochs")]
    pub pretrain_epochs: Option<usize>,
    #[arg(long = "align_epochs")]
    pub align_epochs: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long = "lr_pretrain")]
    pub lr_pretrain: Option<f64>,
    #[arg(long = "lr_align")]
    pub lr_align: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long = "loss_mode")]
    pub loss_mode: Option<LossMode>,
    #[arg(long = "projection_cycles")]
    pub projection_cycles: Option<usize>,
    #[arg(long = "projection_tol")]
    pub projection_tol: Option<f64>,
    #[arg(long = "prototype_restarts")]
    pub prototype_restarts: Option<usize>,
    #[arg(long = "final_restarts")]
    pub final_restarts: Option<usize>,
}

impl TrainArgs {
    /// Base config from `--config` (or defaults) with every given flag
    /// applied, validated.
    pub fn resolve(&self) -> Result<TrainConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => {
                let text =
                    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
            }
            None => TrainConfig::default(),
        };
        macro_rules! apply {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field {
                    c.$field = v.clone();
                })*
            };
        }
        apply!(
            batch_size,
            pretrain_epochs,
            align_epochs,
            d,
            hidden,
            lr_pretrain,
            lr_align,
            alpha,
            beta,
            tau,
            rank,
            loss_mode,
            projection_cycles,
            projection_tol,
            prototype_restarts,
            final_restarts
        );
        c.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output root; defaults to $CPSPAN_OUTPUT_ROOT, then `runs`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for independent runs; defaults to the logical core count.
    #[arg(long)]
    pub workers: Option<usize>,
}

impl OutputArgs {
    pub fn root(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("runs"))
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub synth: SynthArgs,
    #[arg(long = "missing_rate", default_value_t = 0.0)]
    pub missing_rate: f64,
    /// Mask seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving the CSV files.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Missing-rate grid; defaults to 0.1,0.3,0.5,0.7. Not allowed with `--mask`.
    #[arg(long = "missing_rates", value_delimiter = ',')]
    pub missing_rates: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct SensitivityArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Defaults to 0.5. Not allowed with `--mask`.
    #[arg(long = "missing_rate")]
    pub missing_rate: Option<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.001,0.01,0.1,10,100,1000")]
    pub alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.001,0.01,0.1,10,100,1000")]
    pub betas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct RankSweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Defaults to 0.5. Not allowed with `--mask`.
    #[arg(long = "missing_rate")]
    pub missing_rate: Option<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1,5,10,25")]
    pub ranks: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct DumpArgs {
    /// Directory of a finished run.
    #[arg(long)]
    pub run: PathBuf,
    /// Output file; defaults to `embeddings.csv` inside the run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
