use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use ndarray::Array2;
use rayon::prelude::*;

use cpspan::data::{generate_mask, load_csv, parse_labels, parse_matrix, save_csv, synth_gaussian};
use cpspan::pipeline::{self, RunOutput, RunReport};
use cpspan::{LossMode, MaskSpec, MultiViewDataset, TrainConfig};

use crate::args::{DataArgs, DumpArgs, GenerateArgs, OutputArgs, RankSweepArgs, SensitivityArgs, SweepArgs, SynthArgs};
use crate::output::{self, mean_std, save_run};
use crate::CliError;

const DEFAULT_RATES: [f64; 4] = [0.1, 0.3, 0.5, 0.7];
const DEFAULT_RATE: f64 = 0.5;
const DEFAULT_CLUSTERS: usize = 5;

/// Column names shared by every aggregate table.
const STATS_HEADER: &str = "runs,failed,acc_mean,acc_std,nmi_mean,nmi_std,fmeasure_mean,fmeasure_std";

fn synthetic(s: &SynthArgs) -> Result<MultiViewDataset, CliError> {
    synth_gaussian(
        s.n_samples,
        s.n_views,
        s.n_clusters.unwrap_or(DEFAULT_CLUSTERS),
        &s.dims(),
        s.separation,
        s.data_seed,
    )
    .map_err(|e| CliError::Config(e.to_string()))
}

fn check_rate(rate: f64, views: usize) -> Result<(), CliError> {
    let limit = (views - 1) as f64 / views as f64;
    if (0.0..limit).contains(&rate) {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "missing rate {rate} outside [0, {limit}) for {views} views"
        )))
    }
}

/// The dataset every run of a command starts from.
struct Source {
    ds: MultiViewDataset,
    /// Mask read from a file rather than drawn per (rate, seed).
    fixed_mask: bool,
}

impl Source {
    fn load(a: &DataArgs) -> Result<Self, CliError> {
        let Some(paths) = &a.views else {
            return Ok(Source {
                ds: synthetic(&a.synth)?,
                fixed_mask: false,
            });
        };
        let n_clusters = a.synth.n_clusters;
        if let Some(mask) = &a.mask {
            let ds = load_csv(paths, mask, a.labels.as_deref(), n_clusters)?;
            return Ok(Source { ds, fixed_mask: true });
        }
        let views = paths
            .iter()
            .map(|p| parse_matrix(&output::read(p)?, &p.display().to_string()).map_err(CliError::from))
            .collect::<Result<Vec<_>, _>>()?;
        let labels = match &a.labels {
            Some(p) => Some(parse_labels(&output::read(p)?, &p.display().to_string())?),
            None => None,
        };
        let k = match (n_clusters, &labels) {
            (Some(k), _) => k,
            (None, Some(l)) => l.iter().collect::<std::collections::BTreeSet<_>>().len(),
            (None, None) => return Err(CliError::Config("--n_clusters is required without --labels".into())),
        };
        Ok(Source {
            ds: MultiViewDataset::complete(views, labels, k)?,
            fixed_mask: false,
        })
    }

    /// Resolves a rate grid: the file mask's own fraction, or the given
    /// (or default) grid checked against the view count.
    fn rates(&self, given: Option<Vec<f64>>, default: &[f64]) -> Result<Vec<f64>, CliError> {
        if self.fixed_mask {
            if given.is_some() {
                return Err(CliError::Config("missing rates cannot be combined with --mask".into()));
            }
            return Ok(vec![self.ds.missing_fraction()]);
        }
        let rates = given.unwrap_or_else(|| default.to_vec());
        if rates.is_empty() {
            return Err(CliError::Config("empty missing-rate grid".into()));
        }
        for &r in &rates {
            check_rate(r, self.ds.n_views())?;
        }
        Ok(rates)
    }

    fn dataset(&self, rate: f64, seed: u64) -> cpspan::Result<MultiViewDataset> {
        if self.fixed_mask {
            return Ok(self.ds.clone());
        }
        let mask = generate_mask(self.ds.n_samples(), self.ds.n_views(), &MaskSpec::uniform(rate, seed))?;
        self.ds.with_mask(mask)
    }
}

fn non_empty<T>(name: &str, xs: &[T]) -> Result<(), CliError> {
    if xs.is_empty() {
        Err(CliError::Config(format!("empty {name} grid")))
    } else {
        Ok(())
    }
}

fn pool(o: &OutputArgs) -> Result<rayon::ThreadPool, CliError> {
    if o.workers == Some(0) {
        return Err(CliError::Config("--workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(o.workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))
}

fn run_dir_name(rate: f64, seed: u64, mode: LossMode) -> String {
    format!("rate{rate}_seed{seed}_{mode}")
}

/// One training run of a sweep.
#[derive(Debug, Clone)]
struct Cell {
    rate: f64,
    seed: u64,
    cfg: TrainConfig,
    dir: PathBuf,
}

impl Cell {
    fn new(root: &Path, rate: f64, seed: u64, cfg: TrainConfig) -> Self {
        let dir = root.join(run_dir_name(rate, seed, cfg.loss_mode));
        Cell { rate, seed, cfg, dir }
    }
}

type Outcome = Result<RunReport, String>;

fn train_cell(src: &Source, cell: &Cell) -> Result<RunOutput, CliError> {
    let ds = src.dataset(cell.rate, cell.seed)?;
    let out = pipeline::run(&ds, &cell.cfg)?;
    save_run(&cell.dir, &out, ds.labels())?;
    Ok(out)
}

fn log_outcome(dir: &Path, outcome: &Outcome) {
    match outcome {
        Ok(r) => match r.metrics {
            Some(m) => info!(
                "{}: acc {:.4} nmi {:.4} f {:.4}",
                dir.display(),
                m.acc,
                m.nmi,
                m.fmeasure
            ),
            None => info!("{}: done (no labels)", dir.display()),
        },
        Err(e) => warn!("{}: failed: {e}", dir.display()),
    }
}

/// Runs every cell on the worker pool, keeping cell order.
fn execute(src: &Source, cells: &[Cell], o: &OutputArgs) -> Result<Vec<Outcome>, CliError> {
    let outcomes = pool(o)?.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let outcome = train_cell(src, cell).map(|out| out.report).map_err(|e| e.to_string());
                log_outcome(&cell.dir, &outcome);
                outcome
            })
            .collect()
    });
    Ok(outcomes)
}

/// `runs,failed,` followed by mean and std of each metric.
fn stats(outcomes: &[&Outcome]) -> String {
    let scores: Vec<_> = outcomes
        .iter()
        .filter_map(|o| o.as_ref().ok().and_then(|r| r.metrics))
        .collect();
    let failed = outcomes.iter().filter(|o| o.is_err()).count();
    let mut row = format!("{},{failed}", outcomes.len());
    let columns: [fn(&pipeline::Scores) -> f64; 3] = [|s| s.acc, |s| s.nmi, |s| s.fmeasure];
    for get in columns {
        if scores.is_empty() {
            row.push_str(",,");
        } else {
            let xs: Vec<f64> = scores.iter().map(get).collect();
            let (m, s) = mean_std(&xs);
            write!(row, ",{m},{s}").unwrap();
        }
    }
    row
}

fn mean_acc(outcomes: &[&Outcome]) -> Option<f64> {
    let accs: Vec<f64> = outcomes
        .iter()
        .filter_map(|o| o.as_ref().ok().and_then(|r| r.metrics).map(|m| m.acc))
        .collect();
    (!accs.is_empty()).then(|| mean_std(&accs).0)
}

/// Writes `failures.csv` when any cell failed and turns that into an error.
fn finish_matrix(root: &Path, cells: &[Cell], outcomes: &[Outcome]) -> Result<(), CliError> {
    let mut failures = String::from("dir,error\n");
    let mut count = 0;
    for (cell, o) in cells.iter().zip(outcomes) {
        if let Err(e) = o {
            count += 1;
            let e = e.replace('"', "'");
            writeln!(failures, "{},\"{e}\"", cell.dir.display()).unwrap();
        }
    }
    if count == 0 {
        return Ok(());
    }
    output::write(&root.join("failures.csv"), failures)?;
    Err(CliError::Runtime(format!(
        "{count} of {} runs failed; see {}",
        cells.len(),
        root.join("failures.csv").display()
    )))
}

pub fn generate(a: &GenerateArgs) -> Result<(), CliError> {
    let ds = synthetic(&a.synth)?;
    check_rate(a.missing_rate, ds.n_views())?;
    let mask = generate_mask(ds.n_samples(), ds.n_views(), &MaskSpec::uniform(a.missing_rate, a.seed))?;
    let saved = save_csv(&ds.with_mask(mask)?, &a.out)?;
    info!(
        "wrote {} views, mask and labels to {}",
        saved.views.len(),
        a.out.display()
    );
    Ok(())
}

pub fn run(a: &SweepArgs) -> Result<(), CliError> {
    let cfg = a.train.resolve()?;
    let src = Source::load(&a.data)?;
    let rates = src.rates(a.missing_rates.clone(), &DEFAULT_RATES)?;
    non_empty("seed", &a.seeds)?;
    let root = a.output.root();

    let cells: Vec<Cell> = rates
        .iter()
        .flat_map(|&rate| {
            a.seeds.iter().map({
                let (root, cfg) = (&root, &cfg);
                move |&seed| Cell::new(root, rate, seed, TrainConfig { seed, ..cfg.clone() })
            })
        })
        .collect();
    let outcomes = execute(&src, &cells, &a.output)?;

    let mut summary = format!("rate,{STATS_HEADER}\n");
    for &rate in &rates {
        let group: Vec<&Outcome> = cells
            .iter()
            .zip(&outcomes)
            .filter(|(c, _)| c.rate == rate)
            .map(|(_, o)| o)
            .collect();
        writeln!(summary, "{rate},{}", stats(&group)).unwrap();
    }
    output::write(&root.join("summary.csv"), summary)?;
    finish_matrix(&root, &cells, &outcomes)
}

pub fn ablate(a: &SweepArgs) -> Result<(), CliError> {
    let cfg = a.train.resolve()?;
    let src = Source::load(&a.data)?;
    let rates = src.rates(a.missing_rates.clone(), &DEFAULT_RATES)?;
    non_empty("seed", &a.seeds)?;
    let root = a.output.root();

    let mut cells = Vec::new();
    for mode in LossMode::ABLATION {
        for &rate in &rates {
            for &seed in &a.seeds {
                cells.push(Cell::new(
                    &root,
                    rate,
                    seed,
                    TrainConfig {
                        seed,
                        loss_mode: mode,
                        ..cfg.clone()
                    },
                ));
            }
        }
    }
    let outcomes = execute(&src, &cells, &a.output)?;

    let mut table = String::from("L_rec,L_ia,L_pa");
    for r in &rates {
        write!(table, ",{r}").unwrap();
    }
    table.push('\n');
    for mode in LossMode::ABLATION {
        let flag = |b: bool| if b { 1 } else { 0 };
        write!(
            table,
            "1,{},{}",
            flag(mode.uses_sample_alignment()),
            flag(mode.uses_prototype_alignment())
        )
        .unwrap();
        for &rate in &rates {
            let group: Vec<&Outcome> = cells
                .iter()
                .zip(&outcomes)
                .filter(|(c, _)| c.rate == rate && c.cfg.loss_mode == mode)
                .map(|(_, o)| o)
                .collect();
            write!(
                table,
                ",{}",
                mean_acc(&group).map(|m| m.to_string()).unwrap_or_default()
            )
            .unwrap();
        }
        table.push('\n');
    }
    output::write(&root.join("ablation.csv"), table)?;
    finish_matrix(&root, &cells, &outcomes)
}

pub fn sensitivity(a: &SensitivityArgs) -> Result<(), CliError> {
    let cfg = a.train.resolve()?;
    let src = Source::load(&a.data)?;
    let rate = src.rates(a.missing_rate.map(|r| vec![r]), &[DEFAULT_RATE])?[0];
    non_empty("alpha", &a.alphas)?;
    non_empty("beta", &a.betas)?;
    non_empty("seed", &a.seeds)?;
    for &x in a.alphas.iter().chain(&a.betas) {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(CliError::Config(format!(
                "alpha and beta must be non-negative, got {x}"
            )));
        }
    }
    let root = a.output.root();

    let mut cells = Vec::new();
    for &alpha in &a.alphas {
        for &beta in &a.betas {
            let dir = root.join(format!("alpha{alpha}_beta{beta}"));
            for &seed in &a.seeds {
                cells.push(Cell::new(
                    &dir,
                    rate,
                    seed,
                    TrainConfig {
                        seed,
                        alpha,
                        beta,
                        ..cfg.clone()
                    },
                ));
            }
        }
    }
    let outcomes = execute(&src, &cells, &a.output)?;

    let mut table = format!("alpha,beta,{STATS_HEADER}\n");
    for &alpha in &a.alphas {
        for &beta in &a.betas {
            let group: Vec<&Outcome> = cells
                .iter()
                .zip(&outcomes)
                .filter(|(c, _)| c.cfg.alpha == alpha && c.cfg.beta == beta)
                .map(|(_, o)| o)
                .collect();
            writeln!(table, "{alpha},{beta},{}", stats(&group)).unwrap();
        }
    }
    output::write(&root.join("sensitivity.csv"), table)?;
    finish_matrix(&root, &cells, &outcomes)
}

/// Trains once per seed at the first rank, then re-imputes and re-clusters
/// the same model at every other rank.
pub fn rank_sweep(a: &RankSweepArgs) -> Result<(), CliError> {
    let cfg = a.train.resolve()?;
    let src = Source::load(&a.data)?;
    let rate = src.rates(a.missing_rate.map(|r| vec![r]), &[DEFAULT_RATE])?[0];
    non_empty("rank", &a.ranks)?;
    non_empty("seed", &a.seeds)?;
    if a.ranks.contains(&0) {
        return Err(CliError::Config("ranks must be at least 1".into()));
    }
    let root = a.output.root();
    let rank_dir = |k: usize| root.join(format!("rank{k}"));

    let per_seed: Vec<Vec<Outcome>> = pool(&a.output)?.install(|| {
        a.seeds
            .par_iter()
            .map(|&seed| {
                let base = TrainConfig {
                    seed,
                    rank: a.ranks[0],
                    ..cfg.clone()
                };
                let first = Cell::new(&rank_dir(a.ranks[0]), rate, seed, base);
                let trained = src.dataset(rate, seed).map_err(CliError::from).and_then(|ds| {
                    let out = train_cell(&src, &first)?;
                    Ok((ds, out))
                });
                a.ranks
                    .iter()
                    .map(|&k| {
                        let dir = rank_dir(k).join(run_dir_name(rate, seed, cfg.loss_mode));
                        let outcome = match &trained {
                            Err(e) => Err(e.to_string()),
                            Ok((_, out)) if k == a.ranks[0] => Ok(out.report.clone()),
                            Ok((ds, out)) => pipeline::with_rank(ds, out, k)
                                .map_err(CliError::from)
                                .and_then(|o| {
                                    save_run(&dir, &o, ds.labels())?;
                                    Ok(o.report)
                                })
                                .map_err(|e| e.to_string()),
                        };
                        log_outcome(&dir, &outcome);
                        outcome
                    })
                    .collect()
            })
            .collect()
    });

    let mut cells = Vec::new();
    let mut outcomes = Vec::new();
    let mut table = format!("rank,{STATS_HEADER}\n");
    for (i, &k) in a.ranks.iter().enumerate() {
        let group: Vec<&Outcome> = per_seed.iter().map(|s| &s[i]).collect();
        writeln!(table, "{k},{}", stats(&group)).unwrap();
        for (&seed, s) in a.seeds.iter().zip(&per_seed) {
            cells.push(Cell::new(
                &rank_dir(k),
                rate,
                seed,
                TrainConfig {
                    seed,
                    rank: k,
                    ..cfg.clone()
                },
            ));
            outcomes.push(s[i].clone());
        }
    }
    output::write(&root.join("rank_sweep.csv"), table)?;
    finish_matrix(&root, &cells, &outcomes)
}

/// One row per sample (fused coordinates, predicted cluster, true label or
/// -1, flag 0) followed by one row per cluster centre (centre coordinates,
/// cluster index, -1, flag 1).
pub fn dump_embeddings(a: &DumpArgs) -> Result<(), CliError> {
    let load = |name: &str| -> Result<String, CliError> { output::read(&a.run.join(name)) };
    let name = |f: &str| a.run.join(f).display().to_string();
    let fused = parse_matrix(&load(output::FUSED)?, &name(output::FUSED))?;
    let centers = parse_matrix(&load(output::CENTERS)?, &name(output::CENTERS))?;
    let predicted = parse_labels(&load(output::PREDICTED)?, &name(output::PREDICTED))?;
    let labels_path = a.run.join(output::LABELS);
    let truth = if labels_path.exists() {
        Some(parse_labels(&output::read(&labels_path)?, &name(output::LABELS))?)
    } else {
        None
    };

    let n = fused.nrows();
    if predicted.len() != n || truth.as_ref().is_some_and(|t| t.len() != n) || centers.ncols() != fused.ncols() {
        return Err(CliError::Runtime(format!(
            "{}: run artifacts disagree on shape",
            a.run.display()
        )));
    }
    let width = fused.ncols() + 3;
    let mut rows = Array2::<f64>::zeros((n + centers.nrows(), width));
    for r in 0..n {
        let mut row = rows.row_mut(r);
        row.slice_mut(ndarray::s![..fused.ncols()]).assign(&fused.row(r));
        row[width - 3] = predicted[r] as f64;
        row[width - 2] = truth.as_ref().map_or(-1.0, |t| t[r] as f64);
    }
    for k in 0..centers.nrows() {
        let mut row = rows.row_mut(n + k);
        row.slice_mut(ndarray::s![..centers.ncols()]).assign(&centers.row(k));
        row[width - 3] = k as f64;
        row[width - 2] = -1.0;
        row[width - 1] = 1.0;
    }
    let out = a.out.clone().unwrap_or_else(|| a.run.join(output::EMBEDDINGS));
    output::write(&out, cpspan::data::format_matrix(&rows))?;
    info!("wrote {} rows to {}", rows.nrows(), out.display());
    Ok(())
}
