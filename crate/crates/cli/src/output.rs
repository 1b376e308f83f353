//! Files written for each run and for the sweep tables.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use cpspan::data::write_matrix;
use cpspan::nn::checkpoint;
use cpspan::pipeline::RunOutput;

use crate::CliError;

pub const REPORT: &str = "report.json";
pub const LOSSES: &str = "losses.csv";
pub const FUSED: &str = "fused.csv";
pub const PREDICTED: &str = "predicted.csv";
pub const CENTERS: &str = "centers.csv";
pub const LABELS: &str = "labels.csv";
pub const EMBEDDINGS: &str = "embeddings.csv";

pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn labels_text(labels: &[usize]) -> String {
    labels.iter().map(|l| format!("{l}\n")).collect()
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes every artifact of one run into `dir`.
pub fn save_run(dir: &Path, out: &RunOutput, truth: Option<&[usize]>) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(&out.report).expect("report serialises");
    write(&dir.join(REPORT), json + "\n")?;

    let mut losses = String::from("stage,epoch,rec,ia,cl,pa,total\n");
    for e in &out.report.curve {
        let stage = match e.stage {
            cpspan::pipeline::Stage::Pretrain => "pretrain",
            cpspan::pipeline::Stage::Align => "align",
        };
        writeln!(
            losses,
            "{stage},{},{},{},{},{},{}",
            e.epoch,
            e.rec,
            opt(e.ia),
            opt(e.cl),
            opt(e.pa),
            e.total
        )
        .unwrap();
    }
    write(&dir.join(LOSSES), losses)?;

    for ae in &out.autoencoders {
        checkpoint::save(ae, &dir.join(format!("view{}.ckpt", ae.view_id)))?;
    }
    write_matrix(&dir.join(FUSED), &out.fused)?;
    write_matrix(&dir.join(CENTERS), &out.centers)?;
    write(&dir.join(PREDICTED), labels_text(&out.predicted))?;
    if let Some(t) = truth {
        write(&dir.join(LABELS), labels_text(t))?;
    }
    Ok(())
}

/// Mean and sample standard deviation; the deviation is 0 for one value.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
