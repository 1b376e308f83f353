//! Headerless comma-separated ingestion.
//!
//! Views are one sample per line, features comma-separated. The mask file
//! has one `0`/`1` column per view. The labels file holds one non-negative
//! integer per line. Blank lines are skipped; row numbers in errors are
//! 1-based line numbers.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::MultiViewDataset;
use crate::error::{Error, ParseErrorKind, Result};

fn parse_err(file: &str, row: usize, kind: ParseErrorKind) -> Error {
    Error::Parse {
        file: file.to_string(),
        row,
        kind,
    }
}

fn records(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

/// Parses a rectangular real matrix. Row numbers in the result follow
/// record order, not line numbers.
pub fn parse_matrix(text: &str, file: &str) -> Result<Array2<f64>> {
    let mut data = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (line, rec) in records(text) {
        let before = data.len();
        for tok in rec.split(',') {
            let tok = tok.trim();
            let x: f64 = tok
                .parse()
                .map_err(|_| parse_err(file, line, ParseErrorKind::InvalidNumber(tok.into())))?;
            data.push(x);
        }
        let found = data.len() - before;
        match width {
            None => width = Some(found),
            Some(w) if w != found => {
                return Err(parse_err(
                    file,
                    line,
                    ParseErrorKind::DimensionMismatch { expected: w, found },
                ))
            }
            _ => {}
        }
        rows += 1;
    }
    let width = width.ok_or_else(|| parse_err(file, 0, ParseErrorKind::Empty))?;
    Ok(Array2::from_shape_vec((rows, width), data).expect("row widths checked"))
}

/// Parses a 0/1 observation mask. Every row must observe at least one view.
pub fn parse_mask(text: &str, file: &str) -> Result<Array2<bool>> {
    let mut data = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (line, rec) in records(text) {
        let before = data.len();
        for tok in rec.split(',') {
            let tok = tok.trim();
            let bit = match tok {
                "0" => false,
                "1" => true,
                _ => return Err(parse_err(file, line, ParseErrorKind::NonBinaryMask(tok.into()))),
            };
            data.push(bit);
        }
        let found = data.len() - before;
        match width {
            None => width = Some(found),
            Some(w) if w != found => {
                return Err(parse_err(
                    file,
                    line,
                    ParseErrorKind::DimensionMismatch { expected: w, found },
                ))
            }
            _ => {}
        }
        if !data[before..].iter().any(|&b| b) {
            return Err(parse_err(file, line, ParseErrorKind::NoObservedView));
        }
        rows += 1;
    }
    let width = width.ok_or_else(|| parse_err(file, 0, ParseErrorKind::Empty))?;
    Ok(Array2::from_shape_vec((rows, width), data).expect("row widths checked"))
}

pub fn parse_labels(text: &str, file: &str) -> Result<Vec<usize>> {
    let labels = records(text)
        .map(|(line, rec)| {
            rec.parse::<usize>()
                .map_err(|_| parse_err(file, line, ParseErrorKind::InvalidLabel(rec.into())))
        })
        .collect::<Result<Vec<_>>>()?;
    if labels.is_empty() {
        return Err(parse_err(file, 0, ParseErrorKind::Empty));
    }
    Ok(labels)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        file: path.display().to_string(),
        source,
    })
}

/// Loads a dataset from per-view CSVs, a mask CSV and optional labels.
///
/// The cluster count is the number of distinct labels when labels are
/// given; otherwise `n_clusters` is required.
pub fn load_csv<P: AsRef<Path>>(
    view_paths: &[P],
    mask_path: impl AsRef<Path>,
    labels_path: Option<&Path>,
    n_clusters: Option<usize>,
) -> Result<MultiViewDataset> {
    if view_paths.is_empty() {
        return Err(Error::invalid("no view files given"));
    }
    let mask_path = mask_path.as_ref();
    let mask_name = mask_path.display().to_string();
    let mask = parse_mask(&read(mask_path)?, &mask_name)?;

    if mask.ncols() != view_paths.len() {
        return Err(parse_err(
            &mask_name,
            1,
            ParseErrorKind::DimensionMismatch {
                expected: view_paths.len(),
                found: mask.ncols(),
            },
        ));
    }

    let mut views = Vec::with_capacity(view_paths.len());
    for (v, p) in view_paths.iter().enumerate() {
        let p = p.as_ref();
        let name = p.display().to_string();
        let x = parse_matrix(&read(p)?, &name)?;
        if x.nrows() != mask.nrows() {
            return Err(parse_err(
                &mask_name,
                x.nrows().min(mask.nrows()) + 1,
                ParseErrorKind::DimensionMismatch {
                    expected: x.nrows(),
                    found: mask.nrows(),
                },
            ));
        }
        for (r, row) in x.rows().into_iter().enumerate() {
            if mask[[r, v]] {
                if let Some(bad) = row.iter().find(|f| !f.is_finite()) {
                    return Err(parse_err(&name, r + 1, ParseErrorKind::NonFinite(bad.to_string())));
                }
            }
        }
        views.push(x);
    }

    let labels = match labels_path {
        Some(p) => {
            let name = p.display().to_string();
            let l = parse_labels(&read(p)?, &name)?;
            if l.len() != mask.nrows() {
                return Err(parse_err(
                    &name,
                    l.len().min(mask.nrows()) + 1,
                    ParseErrorKind::DimensionMismatch {
                        expected: mask.nrows(),
                        found: l.len(),
                    },
                ));
            }
            Some(l)
        }
        None => None,
    };

    let k = match (&labels, n_clusters) {
        (_, Some(k)) => k,
        (Some(l), None) => l.iter().collect::<BTreeSet<_>>().len(),
        (None, None) => return Err(Error::invalid("cluster count required when no labels are supplied")),
    };
    MultiViewDataset::new(views, mask, labels, k)
}

/// Inverse of [`parse_matrix`], bit for bit.
pub fn format_matrix(x: &Array2<f64>) -> String {
    let mut out = String::new();
    for row in x.rows() {
        for (c, v) in row.iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            // `Display` for f64 prints the shortest string that parses back
            // to the same bits.
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_matrix(path: &Path, x: &Array2<f64>) -> Result<()> {
    write_file(path, format_matrix(x))
}

fn write_file(path: &Path, contents: String) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| Error::Io {
            file: parent.display().to_string(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| Error::Io {
        file: path.display().to_string(),
        source,
    })
}

/// Paths written by [`save_csv`].
#[derive(Debug, Clone)]
pub struct SavedDataset {
    pub views: Vec<PathBuf>,
    pub mask: PathBuf,
    pub labels: Option<PathBuf>,
}

/// Writes `view_<v>.csv`, `mask.csv` and (if present) `labels.csv` under `dir`.
pub fn save_csv(ds: &MultiViewDataset, dir: &Path) -> Result<SavedDataset> {
    let mut views = Vec::new();
    for v in 0..ds.n_views() {
        let p = dir.join(format!("view_{v}.csv"));
        write_matrix(&p, &ds.view(v).to_owned())?;
        views.push(p);
    }
    let mut mask = String::new();
    for row in ds.mask().rows() {
        let bits: Vec<&str> = row.iter().map(|&b| if b { "1" } else { "0" }).collect();
        mask.push_str(&bits.join(","));
        mask.push('\n');
    }
    let mask_path = dir.join("mask.csv");
    write_file(&mask_path, mask)?;
    let labels = match ds.labels() {
        Some(l) => {
            let p = dir.join("labels.csv");
            let mut s = String::new();
            for x in l {
                writeln!(s, "{x}").unwrap();
            }
            write_file(&p, s)?;
            Some(p)
        }
        None => None,
    };
    Ok(SavedDataset {
        views,
        mask: mask_path,
        labels,
    })
}
