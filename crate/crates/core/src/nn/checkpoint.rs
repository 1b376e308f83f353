//! Plain-text autoencoder checkpoints.
//!
//! ```text
//! cpspan-autoencoder v1
//! view <view_id>
//! encoder <layer count>
//! layer <in> <out> <relu|identity>
//! <out lines of `in` space-separated weights>
//! <1 line of `out` space-separated biases>
//! ...
//! decoder <layer count>
//! ...
//! end
//! ```
//!
//! Floats are written with Rust's shortest round-trip formatting, so
//! save → load reproduces every parameter bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::autoencoder::ViewAutoencoder;
use super::layer::{Activation, DenseLayer, Mlp};
use crate::error::{Error, Result};

pub const MAGIC: &str = "cpspan-autoencoder v1";

pub fn to_string(ae: &ViewAutoencoder) -> String {
    let mut s = String::new();
    writeln!(s, "{MAGIC}").unwrap();
    writeln!(s, "view {}", ae.view_id).unwrap();
    for (name, mlp) in [("encoder", &ae.encoder), ("decoder", &ae.decoder)] {
        writeln!(s, "{name} {}", mlp.layers.len()).unwrap();
        for l in &mlp.layers {
            writeln!(s, "layer {} {} {}", l.input_dim(), l.output_dim(), l.activation.name()).unwrap();
            for row in l.weight.rows() {
                write_values(&mut s, row.iter());
            }
            write_values(&mut s, l.bias.iter());
        }
    }
    s.push_str("end\n");
    s
}

fn write_values<'a>(s: &mut String, values: impl Iterator<Item = &'a f64>) {
    for (i, v) in values.enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{v}").unwrap();
    }
    s.push('\n');
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str> {
        match self.inner.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l.trim())
            }
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Checkpoint {
            line: self.line,
            message: message.into(),
        }
    }

    fn keyword(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let l = self.next()?;
        let mut parts = l.split_whitespace();
        if parts.next() != Some(key) {
            return Err(self.err(format!("expected `{key}`")));
        }
        Ok(parts.collect())
    }

    fn count(&self, tok: Option<&&str>) -> Result<usize> {
        tok.and_then(|t| t.parse().ok())
            .ok_or_else(|| self.err("expected a non-negative integer"))
    }

    fn values(&mut self, expected: usize) -> Result<Vec<f64>> {
        let l = self.next()?;
        let mut out = Vec::with_capacity(expected.min(4096));
        for tok in l.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| self.err(format!("invalid number {tok:?}")))?;
            if !v.is_finite() {
                return Err(self.err(format!("non-finite parameter {tok:?}")));
            }
            out.push(v);
        }
        if out.len() != expected {
            return Err(self.err(format!("expected {expected} values, found {}", out.len())));
        }
        Ok(out)
    }
}

fn read_mlp(lines: &mut Lines<'_>, name: &str) -> Result<Mlp> {
    let head = lines.keyword(name)?;
    let n_layers = lines.count(head.first())?;
    if n_layers == 0 {
        return Err(lines.err(format!("{name} has no layers")));
    }
    let mut layers: Vec<DenseLayer> = Vec::new();
    for _ in 0..n_layers {
        let spec = lines.keyword("layer")?;
        let input = lines.count(spec.first())?;
        let output = lines.count(spec.get(1))?;
        if input == 0 || output == 0 {
            return Err(lines.err("layer widths must be positive"));
        }
        let activation = match spec.get(2) {
            Some(&"relu") => Activation::Relu,
            Some(&"identity") => Activation::Identity,
            _ => return Err(lines.err("expected activation relu|identity")),
        };
        if spec.len() != 3 {
            return Err(lines.err("layer line takes exactly three fields"));
        }
        if let Some(prev) = layers.last() {
            if prev.output_dim() != input {
                return Err(lines.err(format!(
                    "layer input {input} does not match previous output {}",
                    prev.output_dim()
                )));
            }
        }
        let mut weight = Vec::new();
        for _ in 0..output {
            weight.extend(lines.values(input)?);
        }
        let bias = lines.values(output)?;
        layers.push(DenseLayer {
            weight: Array2::from_shape_vec((output, input), weight).expect("sized above"),
            bias: Array1::from(bias),
            activation,
        });
    }
    Ok(Mlp { layers })
}

pub fn parse(text: &str) -> Result<ViewAutoencoder> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    if lines.next()? != MAGIC {
        return Err(lines.err(format!("missing header `{MAGIC}`")));
    }
    let view = lines.keyword("view")?;
    let view_id = lines.count(view.first())?;
    let encoder = read_mlp(&mut lines, "encoder")?;
    let decoder = read_mlp(&mut lines, "decoder")?;
    if encoder.output_dim() != decoder.input_dim() || decoder.output_dim() != encoder.input_dim() {
        return Err(lines.err("encoder and decoder widths do not mirror"));
    }
    if lines.next()? != "end" {
        return Err(lines.err("expected `end`"));
    }
    Ok(ViewAutoencoder {
        view_id,
        encoder,
        decoder,
    })
}

pub fn save(ae: &ViewAutoencoder, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| Error::Io {
            file: parent.display().to_string(),
            source,
        })?;
    }
    fs::write(path, to_string(ae)).map_err(|source| Error::Io {
        file: path.display().to_string(),
        source,
    })
}

pub fn load(path: &Path) -> Result<ViewAutoencoder> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        file: path.display().to_string(),
        source,
    })?;
    parse(&text)
}
