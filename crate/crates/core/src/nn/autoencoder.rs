use ndarray::Array2;
use rand::Rng;

use super::adam::ParamSlot;
use super::layer::{Mlp, MlpGradients, Tape};
use crate::error::Result;

/// Encoder/decoder pair for one view.
///
/// The encoder maps `D_v → hidden… → d`; the decoder mirrors it back to
/// `D_v`. Hidden layers use ReLU, the embedding and output layers are linear.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewAutoencoder {
    pub view_id: usize,
    pub encoder: Mlp,
    pub decoder: Mlp,
}

#[derive(Debug, Clone)]
pub struct AeTape {
    encoder: Tape,
    decoder: Tape,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AeGradients {
    pub encoder: MlpGradients,
    pub decoder: MlpGradients,
}

impl AeGradients {
    pub fn zeros_like(ae: &ViewAutoencoder) -> Self {
        Self {
            encoder: MlpGradients::zeros_like(&ae.encoder),
            decoder: MlpGradients::zeros_like(&ae.decoder),
        }
    }

    /// Flattened tensors in [`ViewAutoencoder::tensor_names`] order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.encoder
            .layers
            .iter()
            .chain(&self.decoder.layers)
            .flat_map(|g| {
                [
                    g.weight.as_slice().expect("standard layout"),
                    g.bias.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }
}

impl ViewAutoencoder {
    pub fn new<R: Rng>(view_id: usize, input_dim: usize, hidden: &[usize], d: usize, rng: &mut R) -> Self {
        let mut enc = Vec::with_capacity(hidden.len() + 2);
        enc.push(input_dim);
        enc.extend_from_slice(hidden);
        enc.push(d);
        let dec: Vec<usize> = enc.iter().rev().copied().collect();
        Self {
            view_id,
            encoder: Mlp::glorot(&enc, rng),
            decoder: Mlp::glorot(&dec, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn embedding_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count()
    }

    pub fn encode(&self, batch: &Array2<f64>) -> Result<Array2<f64>> {
        self.encoder.forward(batch)
    }

    pub fn decode(&self, h: &Array2<f64>) -> Result<Array2<f64>> {
        self.decoder.forward(h)
    }

    pub fn encode_taped(&self, batch: &Array2<f64>) -> Result<(Array2<f64>, Tape)> {
        self.encoder.forward_taped(batch)
    }

    pub fn decode_taped(&self, h: &Array2<f64>) -> Result<(Array2<f64>, Tape)> {
        self.decoder.forward_taped(h)
    }

    /// Full pass returning the embedding, the reconstruction and a tape.
    pub fn forward_taped(&self, batch: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>, AeTape)> {
        let (h, encoder) = self.encode_taped(batch)?;
        let (recon, decoder) = self.decode_taped(&h)?;
        Ok((h, recon, AeTape { encoder, decoder }))
    }

    /// Gradients from an upstream gradient on the reconstruction plus an
    /// optional extra gradient injected directly on the embedding.
    pub fn backward(
        &self,
        tape: &AeTape,
        grad_recon: &Array2<f64>,
        grad_embedding: Option<&Array2<f64>>,
    ) -> Result<(AeGradients, Array2<f64>)> {
        let (decoder, mut grad_h) = self.decoder.backward(&tape.decoder, grad_recon)?;
        if let Some(extra) = grad_embedding {
            grad_h += extra;
        }
        let (encoder, grad_x) = self.encoder.backward(&tape.encoder, &grad_h)?;
        Ok((AeGradients { encoder, decoder }, grad_x))
    }

    pub fn tensor_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (part, mlp) in [("encoder", &self.encoder), ("decoder", &self.decoder)] {
            for i in 0..mlp.layers.len() {
                out.push(format!("view{}.{part}.{i}.weight", self.view_id));
                out.push(format!("view{}.{part}.{i}.bias", self.view_id));
            }
        }
        out
    }

    pub fn tensor_sizes(&self) -> Vec<usize> {
        self.encoder
            .layers
            .iter()
            .chain(&self.decoder.layers)
            .flat_map(|l| [l.weight.len(), l.bias.len()])
            .collect()
    }

    /// Mutable flattened parameter tensors in [`Self::tensor_names`] order.
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.encoder
            .layers
            .iter_mut()
            .chain(self.decoder.layers.iter_mut())
            .flat_map(|l| {
                [
                    l.weight.as_slice_mut().expect("standard layout"),
                    l.bias.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn param_slots<'a>(&'a mut self, grads: &'a AeGradients) -> Vec<ParamSlot<'a>> {
        let names = self.tensor_names();
        self.tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(names)
            .map(|((value, grad), name)| ParamSlot { name, value, grad })
            .collect()
    }
}
