use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }
}

/// `y = act(x Wᵀ + b)` with `W` stored `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    /// Uniform Glorot initialisation, zero bias.
    pub fn glorot<R: Rng>(input: usize, output: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = (6.0 / (input + output) as f64).sqrt();
        Self {
            weight: Array2::from_shape_fn((output, input), |_| rng.random_range(-limit..=limit)),
            bias: Array1::zeros(output),
            activation,
        }
    }

    pub fn zeros(input: usize, output: usize, activation: Activation) -> Self {
        Self {
            weight: Array2::zeros((output, input)),
            bias: Array1::zeros(output),
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }

    fn pre_activation(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weight.t()) + &self.bias
    }

    fn activate(&self, mut z: Array2<f64>) -> Array2<f64> {
        if self.activation == Activation::Relu {
            z.mapv_inplace(|v| v.max(0.0));
        }
        z
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

/// Per-layer inputs and pre-activations from one forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradients {
    pub layers: Vec<LayerGrad>,
}

impl MlpGradients {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            layers: mlp
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weight: Array2::zeros(l.weight.dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
}

impl Mlp {
    /// Stack mapping `widths[0] → … → widths[last]`; ReLU on hidden layers,
    /// identity on the last.
    pub fn glorot<R: Rng>(widths: &[usize], rng: &mut R) -> Self {
        assert!(widths.len() >= 2, "an MLP needs input and output widths");
        let last = widths.len() - 2;
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last {
                    Activation::Identity
                } else {
                    Activation::Relu
                };
                DenseLayer::glorot(w[0], w[1], act, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    fn check_input(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::invalid(format!(
                "batch width {} does not match layer input {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        let mut h = x.clone();
        for l in &self.layers {
            h = l.activate(l.pre_activation(&h));
        }
        Ok(h)
    }

    pub fn forward_taped(&self, x: &Array2<f64>) -> Result<(Array2<f64>, Tape)> {
        self.check_input(x)?;
        let mut tape = Tape {
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(self.layers.len()),
        };
        let mut h = x.clone();
        for l in &self.layers {
            let z = l.pre_activation(&h);
            tape.inputs.push(h);
            h = l.activate(z.clone());
            tape.pre.push(z);
        }
        Ok((h, tape))
    }

    /// Back-propagates `grad_out` (same shape as the forward output).
    /// Returns parameter gradients and the gradient with respect to the input.
    pub fn backward(&self, tape: &Tape, grad_out: &Array2<f64>) -> Result<(MlpGradients, Array2<f64>)> {
        if tape.pre.len() != self.layers.len() {
            return Err(Error::invalid("tape was recorded on a different network"));
        }
        let last = tape.pre.last().unwrap();
        if last.dim() != grad_out.dim() {
            return Err(Error::invalid(format!(
                "output gradient {:?} does not match forward output {:?}",
                grad_out.dim(),
                last.dim()
            )));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = grad_out.clone();
        for (i, l) in self.layers.iter().enumerate().rev() {
            if l.activation == Activation::Relu {
                // subgradient 0 at z == 0
                ndarray::Zip::from(&mut g).and(&tape.pre[i]).for_each(|g, &z| {
                    if z <= 0.0 {
                        *g = 0.0
                    }
                });
            }
            let weight = g.t().dot(&tape.inputs[i]);
            let bias = g.sum_axis(Axis(0));
            let next = g.dot(&l.weight);
            grads.push(LayerGrad { weight, bias });
            g = next;
        }
        grads.reverse();
        Ok((MlpGradients { layers: grads }, g))
    }
}
