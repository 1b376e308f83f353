use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// A named parameter tensor and its gradient, both flattened row-major.
pub struct ParamSlot<'a> {
    pub name: String,
    pub value: &'a mut [f64],
    pub grad: &'a [f64],
}

/// Adam moments for a fixed, ordered list of tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, sizes: &[usize]) -> Self {
        Self {
            config,
            step: 0,
            first: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.first.iter().map(Vec::len).collect()
    }

    /// One bias-corrected Adam update over `slots`, which must list tensors
    /// in the order and sizes this state was created with.
    pub fn step(&mut self, slots: &mut [ParamSlot<'_>]) -> Result<()> {
        if slots.len() != self.first.len() {
            return Err(Error::invalid(format!(
                "optimizer tracks {} tensors, got {}",
                self.first.len(),
                slots.len()
            )));
        }
        for (slot, m) in slots.iter().zip(&self.first) {
            if slot.value.len() != m.len() || slot.grad.len() != m.len() {
                return Err(Error::invalid(format!("tensor {} changed shape", slot.name)));
            }
            if slot.grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence {
                    tensor: format!("{} (gradient)", slot.name),
                });
            }
        }

        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.step as f64;
        let c1 = 1.0 - beta1.powf(t);
        let c2 = 1.0 - beta2.powf(t);
        for ((slot, m), v) in slots.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            for i in 0..m.len() {
                let g = slot.grad[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                slot.value[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            if slot.value.iter().any(|x| !x.is_finite()) {
                return Err(Error::Divergence {
                    tensor: slot.name.clone(),
                });
            }
        }
        Ok(())
    }
}
