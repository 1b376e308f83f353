//! Small dense-network engine with hand-written reverse-mode gradients.

mod adam;
mod autoencoder;
pub mod checkpoint;
mod layer;

pub use adam::{AdamConfig, AdamState, ParamSlot};
pub use autoencoder::{AeGradients, AeTape, ViewAutoencoder};
pub use layer::{Activation, DenseLayer, LayerGrad, Mlp, MlpGradients, Tape};

use ndarray::Array2;

use crate::error::{Error, Result};

/// Squared reconstruction error summed over elements, divided by batch size.
///
/// Returns the loss and its gradient with respect to `recon`.
pub fn reconstruction_loss(batch: &Array2<f64>, recon: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    if batch.dim() != recon.dim() {
        return Err(Error::invalid(format!(
            "reconstruction shape {:?} vs batch {:?}",
            recon.dim(),
            batch.dim()
        )));
    }
    let b = batch.nrows().max(1) as f64;
    let diff = recon - batch;
    let loss = diff.iter().map(|x| x * x).sum::<f64>() / b;
    Ok((loss, diff * (2.0 / b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn reconstruction_loss_cases() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        assert_eq!(reconstruction_loss(&x, &x).unwrap().0, 0.0);
        let (l, g) = reconstruction_loss(&array![[1.0, 0.0]], &array![[0.0, 0.0]]).unwrap();
        assert_eq!(l, 1.0);
        assert_eq!(g, array![[-2.0, 0.0]]);
        assert!(reconstruction_loss(&x, &array![[1.0, 2.0]]).is_err());
    }

    #[test]
    fn reconstruction_loss_direct_sum() {
        use rand::Rng;
        let mut rng = crate::seed::rng(3, "t", &[]);
        let a = Array2::<f64>::from_shape_fn((8, 5), |_| rng.random_range(-1.0..1.0));
        let b = Array2::<f64>::from_shape_fn((8, 5), |_| rng.random_range(-1.0..1.0));
        let mut direct = 0.0_f64;
        for r in 0..8 {
            for c in 0..5 {
                direct += (a[[r, c]] - b[[r, c]]).powi(2);
            }
        }
        let (l, _) = reconstruction_loss(&a, &b).unwrap();
        assert!((l - direct / 8.0).abs() < 1e-12);
    }
}
