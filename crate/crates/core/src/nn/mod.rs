//! Double-precision building blocks for the two networks: lookup tables,
//! dense layers, losses, Adadelta and finite-difference gradient checking.

pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod optim;

pub use checkpoint::Checkpoint;
pub use gradcheck::{gradient_check, relative_error, GradCheckReport};
pub use layers::{Activation, DenseLayer, EmbeddingTable, Matrix, Mlp};
pub use loss::{
    clamp_probability, cosine_similarity, cross_entropy, similarity_loss, softmax, total_loss,
    Cosine, LossValues, PROB_CLAMP, SIMILARITY_EPS,
};
pub use optim::{AdadeltaState, OptimizerConfig};

use crate::error::{Error, Result};

/// A model whose trainable state can be enumerated as named flat tensors.
///
/// Both methods must list the same tensors in the same order. Gradients
/// are stored in a second instance of the same type.
pub trait Parameters {
    fn params(&self) -> Vec<(String, &[f64])>;
    fn params_mut(&mut self) -> Vec<(String, &mut [f64])>;

    /// A copy with every parameter set to zero, used as a gradient buffer.
    fn zeroed(&self) -> Self
    where
        Self: Clone + Sized,
    {
        let mut z = self.clone();
        for (_, p) in z.params_mut() {
            p.fill(0.0);
        }
        z
    }

    fn num_params(&self) -> usize {
        self.params().iter().map(|(_, p)| p.len()).sum()
    }

    /// Fails with the name of the first tensor holding a NaN or infinity.
    fn check_finite(&self) -> Result<()> {
        for (name, p) in self.params() {
            if let Some(i) = p.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    path: format!("{name}[{i}]"),
                });
            }
        }
        Ok(())
    }
}

impl Parameters for DenseLayer {
    fn params(&self) -> Vec<(String, &[f64])> {
        vec![
            ("w".to_owned(), self.weights.as_slice()),
            ("b".to_owned(), self.bias.as_slice()),
        ]
    }

    fn params_mut(&mut self) -> Vec<(String, &mut [f64])> {
        vec![
            ("w".to_owned(), self.weights.as_mut_slice()),
            ("b".to_owned(), self.bias.as_mut_slice()),
        ]
    }
}

/// Only rows after PAD are parameters, and none of a frozen table.
impl Parameters for EmbeddingTable {
    fn params(&self) -> Vec<(String, &[f64])> {
        if !self.trainable {
            return Vec::new();
        }
        let skip = self.dim().min(self.weights.as_slice().len());
        vec![("table".to_owned(), &self.weights.as_slice()[skip..])]
    }

    fn params_mut(&mut self) -> Vec<(String, &mut [f64])> {
        if !self.trainable {
            return Vec::new();
        }
        let skip = self.dim().min(self.weights.as_slice().len());
        vec![("table".to_owned(), &mut self.weights.as_mut_slice()[skip..])]
    }
}

impl Parameters for Mlp {
    fn params(&self) -> Vec<(String, &[f64])> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| prefixed(&format!("layer{i}"), l.params()))
            .collect()
    }

    fn params_mut(&mut self) -> Vec<(String, &mut [f64])> {
        self.layers
            .iter_mut()
            .enumerate()
            .flat_map(|(i, l)| prefixed(&format!("layer{i}"), l.params_mut()))
            .collect()
    }
}

/// Prepends `prefix.` to every tensor name.
pub fn prefixed<T>(prefix: &str, params: Vec<(String, T)>) -> Vec<(String, T)> {
    params
        .into_iter()
        .map(|(n, p)| (format!("{prefix}.{n}"), p))
        .collect()
}
