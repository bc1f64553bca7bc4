use serde::{Deserialize, Serialize};

use super::Parameters;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub rho: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            rho: 0.95,
            eps: 1e-6,
            batch_size: 32,
            epochs: 30,
        }
    }
}

/// Running averages of squared gradients and squared updates, one buffer per
/// parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdadeltaState {
    pub rho: f64,
    pub eps: f64,
    pub sq_grad: Vec<Vec<f64>>,
    pub sq_update: Vec<Vec<f64>>,
}

impl AdadeltaState {
    pub fn new<M: Parameters>(model: &M, rho: f64, eps: f64) -> Self {
        let shapes: Vec<usize> = model.params().iter().map(|(_, p)| p.len()).collect();
        Self {
            rho,
            eps,
            sq_grad: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            sq_update: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// One elementwise update of `model` from `grads` (same type, same layout).
    pub fn step<M: Parameters>(&mut self, model: &mut M, grads: &M) {
        let rho = self.rho;
        let eps = self.eps;
        let grads = grads.params();
        for (k, (_, params)) in model.params_mut().into_iter().enumerate() {
            let g = grads[k].1;
            let eg = &mut self.sq_grad[k];
            let ex = &mut self.sq_update[k];
            debug_assert_eq!(params.len(), g.len());
            for i in 0..params.len() {
                eg[i] = rho * eg[i] + (1.0 - rho) * g[i] * g[i];
                let dx = -((ex[i] + eps).sqrt() / (eg[i] + eps).sqrt()) * g[i];
                ex[i] = rho * ex[i] + (1.0 - rho) * dx * dx;
                params[i] += dx;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, DenseLayer, Matrix};
    use proptest::prelude::*;

    fn scalar(x: f64) -> DenseLayer {
        DenseLayer {
            weights: Matrix::from_rows(&[vec![x]]).unwrap(),
            bias: vec![0.0],
            activation: Activation::Identity,
        }
    }

    #[test]
    fn first_step_matches_hand_evaluation() {
        let mut p = scalar(0.0);
        let mut g = scalar(1.0);
        g.bias[0] = 0.0;
        let mut st = AdadeltaState::new(&p, 0.95, 1e-6);
        st.step(&mut p, &g);
        assert!((st.sq_grad[0][0] - 0.05).abs() < 1e-15);
        // -sqrt(1e-6) / sqrt(0.05 + 1e-6)
        let expected = -(1e-6f64).sqrt() / (0.050001f64).sqrt();
        assert!((p.weights.as_slice()[0] - expected).abs() < 1e-15 * expected.abs());
        assert!((expected - (-0.004_472_091)).abs() < 1e-9);
    }

    #[test]
    fn zero_gradient_is_a_no_op_that_decays_accumulators() {
        let mut p = scalar(0.7);
        let mut st = AdadeltaState::new(&p, 0.95, 1e-6);
        st.sq_grad[0][0] = 2.0;
        st.sq_update[0][0] = 4.0;
        let zero = p.zeroed();
        let before = p.clone();
        st.step(&mut p, &zero);
        assert_eq!(p, before);
        assert!((st.sq_grad[0][0] - 1.9).abs() < 1e-15);
        assert!((st.sq_update[0][0] - 3.8).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn accumulators_stay_nonnegative(grads in prop::collection::vec(-1e3f64..1e3, 1..20)) {
            let mut p = scalar(0.1);
            let mut st = AdadeltaState::new(&p, 0.95, 1e-6);
            for g in grads {
                let mut gl = p.zeroed();
                gl.weights.as_mut_slice()[0] = g;
                gl.bias[0] = -g;
                st.step(&mut p, &gl);
                prop_assert!(st.sq_grad.iter().flatten().all(|&x| x >= 0.0));
                prop_assert!(st.sq_update.iter().flatten().all(|&x| x >= 0.0));
            }
        }
    }
}
