use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::PAD;

/// Row-major dense matrix of doubles.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Dimension {
                    context: "matrix row",
                    expected: cols,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Identity,
}

/// Lookup table; row [`PAD`] is pinned at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    pub weights: Matrix,
    pub trainable: bool,
}

impl EmbeddingTable {
    /// Entries uniform in ±0.5/dim, PAD row zero.
    pub fn init<R: Rng>(rows: usize, dim: usize, rng: &mut R) -> Self {
        let bound = 0.5 / dim as f64;
        let mut weights = Matrix::zeros(rows, dim);
        for r in 0..rows {
            for x in weights.row_mut(r) {
                *x = rng.gen_range(-bound..=bound);
            }
        }
        if rows > PAD {
            weights.row_mut(PAD).fill(0.0);
        }
        Self {
            weights,
            trainable: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn vocab_size(&self) -> usize {
        self.weights.rows()
    }

    pub fn lookup(&self, id: usize) -> &[f64] {
        self.weights.row(id)
    }

    /// Adds `g` to the gradient row of `id`, skipping the frozen PAD row and
    /// frozen tables.
    pub fn accumulate(&self, grad: &mut EmbeddingTable, id: usize, g: &[f64]) {
        if !self.trainable || id == PAD {
            return;
        }
        for (a, b) in grad.weights.row_mut(id).iter_mut().zip(g) {
            *a += b;
        }
    }

    /// Overwrites rows with pretrained vectors; PAD stays zero.
    pub fn load_rows(&mut self, rows: impl IntoIterator<Item = (usize, Vec<f64>)>) -> Result<()> {
        for (id, v) in rows {
            if v.len() != self.dim() {
                return Err(Error::Dimension {
                    context: "pretrained vector",
                    expected: self.dim(),
                    actual: v.len(),
                });
            }
            if id != PAD && id < self.vocab_size() {
                self.weights.row_mut(id).copy_from_slice(&v);
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    /// in_dim × out_dim.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    /// Glorot-uniform weights, zero bias.
    pub fn init<R: Rng>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let mut weights = Matrix::zeros(in_dim, out_dim);
        for w in weights.as_mut_slice() {
            *w = rng.gen_range(-bound..=bound);
        }
        Self {
            weights,
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.cols()
    }

    /// `activation(input · W + b)`.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.in_dim() {
            return Err(Error::Dimension {
                context: "dense layer input",
                expected: self.in_dim(),
                actual: input.len(),
            });
        }
        Ok(self.apply(input))
    }

    pub(crate) fn apply(&self, input: &[f64]) -> Vec<f64> {
        debug_assert_eq!(input.len(), self.in_dim());
        let out = self.out_dim();
        let mut y = self.bias.clone();
        for (i, &x) in input.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let row = &self.weights.as_slice()[i * out..(i + 1) * out];
            for (yj, wij) in y.iter_mut().zip(row) {
                *yj += x * wij;
            }
        }
        if self.activation == Activation::Tanh {
            y.iter_mut().for_each(|v| *v = v.tanh());
        }
        y
    }

    /// Accumulates parameter gradients into `grad` and returns the gradient
    /// with respect to `input`. `output` is the value returned by the forward pass.
    pub(crate) fn backward(
        &self,
        input: &[f64],
        output: &[f64],
        d_output: &[f64],
        grad: &mut DenseLayer,
    ) -> Vec<f64> {
        let out = self.out_dim();
        let dz: Vec<f64> = match self.activation {
            Activation::Tanh => d_output
                .iter()
                .zip(output)
                .map(|(d, y)| d * (1.0 - y * y))
                .collect(),
            Activation::Identity => d_output.to_vec(),
        };
        for (b, d) in grad.bias.iter_mut().zip(&dz) {
            *b += d;
        }
        let w = self.weights.as_slice();
        let gw = grad.weights.as_mut_slice();
        let mut dx = vec![0.0; input.len()];
        for (i, &x) in input.iter().enumerate() {
            let row = &w[i * out..(i + 1) * out];
            let grow = &mut gw[i * out..(i + 1) * out];
            let mut acc = 0.0;
            for j in 0..out {
                grow[j] += x * dz[j];
                acc += row[j] * dz[j];
            }
            dx[i] = acc;
        }
        dx
    }
}

/// A stack of dense layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
}

impl Mlp {
    /// Layer activations; element 0 is the input, the last is the output.
    pub(crate) fn forward_trace(&self, input: Vec<f64>) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input);
        for layer in &self.layers {
            let next = layer.apply(acts.last().expect("nonempty"));
            acts.push(next);
        }
        acts
    }

    pub(crate) fn backward(
        &self,
        acts: &[Vec<f64>],
        d_output: Vec<f64>,
        grad: &mut Mlp,
    ) -> Vec<f64> {
        let mut d = d_output;
        for (k, layer) in self.layers.iter().enumerate().rev() {
            d = layer.backward(&acts[k], &acts[k + 1], &d, &mut grad.layers[k]);
        }
        d
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, DenseLayer::out_dim)
    }
}
