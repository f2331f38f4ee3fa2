use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fully connected layer `y = W x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// `[outputs, inputs]`
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub input: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    pub fn init<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let mut layer = Self::zeros(inputs, outputs);
        let limit = (6.0 / inputs as f64).sqrt();
        for w in &mut layer.weights {
            *w = rng.random_range(-limit..=limit);
        }
        layer
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.inputs {
            return Err(Error::ShapeMismatch {
                expected: format!("[{}]", self.inputs),
                got: format!("[{}]", x.len()),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.forward_raw(x))
    }

    pub(crate) fn forward_raw(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }

    pub fn backward(&self, x: &[f64], grad_out: &[f64]) -> Result<DenseGrads> {
        self.check_input(x)?;
        if grad_out.len() != self.outputs {
            return Err(Error::ShapeMismatch {
                expected: format!("[{}]", self.outputs),
                got: format!("[{}]", grad_out.len()),
            });
        }
        let mut grads = DenseGrads {
            input: vec![0.0; self.inputs],
            weights: vec![0.0; self.weights.len()],
            bias: vec![0.0; self.outputs],
        };
        self.backward_raw(x, grad_out, &mut grads.weights, &mut grads.bias, Some(&mut grads.input));
        Ok(grads)
    }

    /// Accumulates parameter gradients; optionally overwrites the input gradient.
    pub(crate) fn backward_raw(
        &self,
        x: &[f64],
        grad_out: &[f64],
        grad_w: &mut [f64],
        grad_b: &mut [f64],
        grad_in: Option<&mut [f64]>,
    ) {
        for (o, &g) in grad_out.iter().enumerate() {
            grad_b[o] += g;
            if g != 0.0 {
                for (gw, v) in grad_w[o * self.inputs..][..self.inputs].iter_mut().zip(x) {
                    *gw += g * v;
                }
            }
        }
        if let Some(grad_in) = grad_in {
            grad_in.fill(0.0);
            for (row, &g) in self.weights.chunks_exact(self.inputs).zip(grad_out) {
                if g != 0.0 {
                    for (gi, w) in grad_in.iter_mut().zip(row) {
                        *gi += g * w;
                    }
                }
            }
        }
    }
}
