use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Linear,
    Softmax,
    Softplus,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Linear => "linear",
            Activation::Softmax => "softmax",
            Activation::Softplus => "softplus",
        }
    }

    pub fn apply(self, pre: &[f64]) -> Vec<f64> {
        match self {
            Activation::Tanh => pre.iter().map(|v| v.tanh()).collect(),
            Activation::Linear => pre.to_vec(),
            Activation::Softmax => softmax(pre),
            Activation::Softplus => pre.iter().map(|&v| softplus(v)).collect(),
        }
    }

    /// Maps a gradient on the activation output back to the pre-activation.
    pub fn backward(self, pre: &[f64], output: &[f64], grad_out: &[f64]) -> Vec<f64> {
        match self {
            Activation::Tanh => output
                .iter()
                .zip(grad_out)
                .map(|(y, g)| g * (1.0 - y * y))
                .collect(),
            Activation::Linear => grad_out.to_vec(),
            Activation::Softmax => {
                let dot: f64 = output.iter().zip(grad_out).map(|(y, g)| y * g).sum();
                output
                    .iter()
                    .zip(grad_out)
                    .map(|(y, g)| y * (g - dot))
                    .collect()
            }
            Activation::Softplus => pre
                .iter()
                .zip(grad_out)
                .map(|(&x, g)| g * sigmoid(x))
                .collect(),
        }
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Affine map followed by an elementwise (or softmax) activation.
///
/// Weights are row-major with shape `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

/// Values recorded by a forward pass, consumed by [`DenseLayer::backward`].
#[derive(Debug, Clone)]
pub struct LayerTrace {
    pub input: Vec<f64>,
    pub pre: Vec<f64>,
    pub output: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerGrads {
    pub fn zeros_like(layer: &DenseLayer) -> Self {
        Self {
            weights: vec![0.0; layer.weights.len()],
            bias: vec![0.0; layer.bias.len()],
        }
    }
}

impl DenseLayer {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.gen_range(-limit..limit))
            .collect();
        Self {
            in_dim,
            out_dim,
            weights,
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    pub fn from_parts(
        in_dim: usize,
        out_dim: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if weights.len() != in_dim * out_dim || bias.len() != out_dim {
            return Err(Error::shape(format!(
                "layer {out_dim}x{in_dim} given {} weights and {} biases",
                weights.len(),
                bias.len()
            )));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::validation("layer parameters must be finite"));
        }
        Ok(Self {
            in_dim,
            out_dim,
            weights,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// `‖W‖₁`, biases excluded.
    pub fn l1_norm(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.in_dim {
            return Err(Error::shape(format!(
                "layer expects {} inputs, got {}",
                self.in_dim,
                input.len()
            )));
        }
        Ok(())
    }

    fn affine(&self, input: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.in_dim.max(1))
            .take(self.out_dim)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>())
            .collect()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        Ok(self.activation.apply(&self.affine(input)))
    }

    pub fn forward_trace(&self, input: &[f64]) -> Result<LayerTrace> {
        self.check_input(input)?;
        let pre = self.affine(input);
        let output = self.activation.apply(&pre);
        Ok(LayerTrace {
            input: input.to_vec(),
            pre,
            output,
        })
    }

    /// Accumulates parameter gradients and returns the gradient on the input.
    pub fn backward(&self, trace: &LayerTrace, grad_out: &[f64], grads: &mut LayerGrads) -> Vec<f64> {
        let grad_pre = self.activation.backward(&trace.pre, &trace.output, grad_out);
        self.backward_pre(trace, &grad_pre, grads)
    }

    /// Like [`backward`](Self::backward) but starting from a gradient on the pre-activation.
    pub fn backward_pre(&self, trace: &LayerTrace, grad_pre: &[f64], grads: &mut LayerGrads) -> Vec<f64> {
        debug_assert_eq!(grad_pre.len(), self.out_dim);
        let mut grad_in = vec![0.0; self.in_dim];
        for (o, &g) in grad_pre.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grads.bias[o] += g;
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let grad_row = &mut grads.weights[o * self.in_dim..(o + 1) * self.in_dim];
            for i in 0..self.in_dim {
                grad_row[i] += g * trace.input[i];
                grad_in[i] += g * row[i];
            }
        }
        grad_in
    }
}
