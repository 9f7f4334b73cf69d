use crate::error::{Error, Result};

use super::layer::{DenseLayer, LayerGrads};

/// All learnable values of a model laid out flat: for each layer in the
/// model's canonical order, its weights (row-major) followed by its biases.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    values: Vec<f64>,
}

impl ParameterVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
        }
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn flatten<'a>(layers: impl IntoIterator<Item = &'a DenseLayer>) -> Self {
        let mut values = Vec::new();
        for layer in layers {
            values.extend_from_slice(layer.weights());
            values.extend_from_slice(layer.bias());
        }
        Self { values }
    }

    pub fn from_grads(grads: &[LayerGrads]) -> Self {
        let mut values = Vec::new();
        for g in grads {
            values.extend_from_slice(&g.weights);
            values.extend_from_slice(&g.bias);
        }
        Self { values }
    }

    /// Writes the values back into `layers`; the total length must match exactly.
    pub fn unflatten_into<'a>(&self, layers: impl IntoIterator<Item = &'a mut DenseLayer>) -> Result<()> {
        let mut layers: Vec<&mut DenseLayer> = layers.into_iter().collect();
        let expected: usize = layers.iter().map(|l| l.parameter_count()).sum();
        if expected != self.values.len() {
            return Err(Error::shape(format!(
                "parameter vector has {} values, model needs {expected}",
                self.values.len()
            )));
        }
        let mut offset = 0;
        for layer in layers.iter_mut() {
            let nw = layer.weights().len();
            layer.weights_mut().copy_from_slice(&self.values[offset..offset + nw]);
            offset += nw;
            let nb = layer.bias().len();
            layer.bias_mut().copy_from_slice(&self.values[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }
}

/// Anything made of an ordered list of dense layers.
pub trait Network {
    fn layers(&self) -> Vec<&DenseLayer>;

    fn layers_mut(&mut self) -> Vec<&mut DenseLayer>;

    fn parameters(&self) -> ParameterVector {
        ParameterVector::flatten(self.layers())
    }

    fn set_parameters(&mut self, params: &ParameterVector) -> Result<()> {
        params.unflatten_into(self.layers_mut())
    }

    fn parameter_count(&self) -> usize {
        self.layers().iter().map(|l| l.parameter_count()).sum()
    }

    fn zero_grads(&self) -> Vec<LayerGrads> {
        self.layers().into_iter().map(LayerGrads::zeros_like).collect()
    }
}

/// `λ‖W‖₁`.
pub fn l1_penalty(weights: &[f64], lambda: f64) -> f64 {
    lambda * weights.iter().map(|w| w.abs()).sum::<f64>()
}

/// Adds the subgradient `λ·sign(W)` (zero at zero) to `grad`.
pub fn add_l1_subgradient(weights: &[f64], lambda: f64, grad: &mut [f64]) {
    if lambda == 0.0 {
        return;
    }
    for (g, w) in grad.iter_mut().zip(weights) {
        if *w > 0.0 {
            *g += lambda;
        } else if *w < 0.0 {
            *g -= lambda;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;
    use crate::seed;
    use proptest::prelude::*;

    #[test]
    fn l1_subgradient_is_lambda_sign() {
        let w = [0.5, -2.0, 3.0, -0.1];
        let mut g = [0.0; 4];
        add_l1_subgradient(&w, 0.01, &mut g);
        assert_eq!(g, [0.01, -0.01, 0.01, -0.01]);
        assert!((l1_penalty(&w, 0.01) - 0.056).abs() < 1e-15);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let mut layer = DenseLayer::zeros(2, 2, Activation::Tanh);
        let p = ParameterVector::zeros(5);
        assert!(p.unflatten_into([&mut layer]).is_err());
    }

    proptest! {
        #[test]
        fn flatten_unflatten_is_identity(seed in 0u64..1000, a in 1usize..6, b in 1usize..6, c in 1usize..6) {
            let mut rng = seed::rng(seed);
            let mut l1 = DenseLayer::glorot(a, b, Activation::Tanh, &mut rng);
            let mut l2 = DenseLayer::glorot(b, c, Activation::Softmax, &mut rng);
            l1.bias_mut()[0] = 0.25;
            let p = ParameterVector::flatten([&l1, &l2]);
            prop_assert_eq!(p.len(), a * b + b + b * c + c);
            let (o1, o2) = (l1.clone(), l2.clone());
            let mut zero1 = DenseLayer::zeros(a, b, Activation::Tanh);
            let mut zero2 = DenseLayer::zeros(b, c, Activation::Softmax);
            p.unflatten_into([&mut zero1, &mut zero2]).unwrap();
            prop_assert_eq!(&zero1, &o1);
            prop_assert_eq!(&zero2, &o2);
            p.unflatten_into([&mut l1, &mut l2]).unwrap();
            prop_assert_eq!(ParameterVector::flatten([&l1, &l2]), p);
        }
    }
}
