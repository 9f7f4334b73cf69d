use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::params::ParameterVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment accumulators for Adam, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    config: AdamConfig,
    step: u64,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl OptimizerState {
    pub fn new(config: AdamConfig, len: usize) -> Self {
        Self {
            config,
            step: 0,
            first: vec![0.0; len],
            second: vec![0.0; len],
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut ParameterVector, grads: &ParameterVector) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(Error::shape(format!(
                "optimizer tracks {} parameters, got {} params and {} grads",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        self.step += 1;
        let t = self.step as i32;
        let correction1 = 1.0 - beta1.powi(t);
        let correction2 = 1.0 - beta2.powi(t);
        for (((p, &g), m), v) in params
            .as_mut_slice()
            .iter_mut()
            .zip(grads.as_slice())
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut state = OptimizerState::new(AdamConfig::default(), 3);
        let mut p = ParameterVector::from_vec(vec![1.0, -2.0, 0.5]);
        let before = p.clone();
        for _ in 0..10 {
            state.step(&mut p, &ParameterVector::zeros(3)).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_descends() {
        let mut state = OptimizerState::new(AdamConfig::default(), 3);
        let mut p = ParameterVector::from_vec(vec![0.0, 0.0, 0.0]);
        let g = ParameterVector::from_vec(vec![2.0, -0.5, 1e-3]);
        state.step(&mut p, &g).unwrap();
        for (pi, gi) in p.as_slice().iter().zip(g.as_slice()) {
            assert!(pi * gi < 0.0);
            // the first bias-corrected step has magnitude ≈ lr
            assert!((pi.abs() - 1e-3).abs() < 1e-5);
        }
    }

    #[test]
    fn deterministic_and_shape_checked() {
        let run = || {
            let mut state = OptimizerState::new(AdamConfig::default(), 2);
            let mut p = ParameterVector::from_vec(vec![0.3, 0.7]);
            for i in 0..50 {
                let g = ParameterVector::from_vec(vec![(i as f64).sin(), (i as f64 * 0.3).cos()]);
                state.step(&mut p, &g).unwrap();
            }
            p
        };
        let (a, b) = (run(), run());
        assert_eq!(
            a.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        let mut state = OptimizerState::new(AdamConfig::default(), 2);
        let mut p = ParameterVector::zeros(3);
        assert!(state.step(&mut p, &ParameterVector::zeros(3)).is_err());
    }
}
