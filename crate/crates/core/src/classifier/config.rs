use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Architecture, Variant};

pub const LAYER_CHOICES: [usize; 2] = [1, 2];
pub const UNIT_RANGE: (usize, usize) = (5, 100);
/// Unit counts the default grid visits.
pub const UNIT_GRID: [usize; 5] = [5, 10, 20, 50, 100];
pub const MIXTURE_CHOICES: [usize; 6] = [1, 2, 3, 4, 5, 10];
pub const SPARSITY_CHOICES: [f64; 3] = [0.0, 0.001, 0.0001];
pub const DROPOUT_RATE: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub layers: usize,
    pub units: usize,
    pub mixtures: usize,
    pub sparsity: f64,
    pub dropout: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            layers: 1,
            units: 20,
            mixtures: 3,
            sparsity: 0.0,
            dropout: DROPOUT_RATE,
            epochs: 500,
            batch_size: 32,
            patience: 50,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn architecture(&self) -> Architecture {
        Architecture {
            layers: self.layers,
            units: self.units,
            mixtures: self.mixtures,
        }
    }

    /// Checks the optimization settings common to every model.
    pub fn validate_schedule(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::validation("epochs and batch_size must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::validation(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::validation("learning rate must be positive"));
        }
        if !(self.sparsity >= 0.0) {
            return Err(Error::validation("sparsity must be nonnegative"));
        }
        Ok(())
    }

    /// Checks that the hyperparameters come from the classifier search space.
    pub fn validate(&self) -> Result<()> {
        self.validate_schedule()?;
        if !LAYER_CHOICES.contains(&self.layers) {
            return Err(Error::validation(format!("layers {} not in {LAYER_CHOICES:?}", self.layers)));
        }
        if self.units < UNIT_RANGE.0 || self.units > UNIT_RANGE.1 {
            return Err(Error::validation(format!("units {} outside {UNIT_RANGE:?}", self.units)));
        }
        if !MIXTURE_CHOICES.contains(&self.mixtures) {
            return Err(Error::validation(format!(
                "mixtures {} not in {MIXTURE_CHOICES:?}",
                self.mixtures
            )));
        }
        if !SPARSITY_CHOICES.contains(&self.sparsity) {
            return Err(Error::validation(format!(
                "sparsity {} not in {SPARSITY_CHOICES:?}",
                self.sparsity
            )));
        }
        Ok(())
    }
}

/// Hyperparameter values swept by [`grid_search`](super::grid_search).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub layers: Vec<usize>,
    pub units: Vec<usize>,
    pub mixtures: Vec<usize>,
    pub sparsity: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            layers: LAYER_CHOICES.to_vec(),
            units: UNIT_GRID.to_vec(),
            mixtures: MIXTURE_CHOICES.to_vec(),
            sparsity: SPARSITY_CHOICES.to_vec(),
        }
    }
}

impl GridSpec {
    pub fn single(config: &TrainConfig) -> Self {
        Self {
            layers: vec![config.layers],
            units: vec![config.units],
            mixtures: vec![config.mixtures],
            sparsity: vec![config.sparsity],
        }
    }

    /// Every grid point as a full config; C2 has no output weights, so its
    /// sparsity axis collapses to zero.
    pub fn points(&self, base: &TrainConfig, variant: Variant) -> Result<Vec<TrainConfig>> {
        let sparsity = if variant == Variant::C2 {
            vec![0.0]
        } else {
            self.sparsity.clone()
        };
        if self.layers.is_empty() || self.units.is_empty() || self.mixtures.is_empty() || sparsity.is_empty() {
            return Err(Error::validation("grid has an empty axis"));
        }
        let mut out = Vec::new();
        for &layers in &self.layers {
            for &units in &self.units {
                for &mixtures in &self.mixtures {
                    for &s in &sparsity {
                        let cfg = TrainConfig {
                            layers,
                            units,
                            mixtures,
                            sparsity: s,
                            ..*base
                        };
                        cfg.validate()?;
                        out.push(cfg);
                    }
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_size() {
        let base = TrainConfig::default();
        assert_eq!(GridSpec::default().points(&base, Variant::C1).unwrap().len(), 2 * 5 * 6 * 3);
        assert_eq!(GridSpec::default().points(&base, Variant::C2).unwrap().len(), 2 * 5 * 6);
    }

    #[test]
    fn out_of_set_values_are_rejected() {
        let mut cfg = TrainConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.mixtures = 7;
        assert!(cfg.validate().is_err());
        cfg.mixtures = 3;
        cfg.units = 101;
        assert!(cfg.validate().is_err());
        cfg.units = 20;
        cfg.sparsity = 0.5;
        assert!(cfg.validate().is_err());
        let grid = GridSpec {
            layers: vec![],
            ..GridSpec::default()
        };
        assert!(grid.points(&TrainConfig::default(), Variant::C1).is_err());
    }
}
