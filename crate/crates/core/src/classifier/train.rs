use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, OptimizerState};
use crate::seed;

use super::parts::Dropout;
use super::{Classifier, LOG_CLAMP};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean penalized mini-batch loss seen during the epoch (dropout active).
    pub train_loss: f64,
    pub validation_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub initial_validation_loss: f64,
    pub epochs: Vec<EpochRecord>,
    /// 0 when no epoch improved on the initial parameters.
    pub best_epoch: usize,
    pub best_validation_loss: f64,
    pub stopped_early: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<M> {
    pub model: M,
    pub log: TrainingLog,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub cross_entropy: f64,
    pub predicted: Vec<usize>,
}

/// Evaluation-mode cross-entropy and argmax predictions over a dataset.
pub fn evaluate<M: Classifier>(model: &M, data: &Dataset) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::validation("cannot evaluate on an empty split"));
    }
    let mut ce = 0.0;
    let mut predicted = Vec::with_capacity(data.len());
    for i in 0..data.len() {
        let p = model.forward(data.row(i))?;
        ce -= p.class_scores[data.labels()[i]].max(LOG_CLAMP).ln();
        predicted.push(p.predicted_class());
    }
    Ok(Evaluation {
        cross_entropy: ce / data.len() as f64,
        predicted,
    })
}

/// Mini-batch Adam on the penalized loss, keeping the parameter snapshot with
/// the lowest validation cross-entropy. Stops after `patience` epochs without
/// improvement.
pub fn train<M: Classifier>(mut model: M, train: &Dataset, val: &Dataset, cfg: &super::TrainConfig) -> Result<TrainOutcome<M>> {
    cfg.validate_schedule()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::validation("training and validation splits must be nonempty"));
    }
    if train.dim() != model.input_dim() || val.dim() != model.input_dim() {
        return Err(Error::shape(format!(
            "model expects {} features, data has {}",
            model.input_dim(),
            train.dim()
        )));
    }
    let adam = AdamConfig {
        learning_rate: cfg.learning_rate,
        ..AdamConfig::default()
    };
    let mut params = model.parameters();
    let mut optimizer = OptimizerState::new(adam, params.len());
    let mut rng = seed::rng(seed::derive(cfg.seed, 0x7261_696e));

    let initial = evaluate(&model, val)?.cross_entropy;
    if !initial.is_finite() {
        return Err(Error::Divergence {
            epoch: 0,
            detail: "initial validation loss is not finite".into(),
        });
    }
    let mut best_model = model.clone();
    let mut log = TrainingLog {
        initial_validation_loss: initial,
        epochs: Vec::new(),
        best_epoch: 0,
        best_validation_loss: initial,
        stopped_early: false,
    };
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let xs: Vec<&[f64]> = batch.iter().map(|&i| train.row(i)).collect();
            let ys: Vec<usize> = batch.iter().map(|&i| train.labels()[i]).collect();
            let mut dropout = Dropout {
                rate: cfg.dropout,
                rng: &mut rng,
            };
            let (loss, grad) = model.batch_loss_grad(&xs, &ys, cfg.sparsity, Some(&mut dropout))?;
            if !loss.is_finite() || !grad.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    detail: format!("non-finite training loss {loss}"),
                });
            }
            optimizer.step(&mut params, &grad)?;
            model.set_parameters(&params)?;
            loss_sum += loss * batch.len() as f64;
            seen += batch.len();
        }
        let validation_loss = evaluate(&model, val)?.cross_entropy;
        if !validation_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                detail: "non-finite validation loss".into(),
            });
        }
        log.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / seen as f64,
            validation_loss,
        });
        if validation_loss < log.best_validation_loss {
            log.best_validation_loss = validation_loss;
            log.best_epoch = epoch;
            best_model = model.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                log.stopped_early = true;
                break;
            }
        }
    }
    log::debug!(
        "trained {} for {} epochs, best validation loss {:.5} at epoch {}",
        model.variant(),
        log.epochs.len(),
        log.best_validation_loss,
        log.best_epoch
    );
    Ok(TrainOutcome {
        model: best_model,
        log,
    })
}
