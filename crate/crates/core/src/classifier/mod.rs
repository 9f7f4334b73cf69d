//! The CDF-headed classifiers (variants C1 and C2), their penalized
//! cross-entropy, mini-batch training and the fold-wise grid search.

mod c1;
mod c2;
mod config;
mod grid;
pub(crate) mod parts;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::GaussianMixture;
use crate::nn::{l1_penalty, DenseLayer, ModelDocument, Network, ParameterVector};

pub use c1::{C1Trace, MdnC1Model};
pub use c2::{normalize_scores, C2Trace, MdnC2Model, NORMALIZER_FLOOR};
pub use config::{GridSpec, TrainConfig, DROPOUT_RATE, MIXTURE_CHOICES, SPARSITY_CHOICES};
pub use grid::{grid_search, FittedFold, FoldReport, GridPointResult, GridReport};
pub use parts::Dropout;
pub use train::{evaluate, train, EpochRecord, TrainOutcome, TrainingLog};

/// Lower clamp applied to probabilities inside logarithms.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    C1,
    C2,
    P2b,
}

impl Variant {
    pub fn tag(self) -> &'static str {
        match self {
            Variant::C1 => "c1",
            Variant::C2 => "c2",
            Variant::P2b => "p2b",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "c1" => Ok(Variant::C1),
            "c2" => Ok(Variant::C2),
            "p2b" => Ok(Variant::P2b),
            other => Err(Error::validation(format!("unknown variant `{other}` (expected c1 or c2)"))),
        }
    }
}

/// Network shape shared by every variant: encoder depth and width, mixture size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub layers: usize,
    pub units: usize,
    pub mixtures: usize,
}

impl Architecture {
    pub(crate) fn check(&self, input_dim: usize, classes: usize) -> Result<()> {
        if self.layers == 0 || self.units == 0 || self.mixtures == 0 {
            return Err(Error::validation("layers, units and mixtures must all be positive"));
        }
        if input_dim == 0 || classes < 2 {
            return Err(Error::validation(format!(
                "need at least one feature and two classes (got d={input_dim}, C={classes})"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class_scores: Vec<f64>,
    pub mixture: GaussianMixture,
}

impl Prediction {
    pub fn predicted_class(&self) -> usize {
        argmax(&self.class_scores)
    }
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// A trainable model mapping a feature vector to class scores through a
/// per-sample Gaussian mixture.
pub trait Classifier: Network + Clone + Send + Sync {
    fn variant(&self) -> Variant;

    fn input_dim(&self) -> usize;

    fn class_count(&self) -> usize;

    /// Evaluation-mode forward pass.
    fn forward(&self, x: &[f64]) -> Result<Prediction>;

    /// Mean cross-entropy over the batch plus the L1 term, and its gradient.
    fn batch_loss_grad(
        &self,
        xs: &[&[f64]],
        labels: &[usize],
        sparsity: f64,
        dropout: Option<&mut Dropout>,
    ) -> Result<(f64, ParameterVector)>;

    /// The layer whose weights carry the L1 penalty, if any.
    fn sparse_layer(&self) -> Option<&DenseLayer> {
        None
    }

    fn to_document(&self) -> ModelDocument;

    /// Evaluation-mode penalized loss; the reference the gradients are checked against.
    fn batch_loss(&self, xs: &[&[f64]], labels: &[usize], sparsity: f64) -> Result<f64> {
        check_batch(xs, labels, self.class_count())?;
        let mut ce = 0.0;
        for (x, &y) in xs.iter().zip(labels) {
            ce -= self.forward(x)?.class_scores[y].max(LOG_CLAMP).ln();
        }
        let penalty = self
            .sparse_layer()
            .map(|l| l1_penalty(l.weights(), sparsity))
            .unwrap_or(0.0);
        Ok(ce / xs.len() as f64 + penalty)
    }
}

pub(crate) fn check_batch(xs: &[&[f64]], labels: &[usize], classes: usize) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::validation("empty batch"));
    }
    if xs.len() != labels.len() {
        return Err(Error::shape(format!("{} samples but {} labels", xs.len(), labels.len())));
    }
    if let Some(bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::validation(format!("label {bad} outside [0, {classes})")));
    }
    Ok(())
}

/// Mean cross-entropy of the scores against one-hot labels, plus `λ‖W_o‖₁`
/// for models that have an output weight matrix.
pub fn loss<M: Classifier>(
    predictions: &[Prediction],
    one_hot: &[Vec<f64>],
    model: &M,
    sparsity: f64,
) -> Result<f64> {
    if predictions.len() != one_hot.len() || predictions.is_empty() {
        return Err(Error::validation("predictions and labels must be nonempty and aligned"));
    }
    if sparsity < 0.0 {
        return Err(Error::validation("sparsity weight must be nonnegative"));
    }
    let mut total = 0.0;
    for (p, y) in predictions.iter().zip(one_hot) {
        let ones = y.iter().filter(|&&v| v == 1.0).count();
        if y.len() != p.class_scores.len() || ones != 1 || y.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::validation(format!("label {y:?} is not one-hot")));
        }
        total -= y
            .iter()
            .zip(&p.class_scores)
            .map(|(yc, s)| yc * s.max(LOG_CLAMP).ln())
            .sum::<f64>();
    }
    let penalty = model
        .sparse_layer()
        .map(|l| l1_penalty(l.weights(), sparsity))
        .unwrap_or(0.0);
    Ok(total / predictions.len() as f64 + penalty)
}

/// Mean `-ln max(score_y, 1e-12)`.
pub fn cross_entropy(scores: &[Vec<f64>], labels: &[usize]) -> f64 {
    let total: f64 = scores
        .iter()
        .zip(labels)
        .map(|(s, &y)| -s[y].max(LOG_CLAMP).ln())
        .sum();
    total / scores.len() as f64
}

/// A deserialized classifier of either variant.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyClassifier {
    C1(MdnC1Model),
    C2(MdnC2Model),
}

impl AnyClassifier {
    pub fn new(variant: Variant, input_dim: usize, classes: usize, arch: &Architecture, seed: u64) -> Result<Self> {
        match variant {
            Variant::C1 => Ok(Self::C1(MdnC1Model::new(input_dim, classes, arch, seed)?)),
            Variant::C2 => Ok(Self::C2(MdnC2Model::new(input_dim, classes, arch, seed)?)),
            Variant::P2b => Err(Error::validation("p2b models are built by the bundling pipeline")),
        }
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        match doc.variant.parse::<Variant>()? {
            Variant::C1 => Ok(Self::C1(MdnC1Model::from_document(doc)?)),
            Variant::C2 => Ok(Self::C2(MdnC2Model::from_document(doc)?)),
            Variant::P2b => Err(Error::validation("p2b documents are not dataset classifiers")),
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Prediction> {
        match self {
            Self::C1(m) => m.forward(x),
            Self::C2(m) => m.forward(x),
        }
    }

    pub fn to_document(&self) -> ModelDocument {
        match self {
            Self::C1(m) => m.to_document(),
            Self::C2(m) => m.to_document(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Self::C1(m) => m.input_dim(),
            Self::C2(m) => m.input_dim(),
        }
    }
}
