use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::classifier::parts::{CdfBlock, Dropout, Encoder, MdnHead, MixtureParams, ParamGrads};
use crate::classifier::{check_batch, train, Architecture, Classifier, Prediction, TrainConfig, Variant, LOG_CLAMP};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::mixture::GaussianMixture;
use crate::nn::{take_layer, Activation, DenseLayer, ModelDocument, Network, ParameterVector};
use crate::seed;

use super::SalesRecord;

/// The constant the encoder sees in place of a feature vector.
pub const DUMMY_INPUT: f64 = 1.0;
pub const P2B_MIXTURE_CHOICES: [usize; 3] = [1, 2, 3];
pub const NO_SALE: usize = 0;
pub const SALE: usize = 1;

/// Binary sale classifier whose encoder reads a constant, so it learns one
/// willingness-to-pay mixture shared by every price. Class 0 (no sale) scores
/// `F(p)`, class 1 (sale) scores `1 − F(p)`.
///
/// The network works in price units divided by `price_scale`; the mixture it
/// reports is mapped back to currency.
#[derive(Debug, Clone, PartialEq)]
pub struct MdnP2bModel {
    encoder: Encoder,
    head: MdnHead,
    price_scale: f64,
}

impl MdnP2bModel {
    pub fn new(arch: &Architecture, price_scale: f64, init_seed: u64) -> Result<Self> {
        if !P2B_MIXTURE_CHOICES.contains(&arch.mixtures) {
            return Err(Error::validation(format!(
                "p2b mixtures {} not in {P2B_MIXTURE_CHOICES:?}",
                arch.mixtures
            )));
        }
        arch.check(1, 2)?;
        if !(price_scale > 0.0 && price_scale.is_finite()) {
            return Err(Error::validation("price scale must be positive"));
        }
        let mut rng = seed::rng(init_seed);
        let encoder = Encoder::new(1, arch.layers, arch.units, &mut rng);
        let head = MdnHead::new(arch.units, arch.mixtures, &mut rng);
        Ok(Self {
            encoder,
            head,
            price_scale,
        })
    }

    pub fn mixtures(&self) -> usize {
        self.head.mixtures()
    }

    pub fn price_scale(&self) -> f64 {
        self.price_scale
    }

    fn scaled_params(&self) -> Result<MixtureParams> {
        let z = self.encoder.forward(&[DUMMY_INPUT])?;
        self.head.params(&z)
    }

    /// The learned willingness-to-pay mixture in currency units.
    pub fn mixture(&self) -> Result<GaussianMixture> {
        self.scaled_params()?.scaled(self.price_scale).mixture()
    }

    /// `1 − F(p)`: the probability a customer offered price `p` buys.
    pub fn purchase_probability(&self, p: f64) -> Result<f64> {
        Ok(1.0 - self.mixture()?.cdf(p))
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        if doc.variant != Variant::P2b.tag() {
            return Err(Error::validation(format!("document variant `{}` is not p2b", doc.variant)));
        }
        let depth = doc.metadata_usize("layers")?;
        let price_scale = doc.metadata_f64("price_scale")?;
        let mut layers = doc.build_layers()?.into_iter();
        let encoder = Encoder {
            layers: (0..depth)
                .map(|i| take_layer(&mut layers, &format!("encoder.{i}"), Activation::Tanh))
                .collect::<Result<_>>()?,
        };
        let head = MdnHead {
            rho: take_layer(&mut layers, "head.rho", Activation::Softmax)?,
            mu: take_layer(&mut layers, "head.mu", Activation::Linear)?,
            sigma: take_layer(&mut layers, "head.sigma", Activation::Softplus)?,
        };
        if encoder.layers.first().map(|l| l.in_dim()) != Some(1) {
            return Err(Error::shape("p2b encoder must read a single constant input"));
        }
        Ok(Self {
            encoder,
            head,
            price_scale,
        })
    }
}

/// `1 − mixture_cdf(model's mixture, p)`.
pub fn estimated_purchase_prob(model: &MdnP2bModel, p: f64) -> Result<f64> {
    model.purchase_probability(p)
}

impl Network for MdnP2bModel {
    fn layers(&self) -> Vec<&DenseLayer> {
        let mut out: Vec<&DenseLayer> = self.encoder.layers.iter().collect();
        out.extend([&self.head.rho, &self.head.mu, &self.head.sigma]);
        out
    }

    fn layers_mut(&mut self) -> Vec<&mut DenseLayer> {
        let mut out: Vec<&mut DenseLayer> = self.encoder.layers.iter_mut().collect();
        out.extend([&mut self.head.rho, &mut self.head.mu, &mut self.head.sigma]);
        out
    }
}

impl Classifier for MdnP2bModel {
    fn variant(&self) -> Variant {
        Variant::P2b
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn class_count(&self) -> usize {
        2
    }

    /// `x` is the one-element offer price.
    fn forward(&self, x: &[f64]) -> Result<Prediction> {
        if x.len() != 1 {
            return Err(Error::shape(format!("p2b takes one price, got {} values", x.len())));
        }
        let mixture = self.mixture()?;
        let f = mixture.cdf(x[0]);
        Ok(Prediction {
            class_scores: vec![f, 1.0 - f],
            mixture,
        })
    }

    /// The mixture is the same for every record, so the head runs once per
    /// batch and the per-record CDF gradients are summed before backprop.
    fn batch_loss_grad(
        &self,
        xs: &[&[f64]],
        labels: &[usize],
        _sparsity: f64,
        dropout: Option<&mut Dropout>,
    ) -> Result<(f64, ParameterVector)> {
        check_batch(xs, labels, 2)?;
        if xs.iter().any(|x| x.len() != 1) {
            return Err(Error::shape("p2b takes one price per record"));
        }
        let n = xs.len() as f64;
        let enc = self.encoder.trace(&[DUMMY_INPUT], dropout)?;
        let head = self.head.trace(&enc.output)?;
        let k = self.mixtures();
        let points: Vec<f64> = xs.iter().map(|x| x[0] / self.price_scale).collect();
        let block = CdfBlock::new(&points, &head.params);
        let cdf = block.point_sums();
        let mut ce = 0.0;
        let mut grad_weighted = vec![0.0; points.len() * k];
        for (i, (&f, &y)) in cdf.iter().zip(labels).enumerate() {
            let (score, d_f) = if y == NO_SALE {
                (f, -1.0 / (f * n))
            } else {
                (1.0 - f, 1.0 / ((1.0 - f) * n))
            };
            ce -= score.max(LOG_CLAMP).ln();
            if score > LOG_CLAMP {
                grad_weighted[i * k..(i + 1) * k].fill(d_f);
            }
        }
        let mut grads = self.zero_grads();
        let depth = self.encoder.layers.len();
        let (enc_grads, head_grads) = grads.split_at_mut(depth);
        let mut d = ParamGrads::zeros(k);
        block.backward(&head.params, &grad_weighted, &mut d);
        let dz = self.head.backward(&head, &d, head_grads);
        self.encoder.backward(&enc, &dz, enc_grads);
        Ok((ce / n, ParameterVector::from_grads(&grads)))
    }

    fn to_document(&self) -> ModelDocument {
        let mut named: Vec<(String, &DenseLayer)> = self
            .encoder
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| (format!("encoder.{i}"), l))
            .collect();
        named.push(("head.rho".into(), &self.head.rho));
        named.push(("head.mu".into(), &self.head.mu));
        named.push(("head.sigma".into(), &self.head.sigma));
        let mut meta = BTreeMap::new();
        meta.insert("layers".into(), self.encoder.layers.len().into());
        meta.insert("units".into(), self.encoder.out_dim().into());
        meta.insert("mixtures".into(), self.mixtures().into());
        meta.insert("price_scale".into(), self.price_scale.into());
        ModelDocument::new(Variant::P2b.tag(), named, meta)
    }
}

/// Training settings for one product model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct P2bConfig {
    pub layers: usize,
    pub units: usize,
    pub mixtures: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub price_scale: f64,
    /// Share of the records held out for the reported sale-classification accuracy.
    pub test_fraction: f64,
    /// Share of the remaining records used for early stopping.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for P2bConfig {
    fn default() -> Self {
        Self {
            layers: 1,
            units: 10,
            mixtures: 3,
            epochs: 100,
            batch_size: 256,
            patience: 20,
            learning_rate: 1e-3,
            price_scale: 100.0,
            test_fraction: 0.2,
            validation_fraction: 0.25,
            seed: 0,
        }
    }
}

impl P2bConfig {
    pub fn architecture(&self) -> Architecture {
        Architecture {
            layers: self.layers,
            units: self.units,
            mixtures: self.mixtures,
        }
    }

    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            layers: self.layers,
            units: self.units,
            mixtures: self.mixtures,
            sparsity: 0.0,
            dropout: 0.0,
            epochs: self.epochs,
            batch_size: self.batch_size,
            patience: self.patience,
            learning_rate: self.learning_rate,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.test_fraction) || !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::validation("split fractions must lie in [0, 1)"));
        }
        self.train_config().validate_schedule()
    }
}

#[derive(Debug, Clone)]
pub struct P2bFit {
    pub model: MdnP2bModel,
    /// Sale-classification accuracy on the held-out records (`None` without a test split).
    pub test_accuracy: Option<f64>,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

fn to_dataset(records: &[SalesRecord]) -> Result<Dataset> {
    let rows: Vec<Vec<f64>> = records.iter().map(|r| vec![r.price]).collect();
    let labels: Vec<usize> = records.iter().map(|r| usize::from(r.sold)).collect();
    Dataset::from_rows(&rows, &labels, 2)
}

/// Trains on the records in order: the last `test_fraction` is held out for
/// accuracy, and the last `validation_fraction` of the rest drives early
/// stopping. Records come from an i.i.d. generator, so no shuffle is needed.
pub fn train_p2b(records: &[SalesRecord], cfg: &P2bConfig) -> Result<P2bFit> {
    if records.is_empty() {
        return Err(Error::validation("no sales records to train on"));
    }
    cfg.validate()?;
    let sold = records.iter().filter(|r| r.sold).count();
    if sold == 0 || sold == records.len() {
        log::warn!("degenerate sales data: every record has sold = {}", sold > 0);
    }
    let n = records.len();
    let n_test = (n as f64 * cfg.test_fraction).round() as usize;
    let n_fit = n - n_test;
    let n_val = ((n_fit as f64 * cfg.validation_fraction).round() as usize).clamp(1, n_fit.max(1));
    if n_fit < 2 || n_val >= n_fit {
        return Err(Error::validation(format!("{n} records are too few to split")));
    }
    let train_set = to_dataset(&records[..n_fit - n_val])?;
    let val_set = to_dataset(&records[n_fit - n_val..n_fit])?;
    let model = MdnP2bModel::new(&cfg.architecture(), cfg.price_scale, seed::derive(cfg.seed, 0x6932_6200))?;
    let outcome = train(model, &train_set, &val_set, &cfg.train_config())?;
    let test_accuracy = if n_test > 0 {
        let mixture = outcome.model.mixture()?;
        let correct = records[n_fit..]
            .iter()
            .filter(|r| {
                let f = mixture.cdf(r.price);
                (1.0 - f > f) == r.sold
            })
            .count();
        Some(correct as f64 / n_test as f64)
    } else {
        None
    };
    Ok(P2bFit {
        model: outcome.model,
        test_accuracy,
        best_epoch: outcome.log.best_epoch,
        epochs_run: outcome.log.epochs.len(),
    })
}
