use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::nn::{take_layer, Activation, DenseLayer, LayerTrace, ModelDocument, Network, ParameterVector};
use crate::seed;

use super::parts::{CdfBlock, Dropout, Encoder, EncoderTrace, HeadTrace, MdnHead, ParamGrads};
use super::{check_batch, Architecture, Classifier, Prediction, Variant, LOG_CLAMP};

/// Floor on the sum of the per-class CDF values before normalization.
pub const NORMALIZER_FLOOR: f64 = 1e-12;

/// A tanh reducer maps the `d` inputs to `C` latent features; the mixture
/// (from the encoder path) is evaluated at each latent feature and the `C`
/// mixture CDF values are normalized into class scores.
#[derive(Debug, Clone, PartialEq)]
pub struct MdnC2Model {
    input_dim: usize,
    classes: usize,
    reducer: DenseLayer,
    encoder: Encoder,
    head: MdnHead,
}

pub struct C2Trace {
    reducer: LayerTrace,
    encoder: EncoderTrace,
    head: HeadTrace,
    block: CdfBlock,
    cdf: Vec<f64>,
    total: f64,
    scores: Vec<f64>,
}

impl C2Trace {
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Per-class mixture CDF values before normalization.
    pub fn class_cdf(&self) -> &[f64] {
        &self.cdf
    }
}

/// Divides by the sum; sums below [`NORMALIZER_FLOOR`] map to uniform scores.
pub fn normalize_scores(cdf: &[f64]) -> Vec<f64> {
    let total: f64 = cdf.iter().sum();
    if !(total >= NORMALIZER_FLOOR) {
        return vec![1.0 / cdf.len() as f64; cdf.len()];
    }
    cdf.iter().map(|c| c / total).collect()
}

impl MdnC2Model {
    pub fn new(input_dim: usize, classes: usize, arch: &Architecture, init_seed: u64) -> Result<Self> {
        arch.check(input_dim, classes)?;
        let mut rng = seed::rng(init_seed);
        let reducer = DenseLayer::glorot(input_dim, classes, Activation::Tanh, &mut rng);
        let encoder = Encoder::new(input_dim, arch.layers, arch.units, &mut rng);
        let head = MdnHead::new(arch.units, arch.mixtures, &mut rng);
        Ok(Self {
            input_dim,
            classes,
            reducer,
            encoder,
            head,
        })
    }

    pub fn mixtures(&self) -> usize {
        self.head.mixtures()
    }

    pub fn reducer(&self) -> &DenseLayer {
        &self.reducer
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::shape(format!(
                "MDN-C2 expects {} features, got {}",
                self.input_dim,
                x.len()
            )));
        }
        Ok(())
    }

    pub fn latent(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        self.reducer.forward(x)
    }

    pub fn trace(&self, x: &[f64], dropout: Option<&mut Dropout>) -> Result<C2Trace> {
        self.check_input(x)?;
        let reducer = self.reducer.forward_trace(x)?;
        let encoder = self.encoder.trace(x, dropout)?;
        let head = self.head.trace(&encoder.output)?;
        let block = CdfBlock::new(&reducer.output, &head.params);
        let cdf = block.point_sums();
        let total: f64 = cdf.iter().sum();
        let scores = normalize_scores(&cdf);
        Ok(C2Trace {
            reducer,
            encoder,
            head,
            block,
            cdf,
            total,
            scores,
        })
    }

    /// Parameter gradients given, per trace, the loss gradient on the class scores.
    pub fn backward(&self, traces: &[C2Trace], grad_scores: &[Vec<f64>]) -> Result<ParameterVector> {
        if traces.is_empty() {
            return Err(Error::Usage("backward called without a recorded forward pass".into()));
        }
        if traces.len() != grad_scores.len() {
            return Err(Error::shape("one output gradient per trace required"));
        }
        let mut grads = self.zero_grads();
        let (red_grads, rest) = grads.split_at_mut(1);
        let depth = self.encoder.layers.len();
        let (enc_grads, head_grads) = rest.split_at_mut(depth);
        let k = self.mixtures();
        for (trace, g) in traces.iter().zip(grad_scores) {
            if g.len() != self.classes {
                return Err(Error::shape("output gradient length differs from class count"));
            }
            if !(trace.total >= NORMALIZER_FLOOR) {
                continue;
            }
            let dot: f64 = g.iter().zip(&trace.scores).map(|(a, b)| a * b).sum();
            let d_cdf: Vec<f64> = g.iter().map(|gc| (gc - dot) / trace.total).collect();
            let grad_weighted: Vec<f64> = d_cdf
                .iter()
                .flat_map(|&v| std::iter::repeat_n(v, k))
                .collect();
            let mut d = ParamGrads::zeros(k);
            let d_latent = trace.block.backward(&trace.head.params, &grad_weighted, &mut d);
            let dz = self.head.backward(&trace.head, &d, head_grads);
            self.encoder.backward(&trace.encoder, &dz, enc_grads);
            self.reducer.backward(&trace.reducer, &d_latent, &mut red_grads[0]);
        }
        Ok(ParameterVector::from_grads(&grads))
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        if doc.variant != Variant::C2.tag() {
            return Err(Error::validation(format!("document variant `{}` is not c2", doc.variant)));
        }
        let depth = doc.metadata_usize("layers")?;
        let input_dim = doc.metadata_usize("input_dim")?;
        let classes = doc.metadata_usize("classes")?;
        let mut layers = doc.build_layers()?.into_iter();
        let reducer = take_layer(&mut layers, "reducer", Activation::Tanh)?;
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
        if reducer.in_dim() != input_dim || reducer.out_dim() != classes {
            return Err(Error::shape("reducer must map d inputs to C latent features"));
        }
        Ok(Self {
            input_dim,
            classes,
            reducer,
            encoder,
            head,
        })
    }
}

impl Network for MdnC2Model {
    fn layers(&self) -> Vec<&DenseLayer> {
        let mut out = vec![&self.reducer];
        out.extend(self.encoder.layers.iter());
        out.extend([&self.head.rho, &self.head.mu, &self.head.sigma]);
        out
    }

    fn layers_mut(&mut self) -> Vec<&mut DenseLayer> {
        let mut out = vec![&mut self.reducer];
        out.extend(self.encoder.layers.iter_mut());
        out.extend([&mut self.head.rho, &mut self.head.mu, &mut self.head.sigma]);
        out
    }
}

impl Classifier for MdnC2Model {
    fn variant(&self) -> Variant {
        Variant::C2
    }

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn class_count(&self) -> usize {
        self.classes
    }

    fn forward(&self, x: &[f64]) -> Result<Prediction> {
        self.check_input(x)?;
        let latent = self.reducer.forward(x)?;
        let z = self.encoder.forward(x)?;
        let params = self.head.params(&z)?;
        let cdf = CdfBlock::new(&latent, &params).point_sums();
        Ok(Prediction {
            class_scores: normalize_scores(&cdf),
            mixture: params.mixture()?,
        })
    }

    fn batch_loss_grad(
        &self,
        xs: &[&[f64]],
        labels: &[usize],
        _sparsity: f64,
        mut dropout: Option<&mut Dropout>,
    ) -> Result<(f64, ParameterVector)> {
        check_batch(xs, labels, self.classes)?;
        let n = xs.len() as f64;
        let mut traces = Vec::with_capacity(xs.len());
        let mut grads = Vec::with_capacity(xs.len());
        let mut ce = 0.0;
        for (x, &y) in xs.iter().zip(labels) {
            let trace = self.trace(x, dropout.as_deref_mut())?;
            let score = trace.scores[y];
            ce -= score.max(LOG_CLAMP).ln();
            let mut g = vec![0.0; self.classes];
            if score > LOG_CLAMP {
                g[y] = -1.0 / (score * n);
            }
            traces.push(trace);
            grads.push(g);
        }
        Ok((ce / n, self.backward(&traces, &grads)?))
    }

    fn to_document(&self) -> ModelDocument {
        let mut named: Vec<(String, &DenseLayer)> = vec![("reducer".into(), &self.reducer)];
        named.extend(
            self.encoder
                .layers
                .iter()
                .enumerate()
                .map(|(i, l)| (format!("encoder.{i}"), l)),
        );
        named.push(("head.rho".into(), &self.head.rho));
        named.push(("head.mu".into(), &self.head.mu));
        named.push(("head.sigma".into(), &self.head.sigma));
        let mut meta = BTreeMap::new();
        meta.insert("input_dim".into(), self.input_dim.into());
        meta.insert("classes".into(), self.classes.into());
        meta.insert("layers".into(), self.encoder.layers.len().into());
        meta.insert("units".into(), self.encoder.out_dim().into());
        meta.insert("mixtures".into(), self.mixtures().into());
        ModelDocument::new(Variant::C2.tag(), named, meta)
    }
}
