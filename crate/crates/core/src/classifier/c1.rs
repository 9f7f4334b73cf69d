use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::nn::{
    add_l1_subgradient, l1_penalty, log_sum_exp, softmax, take_layer, Activation, DenseLayer,
    LayerTrace, ModelDocument, Network, ParameterVector,
};
use crate::seed;

use super::parts::{CdfBlock, Dropout, Encoder, EncoderTrace, HeadTrace, MdnHead, ParamGrads};
use super::{check_batch, Architecture, Classifier, Prediction, Variant};

/// Tanh encoder → per-sample mixture → weighted CDF at every input feature →
/// softmax layer over the `d·K` CDF values.
///
/// The mixture is univariate: one `(ρ_k, μ_k, σ_k)` triple per component,
/// shared by all `d` features.
#[derive(Debug, Clone, PartialEq)]
pub struct MdnC1Model {
    input_dim: usize,
    classes: usize,
    encoder: Encoder,
    head: MdnHead,
    output: DenseLayer,
}

pub struct C1Trace {
    encoder: EncoderTrace,
    head: HeadTrace,
    block: CdfBlock,
    output: LayerTrace,
}

impl C1Trace {
    pub fn logits(&self) -> &[f64] {
        &self.output.pre
    }

    pub fn scores(&self) -> &[f64] {
        &self.output.output
    }
}

impl MdnC1Model {
    pub fn new(input_dim: usize, classes: usize, arch: &Architecture, init_seed: u64) -> Result<Self> {
        arch.check(input_dim, classes)?;
        let mut rng = seed::rng(init_seed);
        let encoder = Encoder::new(input_dim, arch.layers, arch.units, &mut rng);
        let head = MdnHead::new(arch.units, arch.mixtures, &mut rng);
        let output = DenseLayer::glorot(input_dim * arch.mixtures, classes, Activation::Softmax, &mut rng);
        Ok(Self {
            input_dim,
            classes,
            encoder,
            head,
            output,
        })
    }

    pub fn mixtures(&self) -> usize {
        self.head.mixtures()
    }

    /// The `C × dK` softmax layer carrying the L1 penalty.
    pub fn output_layer(&self) -> &DenseLayer {
        &self.output
    }

    pub fn output_layer_mut(&mut self) -> &mut DenseLayer {
        &mut self.output
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::shape(format!(
                "MDN-C1 expects {} features, got {}",
                self.input_dim,
                x.len()
            )));
        }
        Ok(())
    }

    /// The `d × K` weighted CDF matrix, row-major: entry `m * K + k`.
    pub fn weighted_cdf_matrix(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let z = self.encoder.forward(x)?;
        let params = self.head.params(&z)?;
        Ok(CdfBlock::new(x, &params).weighted)
    }

    pub fn trace(&self, x: &[f64], dropout: Option<&mut Dropout>) -> Result<C1Trace> {
        self.check_input(x)?;
        let encoder = self.encoder.trace(x, dropout)?;
        let head = self.head.trace(&encoder.output)?;
        let block = CdfBlock::new(x, &head.params);
        let output = self.output.forward_trace(&block.weighted)?;
        Ok(C1Trace {
            encoder,
            head,
            block,
            output,
        })
    }

    /// Parameter gradients given, per recorded trace, the loss gradient on the
    /// output logits (the pre-softmax values of the final layer).
    pub fn backward(&self, traces: &[C1Trace], grad_logits: &[Vec<f64>]) -> Result<ParameterVector> {
        if traces.is_empty() {
            return Err(Error::Usage("backward called without a recorded forward pass".into()));
        }
        if traces.len() != grad_logits.len() {
            return Err(Error::shape("one output gradient per trace required"));
        }
        let mut grads = self.zero_grads();
        let depth = self.encoder.layers.len();
        let (enc_grads, rest) = grads.split_at_mut(depth);
        let (head_grads, out_grads) = rest.split_at_mut(3);
        for (trace, g) in traces.iter().zip(grad_logits) {
            if g.len() != self.classes {
                return Err(Error::shape("output gradient length differs from class count"));
            }
            let d_features = self.output.backward_pre(&trace.output, g, &mut out_grads[0]);
            let mut d = ParamGrads::zeros(self.mixtures());
            trace.block.backward(&trace.head.params, &d_features, &mut d);
            let dz = self.head.backward(&trace.head, &d, head_grads);
            self.encoder.backward(&trace.encoder, &dz, enc_grads);
        }
        Ok(ParameterVector::from_grads(&grads))
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        if doc.variant != Variant::C1.tag() {
            return Err(Error::validation(format!("document variant `{}` is not c1", doc.variant)));
        }
        let depth = doc.metadata_usize("layers")?;
        let input_dim = doc.metadata_usize("input_dim")?;
        let classes = doc.metadata_usize("classes")?;
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
        let output = take_layer(&mut layers, "output", Activation::Softmax)?;
        if output.in_dim() != input_dim * head.mixtures() || output.out_dim() != classes {
            return Err(Error::shape("output layer must be C × dK"));
        }
        Ok(Self {
            input_dim,
            classes,
            encoder,
            head,
            output,
        })
    }
}

impl Network for MdnC1Model {
    fn layers(&self) -> Vec<&DenseLayer> {
        let mut out: Vec<&DenseLayer> = self.encoder.layers.iter().collect();
        out.extend([&self.head.rho, &self.head.mu, &self.head.sigma, &self.output]);
        out
    }

    fn layers_mut(&mut self) -> Vec<&mut DenseLayer> {
        let mut out: Vec<&mut DenseLayer> = self.encoder.layers.iter_mut().collect();
        out.extend([
            &mut self.head.rho,
            &mut self.head.mu,
            &mut self.head.sigma,
            &mut self.output,
        ]);
        out
    }
}

impl Classifier for MdnC1Model {
    fn variant(&self) -> Variant {
        Variant::C1
    }

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn class_count(&self) -> usize {
        self.classes
    }

    fn forward(&self, x: &[f64]) -> Result<Prediction> {
        self.check_input(x)?;
        let z = self.encoder.forward(x)?;
        let params = self.head.params(&z)?;
        let block = CdfBlock::new(x, &params);
        let class_scores = self.output.forward(&block.weighted)?;
        Ok(Prediction {
            class_scores,
            mixture: params.mixture()?,
        })
    }

    fn batch_loss_grad(
        &self,
        xs: &[&[f64]],
        labels: &[usize],
        sparsity: f64,
        mut dropout: Option<&mut Dropout>,
    ) -> Result<(f64, ParameterVector)> {
        check_batch(xs, labels, self.classes)?;
        let n = xs.len() as f64;
        let mut traces = Vec::with_capacity(xs.len());
        let mut grads = Vec::with_capacity(xs.len());
        let mut ce = 0.0;
        for (x, &y) in xs.iter().zip(labels) {
            let trace = self.trace(x, dropout.as_deref_mut())?;
            let logits = trace.logits();
            ce += log_sum_exp(logits) - logits[y];
            let mut g = softmax(logits);
            g[y] -= 1.0;
            g.iter_mut().for_each(|v| *v /= n);
            traces.push(trace);
            grads.push(g);
        }
        let mut grad = self.backward(&traces, &grads)?;
        let weights = self.output.weights();
        let offset = grad.len() - self.output.parameter_count();
        add_l1_subgradient(weights, sparsity, &mut grad.as_mut_slice()[offset..offset + weights.len()]);
        Ok((ce / n + l1_penalty(weights, sparsity), grad))
    }

    fn sparse_layer(&self) -> Option<&DenseLayer> {
        Some(&self.output)
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
        named.push(("output".into(), &self.output));
        let mut meta = BTreeMap::new();
        meta.insert("input_dim".into(), self.input_dim.into());
        meta.insert("classes".into(), self.classes.into());
        meta.insert("layers".into(), self.encoder.layers.len().into());
        meta.insert("units".into(), self.encoder.out_dim().into());
        meta.insert("mixtures".into(), self.mixtures().into());
        ModelDocument::new(Variant::C1.tag(), named, meta)
    }
}
