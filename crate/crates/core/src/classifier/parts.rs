//! Pieces shared by every MDN model: the tanh encoder, the (ρ, μ, σ) head and
//! the block of weighted Gaussian CDF evaluations with its backward pass.

use rand::Rng;

use crate::error::Result;
use crate::mixture::{normal_density, phi, GaussianMixture, STD_FLOOR};
use crate::nn::{dropout_mask, Activation, DenseLayer, LayerGrads, LayerTrace};
use crate::seed;

/// Training-mode dropout: the rate and the stream that draws masks.
pub struct Dropout<'a> {
    pub rate: f64,
    pub rng: &'a mut seed::Rng,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Encoder {
    pub layers: Vec<DenseLayer>,
}

pub(crate) struct EncoderTrace {
    traces: Vec<LayerTrace>,
    masks: Vec<Option<Vec<f64>>>,
    pub output: Vec<f64>,
}

impl Encoder {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, depth: usize, units: usize, rng: &mut R) -> Self {
        let mut layers = Vec::with_capacity(depth);
        let mut fan_in = input_dim;
        for _ in 0..depth {
            layers.push(DenseLayer::glorot(fan_in, units, Activation::Tanh, rng));
            fan_in = units;
        }
        Self { layers }
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map(|l| l.out_dim()).unwrap_or(0)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut h = x.to_vec();
        for layer in &self.layers {
            h = layer.forward(&h)?;
        }
        Ok(h)
    }

    pub fn trace(&self, x: &[f64], mut dropout: Option<&mut Dropout>) -> Result<EncoderTrace> {
        let mut traces = Vec::with_capacity(self.layers.len());
        let mut masks = Vec::with_capacity(self.layers.len());
        let mut h = x.to_vec();
        for layer in &self.layers {
            let trace = layer.forward_trace(&h)?;
            h = trace.output.clone();
            let mask = match dropout.as_deref_mut() {
                Some(d) if d.rate > 0.0 => {
                    let mask = dropout_mask(h.len(), d.rate, d.rng)?;
                    for (v, m) in h.iter_mut().zip(&mask) {
                        *v *= m;
                    }
                    Some(mask)
                }
                _ => None,
            };
            traces.push(trace);
            masks.push(mask);
        }
        Ok(EncoderTrace {
            traces,
            masks,
            output: h,
        })
    }

    pub fn backward(&self, trace: &EncoderTrace, grad_out: &[f64], grads: &mut [LayerGrads]) -> Vec<f64> {
        let mut g = grad_out.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            if let Some(mask) = &trace.masks[i] {
                for (gi, m) in g.iter_mut().zip(mask) {
                    *gi *= m;
                }
            }
            g = layer.backward(&trace.traces[i], &g, &mut grads[i]);
        }
        g
    }
}

/// Three parallel layers emitting mixture weights, means and stds.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct MdnHead {
    pub rho: DenseLayer,
    pub mu: DenseLayer,
    pub sigma: DenseLayer,
}

pub(crate) struct HeadTrace {
    rho: LayerTrace,
    mu: LayerTrace,
    sigma: LayerTrace,
    pub params: MixtureParams,
}

/// Raw per-sample mixture parameters as produced by the head.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct MixtureParams {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl MixtureParams {
    pub fn mixture(&self) -> Result<GaussianMixture> {
        GaussianMixture::from_parts(&self.weights, &self.means, &self.stds)
    }

    pub fn scaled(&self, scale: f64) -> MixtureParams {
        MixtureParams {
            weights: self.weights.clone(),
            means: self.means.iter().map(|m| m * scale).collect(),
            stds: self.stds.iter().map(|s| s * scale).collect(),
        }
    }
}

impl MdnHead {
    pub fn new<R: Rng + ?Sized>(in_dim: usize, mixtures: usize, rng: &mut R) -> Self {
        Self {
            rho: DenseLayer::glorot(in_dim, mixtures, Activation::Softmax, rng),
            mu: DenseLayer::glorot(in_dim, mixtures, Activation::Linear, rng),
            sigma: DenseLayer::glorot(in_dim, mixtures, Activation::Softplus, rng),
        }
    }

    pub fn mixtures(&self) -> usize {
        self.rho.out_dim()
    }

    pub fn params(&self, z: &[f64]) -> Result<MixtureParams> {
        Ok(MixtureParams {
            weights: self.rho.forward(z)?,
            means: self.mu.forward(z)?,
            stds: self.sigma.forward(z)?.into_iter().map(|s| s + STD_FLOOR).collect(),
        })
    }

    pub fn trace(&self, z: &[f64]) -> Result<HeadTrace> {
        let rho = self.rho.forward_trace(z)?;
        let mu = self.mu.forward_trace(z)?;
        let sigma = self.sigma.forward_trace(z)?;
        let params = MixtureParams {
            weights: rho.output.clone(),
            means: mu.output.clone(),
            stds: sigma.output.iter().map(|s| s + STD_FLOOR).collect(),
        };
        Ok(HeadTrace {
            rho,
            mu,
            sigma,
            params,
        })
    }

    /// `grads` holds the rho, mu and sigma slots in that order.
    pub fn backward(&self, trace: &HeadTrace, d: &ParamGrads, grads: &mut [LayerGrads]) -> Vec<f64> {
        let a = self.rho.backward(&trace.rho, &d.weights, &mut grads[0]);
        let b = self.mu.backward(&trace.mu, &d.means, &mut grads[1]);
        let c = self.sigma.backward(&trace.sigma, &d.stds, &mut grads[2]);
        a.iter().zip(&b).zip(&c).map(|((x, y), z)| x + y + z).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ParamGrads {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl ParamGrads {
    pub fn zeros(k: usize) -> Self {
        Self {
            weights: vec![0.0; k],
            means: vec![0.0; k],
            stds: vec![0.0; k],
        }
    }
}

/// `weighted[p * K + k] = ρ_k Φ((x_p − μ_k) / σ_k)` for every evaluation point `x_p`.
pub(crate) struct CdfBlock {
    k: usize,
    standardized: Vec<f64>,
    cdf: Vec<f64>,
    pub weighted: Vec<f64>,
}

impl CdfBlock {
    pub fn new(points: &[f64], params: &MixtureParams) -> Self {
        let k = params.weights.len();
        let mut standardized = Vec::with_capacity(points.len() * k);
        let mut cdf = Vec::with_capacity(points.len() * k);
        let mut weighted = Vec::with_capacity(points.len() * k);
        for &x in points {
            for j in 0..k {
                let u = (x - params.means[j]) / params.stds[j];
                let c = phi(u);
                standardized.push(u);
                cdf.push(c);
                weighted.push(params.weights[j] * c);
            }
        }
        Self {
            k,
            standardized,
            cdf,
            weighted,
        }
    }

    /// Per-point sums over components: the mixture CDF at each point.
    pub fn point_sums(&self) -> Vec<f64> {
        self.weighted.chunks_exact(self.k).map(|c| c.iter().sum()).collect()
    }

    /// Accumulates into `d` and returns the gradient on each evaluation point.
    pub fn backward(&self, params: &MixtureParams, grad_weighted: &[f64], d: &mut ParamGrads) -> Vec<f64> {
        let points = self.weighted.len() / self.k.max(1);
        let mut d_points = vec![0.0; points];
        for p in 0..points {
            for j in 0..self.k {
                let idx = p * self.k + j;
                let g = grad_weighted[idx];
                if g == 0.0 {
                    continue;
                }
                let u = self.standardized[idx];
                let s = params.stds[j];
                let dens = params.weights[j] * normal_density(u) / s;
                d.weights[j] += g * self.cdf[idx];
                d.means[j] -= g * dens;
                d.stds[j] -= g * dens * u;
                d_points[p] += g * dens;
            }
        }
        d_points
    }
}
