//! Dense-network substrate: layers, flat parameter vectors, hand-derived
//! reverse-mode gradients, Adam, dropout, L1 and a JSON model format.

mod dropout;
mod layer;
mod optim;
mod params;
mod serial;

pub use dropout::{apply_dropout, dropout_mask, Mode};
pub use layer::{log_sum_exp, sigmoid, softmax, softplus, Activation, DenseLayer, LayerGrads, LayerTrace};
pub use optim::{AdamConfig, OptimizerState};
pub use params::{add_l1_subgradient, l1_penalty, Network, ParameterVector};
pub use serial::{LayerShape, ModelDocument, MODEL_FORMAT_VERSION};

pub(crate) use serial::take_layer;
