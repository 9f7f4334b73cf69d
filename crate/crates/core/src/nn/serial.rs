//! JSON model documents.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "variant": "c1",
//!   "layers": [{"name": "encoder.0", "in_dim": 8, "out_dim": 10, "activation": "tanh"}, ...],
//!   "parameters": [0.12, -0.4, ...],
//!   "metadata": {"mixtures": 3, ...}
//! }
//! ```
//!
//! `parameters` is the flat [`ParameterVector`] in layer order.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::layer::{Activation, DenseLayer};
use super::params::ParameterVector;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerShape {
    pub name: String,
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub variant: String,
    pub layers: Vec<LayerShape>,
    pub parameters: Vec<f64>,
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl ModelDocument {
    pub fn new<'a>(
        variant: &str,
        layers: impl IntoIterator<Item = (String, &'a DenseLayer)>,
        metadata: BTreeMap<String, serde_json::Value>,
    ) -> Self {
        let mut shapes = Vec::new();
        let mut refs = Vec::new();
        for (name, layer) in layers {
            shapes.push(LayerShape {
                name,
                in_dim: layer.in_dim(),
                out_dim: layer.out_dim(),
                activation: layer.activation(),
            });
            refs.push(layer);
        }
        Self {
            format_version: MODEL_FORMAT_VERSION,
            variant: variant.to_string(),
            layers: shapes,
            parameters: ParameterVector::flatten(refs).into_vec(),
            metadata,
        }
    }

    /// Rebuilds the layers in document order.
    pub fn build_layers(&self) -> Result<Vec<(String, DenseLayer)>> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::validation(format!(
                "unsupported model format_version {} (expected {MODEL_FORMAT_VERSION})",
                self.format_version
            )));
        }
        let mut offset = 0;
        let mut out = Vec::with_capacity(self.layers.len());
        for shape in &self.layers {
            let nw = shape.in_dim * shape.out_dim;
            let nb = shape.out_dim;
            if offset + nw + nb > self.parameters.len() {
                return Err(Error::shape(format!(
                    "layer {} runs past the end of the parameter array",
                    shape.name
                )));
            }
            let weights = self.parameters[offset..offset + nw].to_vec();
            let bias = self.parameters[offset + nw..offset + nw + nb].to_vec();
            offset += nw + nb;
            out.push((
                shape.name.clone(),
                DenseLayer::from_parts(shape.in_dim, shape.out_dim, weights, bias, shape.activation)?,
            ));
        }
        if offset != self.parameters.len() {
            return Err(Error::shape(format!(
                "{} trailing parameters after the last layer",
                self.parameters.len() - offset
            )));
        }
        Ok(out)
    }

    pub fn metadata_f64(&self, key: &str) -> Result<f64> {
        self.metadata
            .get(key)
            .and_then(|v| v.as_f64())
            .ok_or_else(|| Error::validation(format!("model metadata lacks numeric `{key}`")))
    }

    pub fn metadata_usize(&self, key: &str) -> Result<usize> {
        self.metadata
            .get(key)
            .and_then(|v| v.as_u64())
            .map(|v| v as usize)
            .ok_or_else(|| Error::validation(format!("model metadata lacks integer `{key}`")))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Pops the next layer named `name` from a rebuilt list, checking its activation.
pub(crate) fn take_layer(
    layers: &mut std::vec::IntoIter<(String, DenseLayer)>,
    name: &str,
    activation: Activation,
) -> Result<DenseLayer> {
    match layers.next() {
        Some((found, layer)) if found == name && layer.activation() == activation => Ok(layer),
        Some((found, layer)) => Err(Error::validation(format!(
            "expected layer `{name}` ({}), found `{found}` ({})",
            activation.name(),
            layer.activation().name()
        ))),
        None => Err(Error::validation(format!("model document is missing layer `{name}`"))),
    }
}
