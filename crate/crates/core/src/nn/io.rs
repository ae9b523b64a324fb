//! JSON weight file.
//!
//! ```json
//! { "format_version": 1,
//!   "dims": [199, 128, 64, 32, 1],
//!   "activations": ["relu", "relu", "relu", "tanh"],
//!   "layers": [ { "weights": [[...row 0...], ...], "biases": [...] }, ... ] }
//! ```
//!
//! Weights are stored row-major: one row of `inputs` values per output unit.

use serde::{Deserialize, Serialize};

use super::{Activation, DenseNet};
use crate::error::{Error, Result};

pub const WEIGHT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerWeights {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightFile {
    pub format_version: u32,
    pub dims: Vec<usize>,
    pub activations: Vec<Activation>,
    pub layers: Vec<LayerWeights>,
}

impl From<&DenseNet> for WeightFile {
    fn from(net: &DenseNet) -> WeightFile {
        WeightFile {
            format_version: WEIGHT_FORMAT_VERSION,
            dims: net.dims(),
            activations: net.activations(),
            layers: net
                .layers()
                .iter()
                .map(|l| LayerWeights {
                    weights: l.weights().chunks(l.inputs()).map(<[f64]>::to_vec).collect(),
                    biases: l.biases().to_vec(),
                })
                .collect(),
        }
    }
}

impl WeightFile {
    pub fn into_net(self) -> Result<DenseNet> {
        if self.format_version != WEIGHT_FORMAT_VERSION {
            return Err(Error::Validation(format!(
                "unsupported weight format_version {} (expected {WEIGHT_FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.dims.len() < 2 || self.layers.len() != self.dims.len() - 1 {
            return Err(Error::Validation(format!(
                "{} layer sizes but {} weight layers",
                self.dims.len(),
                self.layers.len()
            )));
        }
        let mut weights = Vec::with_capacity(self.layers.len());
        let mut biases = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.into_iter().enumerate() {
            let (inputs, outputs) = (self.dims[i], self.dims[i + 1]);
            if layer.weights.len() != outputs {
                return Err(Error::Validation(format!(
                    "layer {i}: expected {outputs} weight rows, found {}",
                    layer.weights.len()
                )));
            }
            if let Some((r, row)) = layer.weights.iter().enumerate().find(|(_, row)| row.len() != inputs) {
                return Err(Error::Validation(format!(
                    "layer {i}: row {r} has {} weights, expected {inputs}",
                    row.len()
                )));
            }
            weights.push(layer.weights.concat());
            biases.push(layer.biases);
        }
        DenseNet::from_parameters(&self.dims, &self.activations, weights, biases).map_err(|e| match e {
            Error::Config(msg) => Error::Validation(msg),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("weight file serializes")
    }

    pub fn from_json(text: &str) -> Result<WeightFile> {
        serde_json::from_str(text).map_err(|e| Error::json("weight file", e))
    }
}
