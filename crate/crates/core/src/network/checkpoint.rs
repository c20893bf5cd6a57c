//! JSON checkpoint container.
//!
//! Keys: `format_version`, `spec` (architecture string), `input_len`,
//! `layers` (full layer list), `params` (per parameterized layer:
//! `weight_shape`, row-major `weight`, `bias`), `encoder`, `seed`, `init`,
//! `feature_names`. Floats are written with round-trip precision so a reload
//! reproduces forward outputs bit-exactly.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::params::{InitScheme, LayerParams, Parameters};
use super::spec::{LayerSpec, NetworkSpec};
use crate::data::EncoderState;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoredLayer {
    weight_shape: [usize; 2],
    weight: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Container {
    format_version: u32,
    spec: String,
    input_len: usize,
    layers: Vec<LayerSpec>,
    params: Vec<StoredLayer>,
    encoder: Option<EncoderState>,
    seed: u64,
    init: InitScheme,
    feature_names: Vec<String>,
}

/// Parameters plus what is needed to encode new records for them.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: Parameters,
    pub encoder: Option<EncoderState>,
    pub feature_names: Vec<String>,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        let p = &self.params;
        let c = Container {
            format_version: FORMAT_VERSION,
            spec: p.spec.text.clone(),
            input_len: p.spec.input_len,
            layers: p.spec.layers.clone(),
            params: p
                .layers
                .iter()
                .map(|l| StoredLayer {
                    weight_shape: [l.weight.nrows(), l.weight.ncols()],
                    weight: l.weight.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
            encoder: self.encoder.clone(),
            seed: p.seed,
            init: p.init,
            feature_names: self.feature_names.clone(),
        };
        Ok(serde_json::to_string(&c)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let version: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::Checkpoint(format!("unreadable checkpoint: {e}")))?;
        match version.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(FORMAT_VERSION) => {}
            Some(v) => {
                return Err(Error::Checkpoint(format!(
                    "format version {v} is not supported (expected {FORMAT_VERSION})"
                )))
            }
            None => return Err(Error::Checkpoint("missing format_version".into())),
        }
        let c: Container = serde_json::from_value(version)
            .map_err(|e| Error::Checkpoint(format!("malformed checkpoint: {e}")))?;
        let mut spec = NetworkSpec::from_layers(c.input_len, c.layers)
            .map_err(|e| Error::Checkpoint(format!("embedded spec is invalid: {e}")))?;
        spec.text = c.spec;
        let expected = Parameters::expected_shapes(&spec)?;
        if expected.len() != c.params.len() {
            return Err(Error::Checkpoint(format!(
                "spec has {} parameterized layers, file stores {}",
                expected.len(),
                c.params.len()
            )));
        }
        let mut layers = Vec::with_capacity(expected.len());
        for (i, ((rows, cols), s)) in expected.into_iter().zip(c.params).enumerate() {
            if s.weight_shape != [rows, cols]
                || s.weight.len() != rows * cols
                || s.bias.len() != cols
            {
                return Err(Error::Checkpoint(format!(
                    "layer {i}: stored shape {:?} with {} weights and {} biases does not match spec shape [{rows}, {cols}]",
                    s.weight_shape,
                    s.weight.len(),
                    s.bias.len()
                )));
            }
            layers.push(LayerParams {
                weight: Array2::from_shape_vec((rows, cols), s.weight).expect("length checked"),
                bias: Array1::from(s.bias),
            });
        }
        let params = Parameters {
            spec,
            layers,
            seed: c.seed,
            init: c.init,
        };
        if !params.is_finite() {
            return Err(Error::Checkpoint(
                "checkpoint contains non-finite parameters".into(),
            ));
        }
        if let Some(enc) = &c.encoder {
            if enc.n_encoded() != params.spec.input_len {
                return Err(Error::Checkpoint(format!(
                    "encoder produces {} features, network expects {}",
                    enc.n_encoded(),
                    params.spec.input_len
                )));
            }
        }
        Ok(Self {
            params,
            encoder: c.encoder,
            feature_names: c.feature_names,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
