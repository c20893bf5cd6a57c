use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::spec::{LayerSpec, NetworkSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// Weights uniform in ±sqrt(6 / fan_in), biases zero.
    #[default]
    FanInUniform,
    /// All zeros; only useful for symmetry checks.
    Zeros,
}

impl std::str::FromStr for InitScheme {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "fan_in_uniform" => Ok(Self::FanInUniform),
            "zeros" => Ok(Self::Zeros),
            other => Err(crate::Error::Config(format!(
                "unknown init scheme '{other}'"
            ))),
        }
    }
}

/// Weight and bias of one parameterized layer.
///
/// Dense weights are `(inputs, units)`. Convolution weights are
/// `(kernel_width * in_channels, out_channels)` with row `k * in_channels + c`
/// holding the tap at offset `k` for input channel `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl LayerParams {
    pub fn zeros_like(&self) -> Self {
        Self {
            weight: Array2::zeros(self.weight.raw_dim()),
            bias: Array1::zeros(self.bias.raw_dim()),
        }
    }

    pub fn len(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Trained or initialized weights together with the architecture they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub spec: NetworkSpec,
    /// One entry per layer in `spec.param_layers()`.
    pub layers: Vec<LayerParams>,
    pub seed: u64,
    pub init: InitScheme,
}

impl Parameters {
    pub fn n_params(&self) -> usize {
        self.layers.iter().map(LayerParams::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// Expected `(weight rows, weight cols)` per parameterized layer.
    pub fn expected_shapes(spec: &NetworkSpec) -> crate::Result<Vec<(usize, usize)>> {
        let shapes = spec.shapes()?;
        Ok(spec
            .param_layers()
            .into_iter()
            .map(|i| {
                let input = spec.input_shape(&shapes, i);
                match spec.layers[i] {
                    LayerSpec::Conv1d {
                        out_channels,
                        kernel_width,
                    } => (kernel_width * input.channels, out_channels),
                    LayerSpec::Dense { units } => (input.size(), units),
                    _ => unreachable!("param_layers only yields conv/dense"),
                }
            })
            .collect())
    }
}

pub fn init_params(spec: &NetworkSpec, seed: u64, scheme: InitScheme) -> Parameters {
    let shapes = Parameters::expected_shapes(spec).expect("spec was validated on construction");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = shapes
        .into_iter()
        .map(|(fan_in, fan_out)| {
            let weight = match scheme {
                InitScheme::FanInUniform => {
                    let bound = (6.0 / fan_in as f64).sqrt();
                    Array2::from_shape_simple_fn((fan_in, fan_out), || {
                        rng.random_range(-bound..=bound)
                    })
                }
                InitScheme::Zeros => Array2::zeros((fan_in, fan_out)),
            };
            LayerParams {
                weight,
                bias: Array1::zeros(fan_out),
            }
        })
        .collect();
    Parameters {
        spec: spec.clone(),
        layers,
        seed,
        init: scheme,
    }
}
