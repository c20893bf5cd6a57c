//! Architecture strings such as `C25-C50-C100-F2200-O2`.
//!
//! `C<n>` is a 1-D convolution with `n` output channels (kernel 3, stride 1,
//! no padding by default), `F<n>` a hidden fully connected layer with ReLU,
//! and `O2` the two-unit output layer followed by softmax. Activations are
//! stored channels-last, so a flattened conv output of length `L` with `C`
//! channels has `L * C` entries ordered position-major.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_KERNEL_WIDTH: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum LayerSpec {
    Conv1d {
        out_channels: usize,
        kernel_width: usize,
    },
    Relu,
    Flatten,
    Dense {
        units: usize,
    },
    Softmax,
}

impl LayerSpec {
    pub fn has_params(&self) -> bool {
        matches!(self, Self::Conv1d { .. } | Self::Dense { .. })
    }
}

/// Activation shape after a layer: `len` positions by `channels`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActShape {
    pub len: usize,
    pub channels: usize,
}

impl ActShape {
    pub fn size(&self) -> usize {
        self.len * self.channels
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecOptions {
    pub kernel_width: usize,
    /// ReLU after every convolution instead of only the first.
    pub relu_every_conv: bool,
}

impl Default for SpecOptions {
    fn default() -> Self {
        Self {
            kernel_width: DEFAULT_KERNEL_WIDTH,
            relu_every_conv: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_len: usize,
    pub layers: Vec<LayerSpec>,
    /// Canonical architecture string; empty for hand-built specs.
    #[serde(default)]
    pub text: String,
}

impl NetworkSpec {
    /// Builds and validates a spec from an explicit layer list.
    pub fn from_layers(input_len: usize, layers: Vec<LayerSpec>) -> Result<Self> {
        let spec = Self {
            input_len,
            layers,
            text: String::new(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Output shape of every layer, in order.
    pub fn shapes(&self) -> Result<Vec<ActShape>> {
        let mut shape = ActShape {
            len: self.input_len,
            channels: 1,
        };
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            shape = match *layer {
                LayerSpec::Conv1d {
                    out_channels,
                    kernel_width,
                } => {
                    if kernel_width == 0 || out_channels == 0 {
                        return Err(Error::Shape(format!("layer {i}: zero-sized convolution")));
                    }
                    if shape.len < kernel_width {
                        return Err(Error::Shape(format!(
                            "layer {i}: convolution of width {kernel_width} on length {} leaves no output",
                            shape.len
                        )));
                    }
                    ActShape {
                        len: shape.len - kernel_width + 1,
                        channels: out_channels,
                    }
                }
                LayerSpec::Relu | LayerSpec::Softmax => shape,
                LayerSpec::Flatten => ActShape {
                    len: 1,
                    channels: shape.size(),
                },
                LayerSpec::Dense { units } => {
                    if units == 0 {
                        return Err(Error::Shape(format!(
                            "layer {i}: dense layer with zero units"
                        )));
                    }
                    ActShape {
                        len: 1,
                        channels: units,
                    }
                }
            };
            out.push(shape);
        }
        Ok(out)
    }

    /// Input shape of layer `i`.
    pub fn input_shape(&self, shapes: &[ActShape], i: usize) -> ActShape {
        if i == 0 {
            ActShape {
                len: self.input_len,
                channels: 1,
            }
        } else {
            shapes[i - 1]
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_len == 0 {
            return Err(Error::Shape("input length must be positive".into()));
        }
        let n = self.layers.len();
        if n < 2
            || self.layers[n - 1] != LayerSpec::Softmax
            || self.layers[n - 2] != (LayerSpec::Dense { units: 2 })
        {
            return Err(Error::Shape(
                "network must end with a 2-unit dense layer and softmax".into(),
            ));
        }
        if self
            .layers
            .iter()
            .filter(|l| **l == LayerSpec::Softmax)
            .count()
            != 1
        {
            return Err(Error::Shape("exactly one softmax layer is allowed".into()));
        }
        let last_conv = self
            .layers
            .iter()
            .rposition(|l| matches!(l, LayerSpec::Conv1d { .. }));
        let first_dense = self
            .layers
            .iter()
            .position(|l| matches!(l, LayerSpec::Dense { .. }));
        let flattens: Vec<usize> = self
            .layers
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == LayerSpec::Flatten)
            .map(|(i, _)| i)
            .collect();
        match (last_conv, flattens.as_slice()) {
            (None, []) => {}
            (Some(c), [f]) if *f > c && first_dense.is_some_and(|d| *f < d) => {}
            _ => {
                return Err(Error::Shape(
                    "exactly one flatten layer must sit between the last convolution and the first dense layer".into(),
                ))
            }
        }
        if let Some(d) = first_dense {
            if self.layers[d..]
                .iter()
                .any(|l| matches!(l, LayerSpec::Conv1d { .. }))
            {
                return Err(Error::Shape(
                    "convolutions must precede dense layers".into(),
                ));
            }
        }
        self.shapes().map(|_| ())
    }

    /// Width entering the first dense layer.
    pub fn flatten_width(&self) -> Result<usize> {
        let shapes = self.shapes()?;
        let d = self
            .layers
            .iter()
            .position(|l| matches!(l, LayerSpec::Dense { .. }))
            .expect("validated spec has a dense layer");
        Ok(self.input_shape(&shapes, d).size())
    }

    /// Indices of layers that carry weights.
    pub fn param_layers(&self) -> Vec<usize> {
        (0..self.layers.len())
            .filter(|&i| self.layers[i].has_params())
            .collect()
    }

    pub fn has_relu(&self) -> bool {
        self.layers.contains(&LayerSpec::Relu)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Token {
    Conv(usize),
    Dense(usize),
    Out,
}

pub fn parse_spec(text: &str, input_len: usize) -> Result<NetworkSpec> {
    parse_spec_with(text, input_len, SpecOptions::default())
}

pub fn parse_spec_with(text: &str, input_len: usize, opts: SpecOptions) -> Result<NetworkSpec> {
    let tokens = tokenize(text)?;
    let mut layers = Vec::new();
    let mut convs = 0;
    let mut stage = 0; // 0 conv, 1 dense, 2 output
    for &(pos, tok) in &tokens {
        let err = |message: String| Error::SpecParse {
            position: pos,
            message,
        };
        match tok {
            Token::Conv(c) => {
                if stage > 0 {
                    return Err(err("convolution after a dense or output layer".into()));
                }
                layers.push(LayerSpec::Conv1d {
                    out_channels: c,
                    kernel_width: opts.kernel_width,
                });
                if convs == 0 || opts.relu_every_conv {
                    layers.push(LayerSpec::Relu);
                }
                convs += 1;
            }
            Token::Dense(u) => {
                if stage > 1 {
                    return Err(err("dense layer after the output layer".into()));
                }
                if stage == 0 && convs > 0 {
                    layers.push(LayerSpec::Flatten);
                }
                stage = 1;
                layers.push(LayerSpec::Dense { units: u });
                layers.push(LayerSpec::Relu);
            }
            Token::Out => {
                if stage > 1 {
                    return Err(err("more than one output layer".into()));
                }
                if stage == 0 && convs > 0 {
                    layers.push(LayerSpec::Flatten);
                }
                stage = 2;
                layers.push(LayerSpec::Dense { units: 2 });
                layers.push(LayerSpec::Softmax);
            }
        }
    }
    if stage != 2 {
        return Err(Error::SpecParse {
            position: text.len(),
            message: "spec must end with O2".into(),
        });
    }
    let canonical = tokens
        .iter()
        .map(|(_, t)| match t {
            Token::Conv(c) => format!("C{c}"),
            Token::Dense(u) => format!("F{u}"),
            Token::Out => "O2".into(),
        })
        .collect::<Vec<_>>()
        .join("-");
    let spec = NetworkSpec {
        input_len,
        layers,
        text: canonical,
    };
    spec.shapes()?;
    spec.validate()?;
    Ok(spec)
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>> {
    let mut out = Vec::new();
    let mut offset = 0;
    for piece in text.split('-') {
        let lead = piece.len() - piece.trim_start().len();
        let pos = offset + lead;
        let tok = piece.trim();
        offset += piece.len() + 1;
        let err = |message: String| Error::SpecParse {
            position: pos,
            message,
        };
        if tok.is_empty() {
            return Err(err("empty token".into()));
        }
        let (head, digits) = tok.split_at(1);
        let value: usize = digits
            .parse()
            .map_err(|_| err(format!("'{tok}' is not <letter><integer>")))?;
        if value == 0 {
            return Err(err(format!("'{tok}' has zero width")));
        }
        let t = match head {
            "C" | "c" => Token::Conv(value),
            "F" | "f" => Token::Dense(value),
            "O" | "o" if value == 2 => Token::Out,
            "O" | "o" => {
                return Err(err(format!(
                    "only two-class output is supported, got '{tok}'"
                )))
            }
            _ => return Err(err(format!("unknown layer '{tok}'"))),
        };
        out.push((pos, t));
    }
    Ok(out)
}

/// Re-targets `spec` to a new input length. When the first hidden dense layer
/// was sized to the flatten width (the `C..-F<width>` convention), it follows
/// the new flatten width.
pub fn rederive_for_input(
    spec: &NetworkSpec,
    new_len: usize,
    opts: SpecOptions,
) -> Result<NetworkSpec> {
    if spec.text.is_empty() {
        return Err(Error::Config(
            "cannot re-derive a hand-built spec without a spec string".into(),
        ));
    }
    let old_flat = spec.flatten_width()?;
    let mut tokens = tokenize(&spec.text)?;
    let has_conv = tokens.iter().any(|(_, t)| matches!(t, Token::Conv(_)));
    if has_conv {
        if let Some((_, Token::Dense(u))) = tokens
            .iter_mut()
            .find(|(_, t)| matches!(t, Token::Dense(_)))
        {
            if *u == old_flat {
                let convs = spec
                    .layers
                    .iter()
                    .filter_map(|l| match l {
                        LayerSpec::Conv1d {
                            out_channels,
                            kernel_width,
                        } => Some((*out_channels, *kernel_width)),
                        _ => None,
                    })
                    .collect::<Vec<_>>();
                let shrink: usize = convs.iter().map(|(_, k)| k - 1).sum();
                let channels = convs.last().map(|c| c.0).unwrap_or(1);
                if new_len <= shrink {
                    return Err(Error::Shape(format!(
                        "input length {new_len} is too short for {} convolutions",
                        convs.len()
                    )));
                }
                *u = (new_len - shrink) * channels;
            }
        }
    }
    let text = tokens
        .iter()
        .map(|(_, t)| match t {
            Token::Conv(c) => format!("C{c}"),
            Token::Dense(u) => format!("F{u}"),
            Token::Out => "O2".into(),
        })
        .collect::<Vec<_>>()
        .join("-");
    parse_spec_with(&text, new_len, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn churn_baseline_flatten_width() {
        let s = parse_spec("C25 - C50 - C100 - F2200 - O2", 28).unwrap();
        assert_eq!(s.flatten_width().unwrap(), 2200);
        assert_eq!(s.text, "C25-C50-C100-F2200-O2");
        assert_eq!(
            s.layers,
            vec![
                LayerSpec::Conv1d {
                    out_channels: 25,
                    kernel_width: 3
                },
                LayerSpec::Relu,
                LayerSpec::Conv1d {
                    out_channels: 50,
                    kernel_width: 3
                },
                LayerSpec::Conv1d {
                    out_channels: 100,
                    kernel_width: 3
                },
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 2200 },
                LayerSpec::Relu,
                LayerSpec::Dense { units: 2 },
                LayerSpec::Softmax,
            ]
        );
    }

    #[test]
    fn fraud_spec_flatten_width() {
        let s = parse_spec("C25-C50-C100-C200-F4400-O2", 30).unwrap();
        assert_eq!(s.flatten_width().unwrap(), 4400);
        let s = parse_spec("C25-C50-C100-C200-F1600-F800-O2", 16).unwrap();
        assert_eq!(s.flatten_width().unwrap(), 1600);
    }

    #[test]
    fn output_only_is_logistic_regression() {
        let s = parse_spec("O2", 7).unwrap();
        assert_eq!(
            s.layers,
            vec![LayerSpec::Dense { units: 2 }, LayerSpec::Softmax]
        );
        assert_eq!(s.flatten_width().unwrap(), 7);
    }

    #[test]
    fn relu_after_every_conv_flag() {
        let opts = SpecOptions {
            relu_every_conv: true,
            ..SpecOptions::default()
        };
        let s = parse_spec_with("C4-C4-O2", 10, opts).unwrap();
        assert_eq!(
            s.layers.iter().filter(|l| **l == LayerSpec::Relu).count(),
            2
        );
    }

    #[test]
    fn rejects_shrinking_below_one() {
        assert!(matches!(parse_spec("C4-C4-C4-O2", 6), Err(Error::Shape(_))));
        assert!(parse_spec("C4-C4-O2", 5).is_ok());
    }

    #[test]
    fn malformed_tokens_report_position() {
        match parse_spec("C25-X50-O2", 28) {
            Err(Error::SpecParse { position, .. }) => assert_eq!(position, 4),
            other => panic!("{other:?}"),
        }
        match parse_spec("C25 - Cx - O2", 28) {
            Err(Error::SpecParse { position, .. }) => assert_eq!(position, 6),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_spec("C25-O3", 28),
            Err(Error::SpecParse { .. })
        ));
        assert!(matches!(
            parse_spec("C25-F10", 28),
            Err(Error::SpecParse { .. })
        ));
        assert!(matches!(
            parse_spec("F10-C25-O2", 28),
            Err(Error::SpecParse { .. })
        ));
        assert!(matches!(
            parse_spec("C25--O2", 28),
            Err(Error::SpecParse { .. })
        ));
        assert!(matches!(
            parse_spec("O2-O2", 28),
            Err(Error::SpecParse { .. })
        ));
    }

    #[test]
    fn rederive_tracks_flatten_width() {
        let s = parse_spec("C25-C50-C100-F2200-O2", 28).unwrap();
        let r = rederive_for_input(&s, 16, SpecOptions::default()).unwrap();
        assert_eq!(r.text, "C25-C50-C100-F1000-O2");
        assert_eq!(r.flatten_width().unwrap(), 1000);
        // hidden widths that are not the flatten width stay put
        let s = parse_spec("C25-C50-C100-F200-O2", 28).unwrap();
        let r = rederive_for_input(&s, 16, SpecOptions::default()).unwrap();
        assert_eq!(r.text, "C25-C50-C100-F200-O2");
        let same = rederive_for_input(&s, 28, SpecOptions::default()).unwrap();
        assert_eq!(same, s);
    }

    #[test]
    fn hand_built_specs_are_validated() {
        let ok = NetworkSpec::from_layers(
            5,
            vec![
                LayerSpec::Conv1d {
                    out_channels: 2,
                    kernel_width: 3,
                },
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 2 },
                LayerSpec::Softmax,
            ],
        );
        assert!(ok.is_ok());
        let missing_flatten = NetworkSpec::from_layers(
            5,
            vec![
                LayerSpec::Conv1d {
                    out_channels: 2,
                    kernel_width: 3,
                },
                LayerSpec::Dense { units: 2 },
                LayerSpec::Softmax,
            ],
        );
        assert!(missing_flatten.is_err());
    }
}
