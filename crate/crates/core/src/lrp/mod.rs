//! Layer-wise relevance propagation through a recorded forward pass.
//!
//! Relevance starts at the target-class logit (softmax is bypassed) and is
//! redistributed layer by layer in proportion to each input's contribution
//! `x_i * w_ij` to the pre-activation `z_j`. Biases keep their own share.

mod heatmap;

pub use heatmap::{aggregate_global, normalize_heatmap, HeatmapMatrix};

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::model::{apply_layer, col2im, im2col, param_index};
use crate::network::{ActShape, ForwardTrace, LayerSpec, Parameters};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum LrpRule {
    /// Plain proportional redistribution; fails on a zero pre-activation.
    Z,
    /// Adds `epsilon * sign(z)` to every denominator, with sign(0) = +1.
    Epsilon { epsilon: f64 },
    /// Positive and negative contributions are redistributed separately.
    AlphaBeta { alpha: f64, beta: f64 },
}

impl Default for LrpRule {
    fn default() -> Self {
        Self::Epsilon { epsilon: 1e-6 }
    }
}

impl LrpRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Z => Ok(()),
            Self::Epsilon { epsilon } if epsilon >= 0.0 && epsilon.is_finite() => Ok(()),
            Self::Epsilon { epsilon } => Err(Error::Config(format!("epsilon must be >= 0, got {epsilon}"))),
            Self::AlphaBeta { alpha, beta } if beta >= 0.0 && ((alpha - beta) - 1.0).abs() < 1e-12 => Ok(()),
            Self::AlphaBeta { alpha, beta } => Err(Error::Config(format!(
                "alpha-beta rule needs alpha - beta = 1 and beta >= 0, got alpha {alpha}, beta {beta}"
            ))),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Self::Z => "z".into(),
            Self::Epsilon { epsilon } => format!("epsilon({epsilon})"),
            Self::AlphaBeta { alpha, beta } => format!("alphabeta({alpha},{beta})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrpTarget {
    /// The argmax class of the trace (ties go to class 0).
    #[default]
    Predicted,
    Class(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LrpConfig {
    pub rule: LrpRule,
    pub target: LrpTarget,
}

/// Signed per-feature relevance for one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceVector {
    pub values: Vec<f64>,
    pub target_class: u8,
    /// Pre-softmax logit of the target class: the total relevance injected.
    pub logit: f64,
    pub rule: LrpRule,
    /// Sum of relevance entering each layer, input layer first.
    pub layer_totals: Vec<f64>,
}

impl RelevanceVector {
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Linear part (no bias) of a conv or dense layer, applied to a single record.
struct Linear<'a> {
    weight: &'a Array2<f64>,
    conv: Option<(ActShape, usize)>,
}

impl Linear<'_> {
    fn forward(&self, x: &[f64], w: &Array2<f64>) -> Vec<f64> {
        let xv = ArrayView2::from_shape((1, x.len()), x).expect("row view");
        match self.conv {
            Some((input, k)) => im2col(&xv, input, k).dot(w).iter().copied().collect(),
            None => xv.dot(w).iter().copied().collect(),
        }
    }

    /// Transposed map: sums `w_ij * s_j` over outputs for every input `i`.
    fn backward(&self, s: &[f64], w: &Array2<f64>) -> Vec<f64> {
        let out = w.ncols();
        let sv = ArrayView2::from_shape((s.len() / out, out), s).expect("relevance shape");
        let back = sv.dot(&w.t());
        match self.conv {
            Some((input, k)) => col2im(&back, 1, input, k).iter().copied().collect(),
            None => back.iter().copied().collect(),
        }
    }
}

fn check_trace(params: &Parameters, trace: &ForwardTrace) -> Result<Vec<ActShape>> {
    let spec = &params.spec;
    let shapes = spec.shapes()?;
    if trace.layers.len() != spec.layers.len() {
        return Err(Error::Relevance(format!(
            "trace has {} layers, network has {}",
            trace.layers.len(),
            spec.layers.len()
        )));
    }
    for (i, lt) in trace.layers.iter().enumerate() {
        if lt.input.len() != spec.input_shape(&shapes, i).size()
            || lt.output.len() != shapes[i].size()
        {
            return Err(Error::Relevance(format!(
                "trace layer {i} does not match the network shapes"
            )));
        }
    }
    // The output layer must reproduce its stored logits from its stored input.
    let pidx = param_index(params);
    let last = spec.layers.len() - 2;
    let lt = &trace.layers[last];
    let x = ArrayView2::from_shape((1, lt.input.len()), &lt.input).expect("row view");
    let z = apply_layer(params, last, pidx[last], spec.input_shape(&shapes, last), x);
    if z.iter().zip(&lt.output).any(|(a, b)| a != b) {
        return Err(Error::Relevance(
            "trace was not produced by these parameters".into(),
        ));
    }
    Ok(shapes)
}

/// Redistributes the target logit over the input features.
pub fn propagate_relevance(
    params: &Parameters,
    trace: &ForwardTrace,
    cfg: &LrpConfig,
) -> Result<RelevanceVector> {
    cfg.rule.validate()?;
    let shapes = check_trace(params, trace)?;
    let spec = &params.spec;
    let pidx = param_index(params);
    let n = spec.layers.len();
    let target = match cfg.target {
        LrpTarget::Predicted => u8::from(trace.probabilities[1] > trace.probabilities[0]),
        LrpTarget::Class(c) if c < 2 => c,
        LrpTarget::Class(c) => return Err(Error::Relevance(format!("class {c} is not 0 or 1"))),
    };
    let logits = &trace.layers[n - 1].input;
    let logit = logits[target as usize];
    let mut r = vec![0.0; 2];
    r[target as usize] = logit;
    let mut totals = vec![logit];
    for i in (0..n - 1).rev() {
        let lt = &trace.layers[i];
        r = match spec.layers[i] {
            LayerSpec::Relu => r
                .iter()
                .zip(&lt.output)
                .map(|(&rv, &a)| if a > 0.0 { rv } else { 0.0 })
                .collect(),
            LayerSpec::Flatten => r,
            LayerSpec::Softmax => unreachable!("softmax is last"),
            LayerSpec::Conv1d { kernel_width, .. } => {
                let p = &params.layers[pidx[i].expect("conv params")];
                let lin = Linear {
                    weight: &p.weight,
                    conv: Some((spec.input_shape(&shapes, i), kernel_width)),
                };
                redistribute(&lin, &p.bias, &lt.input, &lt.output, &r, cfg.rule, i)?
            }
            LayerSpec::Dense { .. } => {
                let p = &params.layers[pidx[i].expect("dense params")];
                let lin = Linear {
                    weight: &p.weight,
                    conv: None,
                };
                redistribute(&lin, &p.bias, &lt.input, &lt.output, &r, cfg.rule, i)?
            }
        };
        totals.push(r.iter().sum());
    }
    totals.reverse();
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::Relevance("relevance became non-finite".into()));
    }
    Ok(RelevanceVector {
        values: r,
        target_class: target,
        logit,
        rule: cfg.rule,
        layer_totals: totals,
    })
}

fn redistribute(
    lin: &Linear<'_>,
    bias: &ndarray::Array1<f64>,
    x: &[f64],
    z: &[f64],
    r_out: &[f64],
    rule: LrpRule,
    layer: usize,
) -> Result<Vec<f64>> {
    let channels = bias.len();
    match rule {
        LrpRule::Z | LrpRule::Epsilon { .. } => {
            let mut s = Vec::with_capacity(z.len());
            for (j, (&zj, &rj)) in z.iter().zip(r_out).enumerate() {
                let denom = match rule {
                    LrpRule::Epsilon { epsilon } => zj + if zj >= 0.0 { epsilon } else { -epsilon },
                    _ => zj,
                };
                if denom == 0.0 {
                    if rj != 0.0 {
                        return Err(Error::Relevance(format!(
                            "layer {layer}, unit {j}: zero pre-activation carries relevance {rj}; use the epsilon rule"
                        )));
                    }
                    s.push(0.0);
                } else {
                    s.push(rj / denom);
                }
            }
            let c = lin.backward(&s, lin.weight);
            Ok(x.iter().zip(&c).map(|(a, b)| a * b).collect())
        }
        LrpRule::AlphaBeta { alpha, beta } => {
            let wp = lin.weight.mapv(|v| v.max(0.0));
            let wn = lin.weight.mapv(|v| v.min(0.0));
            let xp: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
            let xn: Vec<f64> = x.iter().map(|v| v.min(0.0)).collect();
            let add = |a: Vec<f64>, b: Vec<f64>| {
                a.iter().zip(&b).map(|(p, q)| p + q).collect::<Vec<f64>>()
            };
            // Positive contributions come from x+ w+ and x- w-, negative ones from x+ w- and x- w+.
            let zp = add(lin.forward(&xp, &wp), lin.forward(&xn, &wn));
            let zn = add(lin.forward(&xp, &wn), lin.forward(&xn, &wp));
            let mut sp = Vec::with_capacity(zp.len());
            let mut sn = Vec::with_capacity(zn.len());
            for j in 0..zp.len() {
                let b = bias[j % channels];
                let dp = zp[j] + b.max(0.0);
                let dn = zn[j] + b.min(0.0);
                sp.push(if dp > 0.0 { alpha * r_out[j] / dp } else { 0.0 });
                sn.push(if dn < 0.0 { beta * r_out[j] / dn } else { 0.0 });
            }
            let pos = |s: &[f64], w_for_xp: &Array2<f64>, w_for_xn: &Array2<f64>| {
                let cp = lin.backward(s, w_for_xp);
                let cn = lin.backward(s, w_for_xn);
                (0..x.len())
                    .map(|i| xp[i] * cp[i] + xn[i] * cn[i])
                    .collect::<Vec<f64>>()
            };
            let rp = pos(&sp, &wp, &wn);
            let rn = pos(&sn, &wn, &wp);
            Ok(rp.iter().zip(&rn).map(|(a, b)| a - b).collect())
        }
    }
}

/// Writes relevance vectors as CSV with a `record` column and feature names as header.
pub fn write_relevance_csv<W: std::io::Write>(
    feature_names: &[String],
    records: &[(usize, &RelevanceVector)],
    w: W,
) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["record".to_string(), "target_class".into(), "logit".into()];
    header.extend(feature_names.iter().cloned());
    wr.write_record(&header)?;
    for (id, rv) in records {
        let mut row = vec![
            id.to_string(),
            rv.target_class.to_string(),
            rv.logit.to_string(),
        ];
        row.extend(rv.values.iter().map(|v| v.to_string()));
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}
