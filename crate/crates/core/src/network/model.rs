//! Forward and backward passes over row-major batches.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::params::{LayerParams, Parameters};
use super::spec::{ActShape, LayerSpec};
use crate::error::{Error, Result};

/// Input and output of one layer for a single record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerTrace {
    pub input: Vec<f64>,
    pub output: Vec<f64>,
}

/// Per-layer activations of one forward pass, kept for relevance propagation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardTrace {
    pub layers: Vec<LayerTrace>,
    pub logits: [f64; 2],
    pub probabilities: [f64; 2],
}

impl ForwardTrace {
    /// Re-runs the stored record through `params` and returns the probabilities.
    pub fn replay(&self, params: &Parameters) -> Result<[f64; 2]> {
        let first = self
            .layers
            .first()
            .ok_or_else(|| Error::Shape("empty trace".into()))?;
        Ok(forward(params, &first.input)?.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: u8,
    /// Probability of class 1.
    pub probability: f64,
}

pub(crate) fn im2col(x: &ArrayView2<f64>, input: ActShape, kernel: usize) -> Array2<f64> {
    let x = x.as_standard_layout();
    let lout = input.len - kernel + 1;
    let width = kernel * input.channels;
    let mut buf = Vec::with_capacity(x.nrows() * lout * width);
    for row in x.rows() {
        let r = row.to_slice().expect("standard layout");
        for p in 0..lout {
            let start = p * input.channels;
            buf.extend_from_slice(&r[start..start + width]);
        }
    }
    Array2::from_shape_vec((x.nrows() * lout, width), buf).expect("im2col shape")
}

pub(crate) fn col2im(
    cols: &Array2<f64>,
    batch: usize,
    input: ActShape,
    kernel: usize,
) -> Array2<f64> {
    let lout = input.len - kernel + 1;
    let width = kernel * input.channels;
    let mut out = Array2::<f64>::zeros((batch, input.size()));
    let cols = cols.as_standard_layout();
    let src = cols.as_slice().expect("standard layout");
    for b in 0..batch {
        let mut row = out.row_mut(b);
        let dst = row.as_slice_mut().expect("standard layout");
        for p in 0..lout {
            let s = &src[(b * lout + p) * width..(b * lout + p + 1) * width];
            let start = p * input.channels;
            for (d, v) in dst[start..start + width].iter_mut().zip(s) {
                *d += v;
            }
        }
    }
    out
}

fn add_bias(mut y: Array2<f64>, bias: &Array1<f64>) -> Array2<f64> {
    y += &bias.view().insert_axis(Axis(0));
    y
}

/// Applies layer `i` to a batch. `Softmax` returns probabilities.
pub(crate) fn apply_layer(
    params: &Parameters,
    i: usize,
    pidx: Option<usize>,
    input: ActShape,
    x: ArrayView2<f64>,
) -> Array2<f64> {
    match params.spec.layers[i] {
        LayerSpec::Conv1d {
            out_channels,
            kernel_width,
        } => {
            let p = &params.layers[pidx.expect("conv has params")];
            let cols = im2col(&x, input, kernel_width);
            let y = add_bias(cols.dot(&p.weight), &p.bias);
            let lout = input.len - kernel_width + 1;
            y.as_standard_layout()
                .into_owned()
                .into_shape_with_order((x.nrows(), lout * out_channels))
                .expect("conv output reshape")
        }
        LayerSpec::Dense { .. } => {
            let p = &params.layers[pidx.expect("dense has params")];
            add_bias(x.dot(&p.weight), &p.bias)
        }
        LayerSpec::Relu => x.mapv(|v| v.max(0.0)),
        LayerSpec::Flatten => x.to_owned(),
        LayerSpec::Softmax => {
            let mut out = x.to_owned();
            for mut row in out.rows_mut() {
                let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
                row.mapv_inplace(|v| (v - lse).exp());
            }
            out
        }
    }
}

/// Parameter index of every layer (None for parameter-free layers).
pub(crate) fn param_index(params: &Parameters) -> Vec<Option<usize>> {
    let mut k = 0;
    params
        .spec
        .layers
        .iter()
        .map(|l| {
            if l.has_params() {
                k += 1;
                Some(k - 1)
            } else {
                None
            }
        })
        .collect()
}

fn check_batch(params: &Parameters, x: &ArrayView2<f64>) -> Result<()> {
    if x.ncols() != params.spec.input_len {
        return Err(Error::Shape(format!(
            "rows have {} features, network expects {}",
            x.ncols(),
            params.spec.input_len
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("input contains non-finite values".into()));
    }
    Ok(())
}

/// Activations entering every layer plus the final logits:
/// `acts[i]` is the input of layer `i`; the last entry is the logits.
pub(crate) fn forward_cached(params: &Parameters, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
    let shapes = params.spec.shapes().expect("validated spec");
    let pidx = param_index(params);
    let n = params.spec.layers.len();
    let mut acts = Vec::with_capacity(n);
    acts.push(x.to_owned());
    for i in 0..n - 1 {
        let input = params.spec.input_shape(&shapes, i);
        let y = apply_layer(params, i, pidx[i], input, acts[i].view());
        acts.push(y);
    }
    acts
}

/// Pre-softmax logits for a batch.
pub fn logits_batch(params: &Parameters, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    check_batch(params, &x)?;
    Ok(forward_cached(params, x)
        .pop()
        .expect("at least one activation"))
}

/// Class probabilities for a batch.
pub fn forward_batch(params: &Parameters, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    let logits = logits_batch(params, x)?;
    let n = params.spec.layers.len();
    Ok(apply_layer(
        params,
        n - 1,
        None,
        ActShape {
            len: 1,
            channels: 2,
        },
        logits.view(),
    ))
}

/// Single-record forward pass with the full per-layer trace.
pub fn forward(params: &Parameters, record: &[f64]) -> Result<([f64; 2], ForwardTrace)> {
    let x = ArrayView2::from_shape((1, record.len()), record).expect("row view");
    check_batch(params, &x)?;
    let shapes = params.spec.shapes()?;
    let pidx = param_index(params);
    let mut layers = Vec::with_capacity(params.spec.layers.len());
    let mut current = x.to_owned();
    let mut logits = [0.0; 2];
    for i in 0..params.spec.layers.len() {
        let input = params.spec.input_shape(&shapes, i);
        if params.spec.layers[i] == LayerSpec::Softmax {
            logits = [current[[0, 0]], current[[0, 1]]];
        }
        let y = apply_layer(params, i, pidx[i], input, current.view());
        layers.push(LayerTrace {
            input: current.iter().copied().collect(),
            output: y.iter().copied().collect(),
        });
        current = y;
    }
    let probabilities = [current[[0, 0]], current[[0, 1]]];
    Ok((
        probabilities,
        ForwardTrace {
            layers,
            logits,
            probabilities,
        },
    ))
}

/// Argmax class per row; an exact tie goes to class 0.
pub fn predict_batch(params: &Parameters, x: ArrayView2<f64>) -> Result<Vec<Prediction>> {
    let probs = forward_batch(params, x)?;
    Ok(probs
        .rows()
        .into_iter()
        .map(|r| Prediction {
            class: u8::from(r[1] > r[0]),
            probability: r[1],
        })
        .collect())
}

fn cross_entropy(logits: &Array2<f64>, labels: &[u8]) -> (f64, Array2<f64>, usize) {
    let b = logits.nrows();
    let mut grad = Array2::<f64>::zeros((b, 2));
    let mut loss = 0.0;
    let mut correct = 0;
    for (r, row) in logits.rows().into_iter().enumerate() {
        let m = row[0].max(row[1]);
        let lse = m + ((row[0] - m).exp() + (row[1] - m).exp()).ln();
        let y = labels[r] as usize;
        loss += lse - row[y];
        for c in 0..2 {
            let p = (row[c] - lse).exp();
            grad[[r, c]] = (p - if c == y { 1.0 } else { 0.0 }) / b as f64;
        }
        if u8::from(row[1] > row[0]) == labels[r] {
            correct += 1;
        }
    }
    (loss / b as f64, grad, correct)
}

/// Mean softmax cross-entropy over a batch.
pub fn batch_loss(params: &Parameters, x: ArrayView2<f64>, labels: &[u8]) -> Result<f64> {
    let logits = logits_batch(params, x)?;
    Ok(cross_entropy(&logits, labels).0)
}

/// Loss, parameter gradients and number of correctly classified rows.
pub fn loss_and_gradient(
    params: &Parameters,
    x: ArrayView2<f64>,
    labels: &[u8],
) -> Result<(f64, Vec<LayerParams>, usize)> {
    check_batch(params, &x)?;
    if labels.len() != x.nrows() {
        return Err(Error::Shape(format!(
            "{} rows but {} labels",
            x.nrows(),
            labels.len()
        )));
    }
    let acts = forward_cached(params, x);
    let (loss, dlogits, correct) = cross_entropy(acts.last().expect("logits"), labels);
    let grads = backward(params, &acts, dlogits);
    Ok((loss, grads, correct))
}

fn backward(params: &Parameters, acts: &[Array2<f64>], dlogits: Array2<f64>) -> Vec<LayerParams> {
    let shapes = params.spec.shapes().expect("validated spec");
    let pidx = param_index(params);
    let first_param = pidx.iter().position(Option::is_some).expect("has params");
    let mut grads: Vec<LayerParams> = params.layers.iter().map(LayerParams::zeros_like).collect();
    let batch = acts[0].nrows();
    let n = params.spec.layers.len();
    let mut g = dlogits;
    // Softmax is folded into the loss gradient.
    for i in (0..n - 1).rev() {
        let x = &acts[i];
        let input = params.spec.input_shape(&shapes, i);
        let need_input_grad = i > first_param;
        g = match params.spec.layers[i] {
            LayerSpec::Dense { .. } => {
                let k = pidx[i].expect("dense params");
                grads[k].weight = x.t().dot(&g);
                grads[k].bias = g.sum_axis(Axis(0));
                if need_input_grad {
                    g.dot(&params.layers[k].weight.t())
                } else {
                    break;
                }
            }
            LayerSpec::Conv1d {
                out_channels,
                kernel_width,
            } => {
                let k = pidx[i].expect("conv params");
                let lout = input.len - kernel_width + 1;
                let g2 = g
                    .as_standard_layout()
                    .into_owned()
                    .into_shape_with_order((batch * lout, out_channels))
                    .expect("conv grad reshape");
                let cols = im2col(&x.view(), input, kernel_width);
                grads[k].weight = cols.t().dot(&g2);
                grads[k].bias = g2.sum_axis(Axis(0));
                if need_input_grad {
                    let dcols = g2.dot(&params.layers[k].weight.t());
                    col2im(&dcols, batch, input, kernel_width)
                } else {
                    break;
                }
            }
            LayerSpec::Relu => {
                let mut g = g;
                g.zip_mut_with(x, |gv, &xv| {
                    if xv <= 0.0 {
                        *gv = 0.0;
                    }
                });
                g
            }
            LayerSpec::Flatten => g,
            LayerSpec::Softmax => unreachable!("softmax is last"),
        };
    }
    grads
}
