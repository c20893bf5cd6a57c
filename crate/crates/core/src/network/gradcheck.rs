//! Central finite-difference check of the analytic gradient.

use ndarray::ArrayView2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::{batch_loss, loss_and_gradient};
use super::params::Parameters;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub coordinates: usize,
    /// (parameter layer, flat index within weight then bias, analytic, numeric)
    pub worst: (usize, usize, f64, f64),
}

pub fn relative_error(g: f64, g_hat: f64) -> f64 {
    (g - g_hat).abs() / g.abs().max(g_hat.abs()).max(1e-8)
}

/// Samples `n_coords` parameter coordinates (at least one per parameterized
/// layer, spread round-robin) and compares analytic and numeric derivatives.
pub fn grad_check(
    params: &Parameters,
    x: ArrayView2<f64>,
    labels: &[u8],
    h: f64,
    n_coords: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    if !(1e-7..=1e-3).contains(&h) {
        return Err(Error::Config(format!(
            "finite-difference step {h} outside [1e-7, 1e-3]"
        )));
    }
    let (_, grads, _) = loss_and_gradient(params, x, labels)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        coordinates: 0,
        worst: (0, 0, 0.0, 0.0),
    };
    let n_layers = params.layers.len();
    for c in 0..n_coords.max(n_layers) {
        let layer = c % n_layers;
        let size = params.layers[layer].len();
        let idx = rng.random_range(0..size);
        let wlen = params.layers[layer].weight.len();
        let analytic = if idx < wlen {
            grads[layer].weight.as_slice().expect("standard layout")[idx]
        } else {
            grads[layer].bias[idx - wlen]
        };
        let original = coord(&mut probe, layer, idx, None);
        coord(&mut probe, layer, idx, Some(original + h));
        let up = batch_loss(&probe, x, labels)?;
        coord(&mut probe, layer, idx, Some(original - h));
        let down = batch_loss(&probe, x, labels)?;
        coord(&mut probe, layer, idx, Some(original));
        let numeric = (up - down) / (2.0 * h);
        let err = relative_error(analytic, numeric);
        if err > report.max_relative_error {
            report.max_relative_error = err;
            report.worst = (layer, idx, analytic, numeric);
        }
        report.coordinates += 1;
    }
    Ok(report)
}

fn coord(p: &mut Parameters, layer: usize, idx: usize, set: Option<f64>) -> f64 {
    let l = &mut p.layers[layer];
    let wlen = l.weight.len();
    let slot = if idx < wlen {
        &mut l.weight.as_slice_mut().expect("standard layout")[idx]
    } else {
        &mut l.bias[idx - wlen]
    };
    let old = *slot;
    if let Some(v) = set {
        *slot = v;
    }
    old
}
