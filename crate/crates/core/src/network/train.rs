//! Mini-batch SGD with momentum on softmax cross-entropy.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::loss_and_gradient;
use super::params::{init_params, InitScheme, LayerParams, Parameters};
use super::spec::NetworkSpec;
use crate::data::EncodedMatrix;
use crate::error::{Error, Result};

pub const HISTORY_EVERY: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_iterations: usize,
    pub momentum: f64,
    pub seed: u64,
    pub init: InitScheme,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-5,
            batch_size: 300,
            max_iterations: 15_000,
            momentum: 0.9,
            seed: 0,
            init: InitScheme::FanInUniform,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        Ok(())
    }
}

/// Loss and accuracy of the mini-batch used at `iteration` (1-based), before its update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryPoint {
    pub iteration: usize,
    pub loss: f64,
    pub batch_accuracy: f64,
}

/// Endless stream of row indices: a fresh seeded shuffle per pass over the data.
struct BatchStream {
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
}

impl BatchStream {
    fn new(n: usize, seed: u64) -> Self {
        let mut s = Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            order: (0..n).collect(),
            cursor: 0,
        };
        s.order.shuffle(&mut s.rng);
        s
    }

    fn next_batch(&mut self, size: usize) -> Vec<usize> {
        let mut batch = Vec::with_capacity(size);
        while batch.len() < size {
            if self.cursor == self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.cursor = 0;
            }
            let take = (size - batch.len()).min(self.order.len() - self.cursor);
            batch.extend_from_slice(&self.order[self.cursor..self.cursor + take]);
            self.cursor += take;
        }
        batch
    }
}

/// Trains a fresh network on all rows of `data`.
pub fn train(
    data: &EncodedMatrix,
    spec: &NetworkSpec,
    cfg: &TrainConfig,
) -> Result<(Parameters, Vec<HistoryPoint>)> {
    cfg.validate()?;
    let params = init_params(spec, cfg.seed, cfg.init);
    train_from(params, data, cfg)
}

/// Continues training from existing parameters.
pub fn train_from(
    mut params: Parameters,
    data: &EncodedMatrix,
    cfg: &TrainConfig,
) -> Result<(Parameters, Vec<HistoryPoint>)> {
    cfg.validate()?;
    if data.n_features() != params.spec.input_len {
        return Err(Error::Shape(format!(
            "training rows have {} features, network expects {}",
            data.n_features(),
            params.spec.input_len
        )));
    }
    let counts = data.class_counts();
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::Config(format!(
            "training needs rows of both classes, got {} negative and {} positive",
            counts[0], counts[1]
        )));
    }
    // Shuffle stream is decoupled from the init stream.
    let mut stream = BatchStream::new(data.n_rows(), cfg.seed ^ 0x5EED_BA7C);
    let mut velocity: Vec<LayerParams> =
        params.layers.iter().map(LayerParams::zeros_like).collect();
    let mut history = Vec::new();
    let mut xb = Array2::<f64>::zeros((cfg.batch_size, data.n_features()));
    let mut yb = vec![0u8; cfg.batch_size];
    for iteration in 1..=cfg.max_iterations {
        let batch = stream.next_batch(cfg.batch_size);
        for (r, &i) in batch.iter().enumerate() {
            xb.row_mut(r).assign(&data.values.row(i));
            yb[r] = data.labels[i];
        }
        let (loss, grads, correct) = loss_and_gradient(&params, xb.view(), &yb)?;
        if !loss.is_finite() {
            return Err(Error::Diverged {
                iteration,
                loss,
                batch,
            });
        }
        if iteration == 1 || iteration % HISTORY_EVERY == 0 || iteration == cfg.max_iterations {
            history.push(HistoryPoint {
                iteration,
                loss,
                batch_accuracy: correct as f64 / cfg.batch_size as f64,
            });
        }
        for ((p, v), g) in params
            .layers
            .iter_mut()
            .zip(velocity.iter_mut())
            .zip(&grads)
        {
            step(&mut p.weight, &mut v.weight, &g.weight, cfg);
            step(&mut p.bias, &mut v.bias, &g.bias, cfg);
        }
        if !params.is_finite() {
            return Err(Error::Diverged {
                iteration,
                loss: f64::NAN,
                batch,
            });
        }
    }
    log::debug!(
        "trained {} iterations, final batch loss {:?}",
        cfg.max_iterations,
        history.last()
    );
    Ok((params, history))
}

fn step<D: ndarray::Dimension>(
    p: &mut ndarray::Array<f64, D>,
    v: &mut ndarray::Array<f64, D>,
    g: &ndarray::Array<f64, D>,
    cfg: &TrainConfig,
) {
    ndarray::Zip::from(p).and(v).and(g).for_each(|p, v, &g| {
        *v = cfg.momentum * *v - cfg.learning_rate * g;
        *p += *v;
    });
}

/// Mean cross-entropy and accuracy over every row of `data`, in chunks.
pub fn evaluate_loss(params: &Parameters, data: &EncodedMatrix) -> Result<(f64, f64)> {
    let mut total = 0.0;
    let mut correct = 0;
    let n = data.n_rows();
    for start in (0..n).step_by(1024) {
        let end = (start + 1024).min(n);
        let x = data.values.slice_axis(Axis(0), (start..end).into());
        let (loss, _, c) = loss_and_gradient(params, x, &data.labels[start..end])?;
        total += loss * (end - start) as f64;
        correct += c;
    }
    Ok((total / n as f64, correct as f64 / n as f64))
}

/// History as CSV: `iteration,loss,batch_accuracy`.
pub fn write_history<W: std::io::Write>(history: &[HistoryPoint], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for h in history {
        wr.serialize(h)?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::model::predict_batch;
    use crate::network::spec::parse_spec;
    use rand_distr::{Distribution, Normal};

    /// Two Gaussian blobs in 2-D, separated by a wide margin.
    fn blobs(n: usize, seed: u64) -> EncodedMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let mut values = Array2::zeros((n, 2));
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let y = (i % 2) as u8;
            let c = if y == 1 { [0.75, 0.7] } else { [0.25, 0.3] };
            values[[i, 0]] = c[0] + noise.sample(&mut rng);
            values[[i, 1]] = c[1] + noise.sample(&mut rng);
            labels.push(y);
        }
        EncodedMatrix::new(vec!["a".into(), "b".into()], values, labels).unwrap()
    }

    fn blob_config() -> TrainConfig {
        TrainConfig {
            learning_rate: 0.5,
            batch_size: 32,
            max_iterations: 2000,
            seed: 3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn separates_blobs_with_logistic_head() {
        let data = blobs(200, 1);
        let spec = parse_spec("O2", 2).unwrap();
        let init = init_params(&spec, 3, InitScheme::FanInUniform);
        let (initial_loss, _) = evaluate_loss(&init, &data).unwrap();
        let (params, history) = train(&data, &spec, &blob_config()).unwrap();
        let (final_loss, acc) = evaluate_loss(&params, &data).unwrap();
        assert_eq!(acc, 1.0);
        assert!(final_loss < initial_loss);
        let preds = predict_batch(&params, data.values.view()).unwrap();
        assert!(preds.iter().zip(&data.labels).all(|(p, &y)| p.class == y));
        assert_eq!(history.first().unwrap().iteration, 1);
        assert_eq!(history.last().unwrap().iteration, 2000);
        assert_eq!(history.len(), 21);
    }

    #[test]
    fn training_is_deterministic() {
        let data = blobs(60, 2);
        let spec = parse_spec("C3-F4-O2", 2).unwrap_err();
        assert!(matches!(spec, Error::Shape(_)));
        let spec = parse_spec("F4-O2", 2).unwrap();
        let cfg = TrainConfig {
            max_iterations: 50,
            ..blob_config()
        };
        let a = train(&data, &spec, &cfg).unwrap();
        let b = train(&data, &spec, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_config() {
        let data = blobs(20, 2);
        let spec = parse_spec("O2", 2).unwrap();
        for cfg in [
            TrainConfig {
                max_iterations: 0,
                ..blob_config()
            },
            TrainConfig {
                batch_size: 0,
                ..blob_config()
            },
            TrainConfig {
                learning_rate: 0.0,
                ..blob_config()
            },
        ] {
            assert!(matches!(train(&data, &spec, &cfg), Err(Error::Config(_))));
        }
        let one_class = data.select_rows(&[0, 2, 4]);
        assert!(matches!(
            train(&one_class, &spec, &blob_config()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn divergence_is_reported() {
        let data = blobs(40, 5);
        let spec = parse_spec("F16-F16-O2", 2).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e200,
            batch_size: 8,
            max_iterations: 100,
            ..TrainConfig::default()
        };
        match train(&data, &spec, &cfg) {
            Err(Error::Diverged {
                iteration, batch, ..
            }) => {
                assert!(iteration >= 1);
                assert_eq!(batch.len(), 8);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn batches_wrap_and_cover_every_row() {
        let mut s = BatchStream::new(7, 9);
        let first: Vec<usize> = s.next_batch(5);
        let second = s.next_batch(5);
        let mut seen: Vec<usize> = first.iter().chain(&second[..2]).copied().collect();
        seen.sort();
        assert_eq!(seen, (0..7).collect::<Vec<_>>());
        assert_eq!(s.next_batch(20).len(), 20);
    }
}
