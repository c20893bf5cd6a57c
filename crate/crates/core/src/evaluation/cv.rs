use ndarray::Axis;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::{compute_metrics, MetricsReport};
use crate::data::{smote, EncodedMatrix, ResampleConfig, SplitPlan};
use crate::error::{Error, Result};
use crate::network::{predict_batch, train, HistoryPoint, NetworkSpec, Parameters, TrainConfig};
use crate::surrogate::derive_seed;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvProtocol {
    /// Every fold model is scored on the same held-out test split.
    #[default]
    FixedTest,
    /// Each fold model is scored on its own held-out fold.
    HeldOutFold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub protocol: CvProtocol,
    /// Oversampling applied to each fold's training rows; `None` disables it.
    pub smote: Option<ResampleConfig>,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            protocol: CvProtocol::FixedTest,
            smote: Some(ResampleConfig::default()),
        }
    }
}

impl CvConfig {
    fn protocol_label(&self, k: usize) -> String {
        match self.protocol {
            CvProtocol::FixedTest => format!("{k}-fold models, fixed test split"),
            CvProtocol::HeldOutFold => format!("{k}-fold, held-out fold"),
        }
    }
}

/// SHA-256 over the row indices, values and labels of `rows`.
pub fn rows_hash(data: &EncodedMatrix, rows: &[usize]) -> String {
    let mut h = Sha256::new();
    for &r in rows {
        h.update((r as u64).to_le_bytes());
        for v in data.values.row(r) {
            h.update(v.to_le_bytes());
        }
        h.update([data.labels[r]]);
    }
    hex::encode(h.finalize())
}

/// Selects `rows` and oversamples them when configured.
pub fn training_set(
    data: &EncodedMatrix,
    rows: &[usize],
    resample: Option<ResampleConfig>,
) -> Result<EncodedMatrix> {
    let subset = data.select_rows(rows);
    match resample {
        Some(cfg) => Ok(smote(&subset, &cfg)?.matrix),
        None => Ok(subset),
    }
}

/// Trains on the given rows (oversampled when configured).
pub fn train_on_rows(
    data: &EncodedMatrix,
    rows: &[usize],
    spec: &NetworkSpec,
    cfg: &TrainConfig,
    resample: Option<ResampleConfig>,
) -> Result<(Parameters, Vec<HistoryPoint>)> {
    let set = training_set(data, rows, resample)?;
    train(&set, spec, cfg)
}

/// Predicted classes for `rows`, in chunks.
pub fn predict_rows(params: &Parameters, data: &EncodedMatrix, rows: &[usize]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(rows.len());
    for chunk in rows.chunks(2048) {
        let x = data.values.select(Axis(0), chunk);
        out.extend(
            predict_batch(params, x.view())?
                .into_iter()
                .map(|p| p.class),
        );
    }
    Ok(out)
}

pub struct CvOutcome {
    pub report: MetricsReport,
    pub models: Vec<Parameters>,
    pub histories: Vec<Vec<HistoryPoint>>,
}

/// Trains one model per fold on the other folds' training rows and scores it
/// according to the protocol. Fold `f` uses training and resampling seeds
/// derived from the configured seeds and `f`.
pub fn cross_validate(
    data: &EncodedMatrix,
    spec: &NetworkSpec,
    train_cfg: &TrainConfig,
    plan: &SplitPlan,
    cv: &CvConfig,
    label: &str,
) -> Result<CvOutcome> {
    let mut folds = Vec::with_capacity(plan.k);
    let mut models = Vec::with_capacity(plan.k);
    let mut histories = Vec::with_capacity(plan.k);
    let mut hasher_rows = Vec::new();
    for f in 0..plan.k {
        let wrap = |e: Error| Error::Fold {
            fold: f,
            source: Box::new(e),
        };
        let rows = plan.fold_train(f);
        let cfg = TrainConfig {
            seed: derive_seed(train_cfg.seed, f),
            ..train_cfg.clone()
        };
        let resample = cv.smote.map(|s| ResampleConfig {
            seed: derive_seed(s.seed, f),
            ..s
        });
        let (params, history) = train_on_rows(data, &rows, spec, &cfg, resample).map_err(wrap)?;
        let eval_rows = match cv.protocol {
            CvProtocol::FixedTest => plan.test_indices.clone(),
            CvProtocol::HeldOutFold => plan.fold_holdout(f),
        };
        if eval_rows.is_empty() {
            return Err(wrap(Error::Split("no rows to evaluate on".into())));
        }
        let preds = predict_rows(&params, data, &eval_rows).map_err(wrap)?;
        let labels: Vec<u8> = eval_rows.iter().map(|&r| data.labels[r]).collect();
        folds.push(compute_metrics(&preds, &labels).map_err(wrap)?);
        if cv.protocol == CvProtocol::HeldOutFold || f == 0 {
            hasher_rows.extend(eval_rows);
        }
        models.push(params);
        histories.push(history);
        log::info!("{label}: fold {f} accuracy {:.4}", folds[f].accuracy);
    }
    let hash = rows_hash(data, &hasher_rows);
    Ok(CvOutcome {
        report: MetricsReport::aggregate(label, &cv.protocol_label(plan.k), &hash, folds),
        models,
        histories,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::stratified_split;
    use crate::network::parse_spec;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Imbalanced separable data: label is x0 > 0.5.
    fn separable(n: usize) -> EncodedMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut values = Array2::zeros((n, 3));
        let mut labels = Vec::new();
        for i in 0..n {
            let pos = i % 3 == 0;
            values[[i, 0]] = if pos {
                rng.random_range(0.7..1.0)
            } else {
                rng.random_range(0.0..0.3)
            };
            values[[i, 1]] = rng.random::<f64>();
            values[[i, 2]] = rng.random::<f64>();
            labels.push(u8::from(pos));
        }
        EncodedMatrix::new(vec!["a".into(), "b".into(), "c".into()], values, labels).unwrap()
    }

    fn cfg() -> TrainConfig {
        TrainConfig {
            learning_rate: 0.5,
            batch_size: 16,
            max_iterations: 600,
            seed: 1,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn separable_data_is_perfect_in_every_fold() {
        let data = separable(150);
        let plan = stratified_split(&data.labels, 0.8, 5, 2).unwrap();
        let spec = parse_spec("O2", 3).unwrap();
        let out = cross_validate(&data, &spec, &cfg(), &plan, &CvConfig::default(), "lr").unwrap();
        assert_eq!(out.report.folds.len(), 5);
        assert_eq!(out.report.mean.accuracy, 1.0);
        assert_eq!(out.report.std_dev.accuracy, 0.0);
        assert_eq!(out.report.test_hash, rows_hash(&data, &plan.test_indices));
        let held = CvConfig {
            protocol: CvProtocol::HeldOutFold,
            ..CvConfig::default()
        };
        let out = cross_validate(&data, &spec, &cfg(), &plan, &held, "lr").unwrap();
        let evaluated: usize = out.report.folds.iter().map(|m| m.confusion.total()).sum();
        assert_eq!(evaluated, plan.train_indices.len());
    }

    #[test]
    fn repeated_runs_are_identical() {
        let data = separable(90);
        let plan = stratified_split(&data.labels, 0.8, 5, 3).unwrap();
        let spec = parse_spec("F4-O2", 3).unwrap();
        let c = TrainConfig {
            max_iterations: 50,
            ..cfg()
        };
        let a = cross_validate(&data, &spec, &c, &plan, &CvConfig::default(), "m").unwrap();
        let b = cross_validate(&data, &spec, &c, &plan, &CvConfig::default(), "m").unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.models, b.models);
        assert_ne!(a.models[0], a.models[1]);
    }

    #[test]
    fn fold_errors_carry_the_fold_id() {
        let data = separable(60);
        let plan = stratified_split(&data.labels, 0.8, 5, 3).unwrap();
        let spec = parse_spec("F16-F16-O2", 3).unwrap();
        let bad = TrainConfig {
            learning_rate: 1e200,
            ..cfg()
        };
        match cross_validate(&data, &spec, &bad, &plan, &CvConfig::default(), "m") {
            Err(Error::Fold { fold: 0, .. }) => {}
            other => panic!("expected fold error, got {:?}", other.map(|o| o.report)),
        }
    }
}
