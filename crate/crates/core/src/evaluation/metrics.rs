use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Classification metrics for one evaluation. A metric whose denominator is
/// zero is reported as 0 and its name is listed in `degenerate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub confusion: Confusion,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f1: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degenerate: Vec<String>,
}

pub const METRIC_NAMES: [&str; 5] = ["accuracy", "precision", "recall", "specificity", "f1"];

impl Metrics {
    pub fn values(&self) -> [f64; 5] {
        [
            self.accuracy,
            self.precision,
            self.recall,
            self.specificity,
            self.f1,
        ]
    }

    pub fn from_confusion(c: Confusion) -> Self {
        let mut degenerate = Vec::new();
        let mut ratio = |num: usize, den: usize, name: &str| {
            if den == 0 {
                degenerate.push(name.to_string());
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let accuracy = ratio(c.tp + c.tn, c.total(), "accuracy");
        let precision = ratio(c.tp, c.tp + c.fp, "precision");
        let recall = ratio(c.tp, c.tp + c.fn_, "recall");
        let specificity = ratio(c.tn, c.tn + c.fp, "specificity");
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            degenerate.push("f1".into());
            0.0
        };
        Self {
            confusion: c,
            accuracy,
            precision,
            recall,
            specificity,
            f1,
            degenerate,
        }
    }
}

pub fn compute_metrics(predictions: &[u8], labels: &[u8]) -> Result<Metrics> {
    if predictions.is_empty() || predictions.len() != labels.len() {
        return Err(Error::Shape(format!(
            "need equal nonempty predictions and labels, got {} and {}",
            predictions.len(),
            labels.len()
        )));
    }
    let mut c = Confusion::default();
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p, y) {
            (1, 1) => c.tp += 1,
            (1, _) => c.fp += 1,
            (_, 1) => c.fn_ += 1,
            _ => c.tn += 1,
        }
    }
    Ok(Metrics::from_confusion(c))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricSummary {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f1: f64,
}

impl MetricSummary {
    fn from_array(v: [f64; 5]) -> Self {
        Self {
            accuracy: v[0],
            precision: v[1],
            recall: v[2],
            specificity: v[3],
            f1: v[4],
        }
    }

    pub fn values(&self) -> [f64; 5] {
        [
            self.accuracy,
            self.precision,
            self.recall,
            self.specificity,
            self.f1,
        ]
    }
}

/// Per-fold metrics with their mean and sample standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub label: String,
    pub folds: Vec<Metrics>,
    pub mean: MetricSummary,
    pub std_dev: MetricSummary,
    /// Evaluation protocol description, e.g. `5-fold, fixed test split`.
    pub protocol: String,
    /// SHA-256 of the evaluated rows; equal hashes mean identical test data.
    pub test_hash: String,
}

impl MetricsReport {
    pub fn aggregate(label: &str, protocol: &str, test_hash: &str, folds: Vec<Metrics>) -> Self {
        let k = folds.len() as f64;
        let mut mean = [0.0; 5];
        for m in &folds {
            for (a, v) in mean.iter_mut().zip(m.values()) {
                *a += v / k;
            }
        }
        let mut var = [0.0; 5];
        if folds.len() > 1 {
            for m in &folds {
                for ((a, v), mu) in var.iter_mut().zip(m.values()).zip(mean) {
                    *a += (v - mu) * (v - mu) / (k - 1.0);
                }
            }
        }
        Self {
            label: label.to_string(),
            folds,
            mean: MetricSummary::from_array(mean),
            std_dev: MetricSummary::from_array(var.map(f64::sqrt)),
            protocol: protocol.to_string(),
            test_hash: test_hash.to_string(),
        }
    }
}

/// Markdown table with one row per report, in the column order
/// `Model | Train/Test | Acc | Preci | Recall | Speci | F1score | Cross-V`.
pub fn metrics_markdown(reports: &[MetricsReport], train_test: &str) -> String {
    let mut out =
        String::from("| Model | Train/Test | Acc | Preci | Recall | Speci | F1score | Cross-V |\n");
    out.push_str("|---|---|---|---|---|---|---|---|\n");
    for r in reports {
        let cells: Vec<String> = r
            .mean
            .values()
            .iter()
            .zip(r.std_dev.values())
            .map(|(m, s)| {
                if r.folds.len() > 1 {
                    format!("{m:.4} ± {s:.4}")
                } else {
                    format!("{m:.4}")
                }
            })
            .collect();
        let cv = if r.folds.len() > 1 {
            format!("{}-fold", r.folds.len())
        } else {
            "-".into()
        };
        out.push_str(&format!(
            "| {} | {train_test} | {} | {cv} |\n",
            r.label,
            cells.join(" | ")
        ));
    }
    out
}
