//! Model-agnostic attributions: a local weighted linear surrogate and
//! mean-replacement Shapley values. Both see the model only through
//! [`BlackBox::predict_proba`].

mod lime;
mod shap;

pub use lime::{lime_explain, LimeConfig};
pub use shap::{shap_explain, ShapConfig, ShapMode, MAX_EXACT_FEATURES};

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lrp::RelevanceVector;
use crate::network::{predict_batch, Parameters};

/// Anything that maps rows to class-1 probabilities.
pub trait BlackBox {
    fn n_features(&self) -> usize;
    fn predict_proba(&self, rows: ArrayView2<f64>) -> Result<Vec<f64>>;
}

/// A trained network seen only through its predictions.
pub struct NetworkModel<'a>(pub &'a Parameters);

impl BlackBox for NetworkModel<'_> {
    fn n_features(&self) -> usize {
        self.0.spec.input_len
    }

    fn predict_proba(&self, rows: ArrayView2<f64>) -> Result<Vec<f64>> {
        Ok(predict_batch(self.0, rows)?
            .into_iter()
            .map(|p| p.probability)
            .collect())
    }
}

/// Wraps a closure over rows.
pub struct FnModel<F> {
    pub n_features: usize,
    pub f: F,
}

impl<F: Fn(ArrayView2<f64>) -> Vec<f64>> BlackBox for FnModel<F> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba(&self, rows: ArrayView2<f64>) -> Result<Vec<f64>> {
        Ok((self.f)(rows))
    }
}

/// Probability of `class` given class-1 probabilities.
pub(crate) fn class_prob(p1: f64, class: u8) -> f64 {
    if class == 1 {
        p1
    } else {
        1.0 - p1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lrp,
    Lime,
    Shap,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Lrp => "lrp",
            Self::Lime => "lime",
            Self::Shap => "shap",
        }
    }

    pub fn display(&self) -> &'static str {
        match self {
            Self::Lrp => "LRP",
            Self::Lime => "LIME",
            Self::Shap => "SHAP",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lrp" => Ok(Self::Lrp),
            "lime" => Ok(Self::Lime),
            "shap" => Ok(Self::Shap),
            other => Err(crate::Error::Config(format!(
                "unknown explanation method '{other}'"
            ))),
        }
    }
}

/// Signed per-feature scores from any method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionVector {
    pub method: Method,
    pub values: Vec<f64>,
    /// Class whose score is explained.
    pub explained_class: u8,
    /// Explained score at the record (logit for LRP, probability otherwise).
    pub prediction: f64,
    /// Reference score: surrogate intercept, v(empty set), or 0 for LRP.
    pub base_value: f64,
    /// Monte-Carlo standard error per feature for sampled Shapley values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_error: Option<Vec<f64>>,
    /// Wall-clock seconds of the explain call; excluded from artifacts.
    #[serde(skip)]
    pub duration_secs: f64,
}

impl AttributionVector {
    pub fn from_relevance(r: &RelevanceVector, duration_secs: f64) -> Self {
        Self {
            method: Method::Lrp,
            values: r.values.clone(),
            explained_class: r.target_class,
            prediction: r.logit,
            base_value: 0.0,
            std_error: None,
            duration_secs,
        }
    }
}

/// Per-record generator seed, independent of processing order.
pub fn derive_seed(global: u64, record: usize) -> u64 {
    // splitmix64 finalizer over the combined key
    let mut z = global ^ (record as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Writes attributions as CSV: `record,method,explained_class,prediction,base_value,<features>`.
pub fn write_attributions_csv<W: std::io::Write>(
    feature_names: &[String],
    records: &[(usize, &AttributionVector)],
    w: W,
) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header: Vec<String> = [
        "record",
        "method",
        "explained_class",
        "prediction",
        "base_value",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(feature_names.iter().cloned());
    wr.write_record(&header)?;
    for (id, a) in records {
        let mut row = vec![
            id.to_string(),
            a.method.name().to_string(),
            a.explained_class.to_string(),
            a.prediction.to_string(),
            a.base_value.to_string(),
        ];
        row.extend(a.values.iter().map(|v| v.to_string()));
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ_per_record_and_global() {
        let a: Vec<u64> = (0..100).map(|r| derive_seed(7, r)).collect();
        let mut sorted = a.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 100);
        assert_ne!(derive_seed(7, 0), derive_seed(8, 0));
        assert_eq!(derive_seed(7, 3), a[3]);
    }

    #[test]
    fn csv_layout() {
        let a = AttributionVector {
            method: Method::Shap,
            values: vec![0.25, -0.5],
            explained_class: 1,
            prediction: 0.75,
            base_value: 0.5,
            std_error: None,
            duration_secs: 1.0,
        };
        let mut buf = Vec::new();
        write_attributions_csv(&["a".into(), "b".into()], &[(3, &a)], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "record,method,explained_class,prediction,base_value,a,b\n3,shap,1,0.75,0.5,0.25,-0.5\n"
        );
        let json = serde_json::to_string(&a).unwrap();
        assert!(!json.contains("duration"));
    }
}
