use serde::{Deserialize, Serialize};

use super::cv::{cross_validate, CvConfig};
use super::metrics::{MetricSummary, MetricsReport};
use crate::data::{EncodedMatrix, SplitPlan};
use crate::error::{Error, Result};
use crate::network::{parse_spec_with, rederive_for_input, SpecOptions, TrainConfig};

/// Spec string of the logistic-regression baseline.
pub const BASELINE_SPEC: &str = "O2";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyArm {
    pub spec_full: String,
    pub spec_reduced: String,
    pub full: MetricsReport,
    pub reduced: MetricsReport,
    /// Reduced minus full, on mean metrics.
    pub delta: MetricSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedFeatureStudy {
    /// Selected feature indices, ascending (the reduced matrix column order).
    pub subset: Vec<usize>,
    pub subset_names: Vec<String>,
    pub arms: Vec<StudyArm>,
}

/// Cross-validates every spec on all features and on `subset`; the reduced
/// arm re-derives flatten widths for the shorter input.
pub fn reduced_feature_study(
    data: &EncodedMatrix,
    plan: &SplitPlan,
    subset: &[usize],
    specs: &[String],
    baseline: bool,
    opts: SpecOptions,
    train_cfg: &TrainConfig,
    cv: &CvConfig,
) -> Result<ReducedFeatureStudy> {
    let n = data.n_features();
    let mut cols = subset.to_vec();
    cols.sort_unstable();
    cols.dedup();
    if cols.len() != subset.len() {
        return Err(Error::Config("feature subset contains duplicates".into()));
    }
    if cols.is_empty() || cols.len() > n || cols.last().is_some_and(|&c| c >= n) {
        return Err(Error::Config(format!(
            "feature subset of {} indices is invalid for {n} features",
            subset.len()
        )));
    }
    let reduced = data.select_columns(&cols);
    let mut texts: Vec<String> = specs.to_vec();
    if baseline && !texts.iter().any(|t| t == BASELINE_SPEC) {
        texts.push(BASELINE_SPEC.into());
    }
    let mut arms = Vec::with_capacity(texts.len());
    for text in &texts {
        let full_spec = parse_spec_with(text, n, opts)?;
        let red_spec = rederive_for_input(&full_spec, cols.len(), opts)?;
        let full = cross_validate(
            data,
            &full_spec,
            train_cfg,
            plan,
            cv,
            &format!("{} ({n})", full_spec.text),
        )?
        .report;
        let red = cross_validate(
            &reduced,
            &red_spec,
            train_cfg,
            plan,
            cv,
            &format!("{} ({})", red_spec.text, cols.len()),
        )?
        .report;
        let d: Vec<f64> = red
            .mean
            .values()
            .iter()
            .zip(full.mean.values())
            .map(|(r, f)| r - f)
            .collect();
        arms.push(StudyArm {
            spec_full: full_spec.text.clone(),
            spec_reduced: red_spec.text.clone(),
            delta: MetricSummary {
                accuracy: d[0],
                precision: d[1],
                recall: d[2],
                specificity: d[3],
                f1: d[4],
            },
            full,
            reduced: red,
        });
    }
    Ok(ReducedFeatureStudy {
        subset_names: cols
            .iter()
            .map(|&c| data.feature_names[c].clone())
            .collect(),
        subset: cols,
        arms,
    })
}

pub fn study_markdown(study: &ReducedFeatureStudy, train_test: &str) -> String {
    let mut reports = Vec::new();
    for arm in &study.arms {
        reports.push(arm.full.clone());
        reports.push(arm.reduced.clone());
    }
    let mut out = format!(
        "Selected features ({}): {}\n\n",
        study.subset.len(),
        study.subset_names.join(", ")
    );
    out.push_str(&super::metrics::metrics_markdown(&reports, train_test));
    out.push_str(
        "\n| Spec | ΔAcc | ΔPreci | ΔRecall | ΔSpeci | ΔF1score |\n|---|---|---|---|---|---|\n",
    );
    for arm in &study.arms {
        let d = arm.delta.values();
        out.push_str(&format!(
            "| {} | {:+.4} | {:+.4} | {:+.4} | {:+.4} | {:+.4} |\n",
            arm.spec_full, d[0], d[1], d[2], d[3], d[4]
        ));
    }
    out
}
