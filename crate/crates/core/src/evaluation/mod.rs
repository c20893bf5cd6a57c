//! Metrics, cross-validation, the reduced-feature study and latency benchmarks.

pub mod bench;
pub mod cv;
pub mod metrics;
pub mod study;

pub use bench::{benchmark_latency, MethodTiming, TimingReport};
pub use cv::{
    cross_validate, predict_rows, rows_hash, train_on_rows, training_set, CvConfig, CvOutcome,
    CvProtocol,
};
pub use metrics::{
    compute_metrics, metrics_markdown, Confusion, MetricSummary, Metrics, MetricsReport,
};
pub use study::{
    reduced_feature_study, study_markdown, ReducedFeatureStudy, StudyArm, BASELINE_SPEC,
};
