//! Run configuration: a flat TOML table whose keys double as CLI flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::ResampleConfig;
use crate::error::{Error, Result};
use crate::evaluation::{bench, CvConfig, CvProtocol};
use crate::explain::ExplainConfig;
use crate::lrp::{LrpConfig, LrpRule, LrpTarget};
use crate::network::{InitScheme, SpecOptions, TrainConfig};
use crate::ranking::RankingConfig;
use crate::surrogate::{derive_seed, LimeConfig, Method, ShapConfig, ShapMode};

/// Environment variable consulted for the output directory when neither a
/// flag nor the config file sets one.
pub const OUTPUT_ENV: &str = "TABLRP_OUT";
pub const DEFAULT_OUTPUT_DIR: &str = "tablrp-out";

/// Independent random streams derived from the run seed.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Stream {
    Train = 1,
    Smote = 2,
    Lime = 3,
    Shap = 4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RuleName {
    Z,
    #[default]
    Epsilon,
    AlphaBeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ShapModeName {
    Exact,
    #[default]
    Sampled,
}

/// Every documented key with its default. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Input CSV.
    pub data_path: Option<PathBuf>,
    /// JSON feature schema; overrides inference and presets.
    pub schema_path: Option<PathBuf>,
    /// Use the built-in schema of a recognised dataset.
    pub use_presets: bool,
    pub label_column: Option<String>,
    pub positive_label: Option<String>,
    /// Divide each encoded row by its maximum.
    pub record_norm: bool,

    pub split_ratio: f64,
    pub folds: usize,
    /// Root of every random stream in the run.
    pub seed: u64,
    pub smote: bool,
    pub smote_k: usize,

    pub spec: String,
    pub kernel_width: usize,
    pub relu_every_conv: bool,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_iterations: usize,
    pub momentum: f64,
    pub init_scheme: InitScheme,

    pub cv_protocol: CvProtocol,
    pub cross_validate: bool,

    pub lrp_rule: RuleName,
    pub lrp_epsilon: f64,
    pub lrp_alpha: f64,
    pub lrp_beta: f64,

    pub lime_perturbations: usize,
    pub lime_noise: f64,
    /// Absent means `0.75 * sqrt(n_features)`.
    pub lime_kernel_width: Option<f64>,
    pub lime_ridge: f64,
    pub shap_mode: ShapModeName,
    pub shap_permutations: usize,

    pub explain_methods: Vec<Method>,
    /// Surrogates run on at most this many TP and this many TN test records.
    pub surrogate_max_records: usize,

    pub rank_threshold: f64,
    pub rank_per_class_top: usize,
    pub rank_total: usize,
    pub compare_top_k: usize,

    /// Architectures for the reduced-feature study; empty means `[spec]`.
    pub reduce_specs: Vec<String>,
    /// Also run the softmax-regression baseline in the study.
    pub reduce_baseline: bool,

    pub bench_records: usize,
    pub bench_repetitions: usize,

    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        let rank = RankingConfig::default();
        Self {
            data_path: None,
            schema_path: None,
            use_presets: true,
            label_column: None,
            positive_label: None,
            record_norm: true,
            split_ratio: 0.8,
            folds: 5,
            seed: 0,
            smote: true,
            smote_k: 5,
            spec: "C25-C50-C100-F2200-O2".into(),
            kernel_width: SpecOptions::default().kernel_width,
            relu_every_conv: SpecOptions::default().relu_every_conv,
            learning_rate: train.learning_rate,
            batch_size: train.batch_size,
            max_iterations: train.max_iterations,
            momentum: train.momentum,
            init_scheme: train.init,
            cv_protocol: CvProtocol::default(),
            cross_validate: true,
            lrp_rule: RuleName::Epsilon,
            lrp_epsilon: 1e-6,
            lrp_alpha: 1.0,
            lrp_beta: 0.0,
            lime_perturbations: LimeConfig::default().n_perturbations,
            lime_noise: LimeConfig::default().noise_scale,
            lime_kernel_width: None,
            lime_ridge: LimeConfig::default().ridge,
            shap_mode: ShapModeName::Sampled,
            shap_permutations: 200,
            explain_methods: vec![Method::Lrp, Method::Lime, Method::Shap],
            surrogate_max_records: 50,
            rank_threshold: rank.threshold,
            rank_per_class_top: rank.per_class_top,
            rank_total: rank.total,
            compare_top_k: 8,
            reduce_specs: Vec::new(),
            reduce_baseline: true,
            bench_records: 50,
            bench_repetitions: 3,
            output_dir: None,
        }
    }
}

/// How a CLI flag value is turned into a TOML value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyKind {
    Text,
    List,
    Scalar,
}

impl RunConfig {
    /// Documented keys in declaration order.
    pub fn keys() -> Vec<(&'static str, KeyKind)> {
        use KeyKind::*;
        vec![
            ("data_path", Text),
            ("schema_path", Text),
            ("use_presets", Scalar),
            ("label_column", Text),
            ("positive_label", Text),
            ("record_norm", Scalar),
            ("split_ratio", Scalar),
            ("folds", Scalar),
            ("seed", Scalar),
            ("smote", Scalar),
            ("smote_k", Scalar),
            ("spec", Text),
            ("kernel_width", Scalar),
            ("relu_every_conv", Scalar),
            ("learning_rate", Scalar),
            ("batch_size", Scalar),
            ("max_iterations", Scalar),
            ("momentum", Scalar),
            ("init_scheme", Text),
            ("cv_protocol", Text),
            ("cross_validate", Scalar),
            ("lrp_rule", Text),
            ("lrp_epsilon", Scalar),
            ("lrp_alpha", Scalar),
            ("lrp_beta", Scalar),
            ("lime_perturbations", Scalar),
            ("lime_noise", Scalar),
            ("lime_kernel_width", Scalar),
            ("lime_ridge", Scalar),
            ("shap_mode", Text),
            ("shap_permutations", Scalar),
            ("explain_methods", List),
            ("surrogate_max_records", Scalar),
            ("rank_threshold", Scalar),
            ("rank_per_class_top", Scalar),
            ("rank_total", Scalar),
            ("compare_top_k", Scalar),
            ("reduce_specs", List),
            ("reduce_baseline", Scalar),
            ("bench_records", Scalar),
            ("bench_repetitions", Scalar),
            ("output_dir", Text),
        ]
    }

    /// Parses a config file body, applies `key=value` overrides, then fills
    /// `output_dir` from [`OUTPUT_ENV`] when still unset.
    pub fn load(text: Option<&str>, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table = match text {
            Some(t) => toml::from_str(t).map_err(|e| Error::Config(format!("config file: {e}")))?,
            None => toml::Table::new(),
        };
        let keys = Self::keys();
        for (key, raw) in overrides {
            let key = key.replace('-', "_");
            let Some(&(_, kind)) = keys.iter().find(|(k, _)| *k == key) else {
                return Err(Error::Config(format!("unknown config key '{key}'")));
            };
            table.insert(key, flag_value(raw, kind)?);
        }
        let mut cfg: Self = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        if cfg.output_dir.is_none() {
            if let Some(dir) = std::env::var_os(OUTPUT_ENV) {
                cfg.output_dir = Some(PathBuf::from(dir));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load_file(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        match path {
            Some(p) => Self::load(Some(&std::fs::read_to_string(p)?), overrides),
            None => Self::load(None, overrides),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return bad(format!(
                "split_ratio must lie in (0, 1), got {}",
                self.split_ratio
            ));
        }
        if self.folds < 2 {
            return bad(format!("folds must be at least 2, got {}", self.folds));
        }
        if self.smote_k == 0 {
            return bad("smote_k must be at least 1".into());
        }
        if self.explain_methods.is_empty() {
            return bad("explain_methods is empty".into());
        }
        if !self.explain_methods.contains(&Method::Lrp) {
            return bad(
                "explain_methods must include lrp; feature selection is driven by it".into(),
            );
        }
        if self.shap_mode == ShapModeName::Sampled && self.shap_permutations == 0 {
            return bad("shap_permutations must be at least 1".into());
        }
        if self.compare_top_k == 0 {
            return bad("compare_top_k must be at least 1".into());
        }
        if self.bench_records < bench::MIN_RECORDS
            || self.bench_repetitions < bench::MIN_REPETITIONS
        {
            return bad(format!(
                "bench needs bench_records >= {} and bench_repetitions >= {}",
                bench::MIN_RECORDS,
                bench::MIN_REPETITIONS
            ));
        }
        self.train_config().validate()?;
        self.lrp_config().rule.validate()?;
        Ok(())
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
    }

    /// TOML rendering of every key, with `output_dir` included.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the TOML rendering without `output_dir`, so relocating a run
    /// does not change its identity.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let text = c.to_toml().expect("config renders as TOML");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub(crate) fn stream_seed(&self, s: Stream) -> u64 {
        derive_seed(self.seed, s as usize)
    }

    pub fn spec_options(&self) -> SpecOptions {
        SpecOptions {
            kernel_width: self.kernel_width,
            relu_every_conv: self.relu_every_conv,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_iterations: self.max_iterations,
            momentum: self.momentum,
            seed: self.stream_seed(Stream::Train),
            init: self.init_scheme,
        }
    }

    pub fn resample_config(&self) -> Option<ResampleConfig> {
        self.smote.then(|| ResampleConfig {
            k_neighbors: self.smote_k,
            seed: self.stream_seed(Stream::Smote),
        })
    }

    pub fn cv_config(&self) -> CvConfig {
        CvConfig {
            protocol: self.cv_protocol,
            smote: self.resample_config(),
        }
    }

    pub fn lrp_config(&self) -> LrpConfig {
        let rule = match self.lrp_rule {
            RuleName::Z => LrpRule::Z,
            RuleName::Epsilon => LrpRule::Epsilon {
                epsilon: self.lrp_epsilon,
            },
            RuleName::AlphaBeta => LrpRule::AlphaBeta {
                alpha: self.lrp_alpha,
                beta: self.lrp_beta,
            },
        };
        LrpConfig {
            rule,
            target: LrpTarget::Predicted,
        }
    }

    /// Explainer settings; `background` is the SHAP replacement record.
    pub fn explain_config(&self, background: Vec<f64>) -> ExplainConfig {
        let mode = match self.shap_mode {
            ShapModeName::Exact => ShapMode::Exact,
            ShapModeName::Sampled => ShapMode::Sampled {
                n_permutations: self.shap_permutations,
            },
        };
        ExplainConfig {
            lrp: self.lrp_config(),
            lime: LimeConfig {
                n_perturbations: self.lime_perturbations,
                noise_scale: self.lime_noise,
                kernel_width: self.lime_kernel_width,
                ridge: self.lime_ridge,
                seed: self.stream_seed(Stream::Lime),
            },
            shap: ShapConfig {
                mode,
                background,
                seed: self.stream_seed(Stream::Shap),
            },
        }
    }

    pub fn ranking_config(&self) -> RankingConfig {
        RankingConfig {
            threshold: self.rank_threshold,
            per_class_top: self.rank_per_class_top,
            total: self.rank_total,
        }
    }

    pub fn study_specs(&self) -> Vec<String> {
        if self.reduce_specs.is_empty() {
            vec![self.spec.clone()]
        } else {
            self.reduce_specs.clone()
        }
    }
}

fn flag_value(raw: &str, kind: KeyKind) -> Result<toml::Value> {
    match kind {
        KeyKind::Text => Ok(toml::Value::String(raw.to_string())),
        KeyKind::List => Ok(toml::Value::Array(
            raw.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| toml::Value::String(s.to_string()))
                .collect(),
        )),
        KeyKind::Scalar => {
            let doc: toml::Table = toml::from_str(&format!("v = {raw}"))
                .map_err(|_| Error::Config(format!("cannot parse flag value '{raw}'")))?;
            Ok(doc["v"].clone())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_cover_every_field() {
        let mut cfg = RunConfig::default();
        cfg.data_path = Some("x".into());
        cfg.schema_path = Some("x".into());
        cfg.label_column = Some("x".into());
        cfg.positive_label = Some("x".into());
        cfg.lime_kernel_width = Some(1.0);
        cfg.output_dir = Some("x".into());
        let table: toml::Table = toml::from_str(&cfg.to_toml().unwrap()).unwrap();
        let mut rendered: Vec<&str> = table.keys().map(String::as_str).collect();
        let mut listed: Vec<&str> = RunConfig::keys().iter().map(|(k, _)| *k).collect();
        rendered.sort_unstable();
        listed.sort_unstable();
        assert_eq!(rendered, listed);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::load(Some("sede = 3\n"), &[]).unwrap_err();
        assert!(err.to_string().contains("sede"), "{err}");
        assert!(RunConfig::load(None, &[("no_such".into(), "1".into())]).is_err());
    }

    #[test]
    fn overrides_beat_file_and_parse_by_kind() {
        let cfg = RunConfig::load(
            Some("seed = 3\nspec = \"O2\"\n"),
            &[
                ("seed".into(), "9".into()),
                ("positive-label".into(), "1".into()),
                ("explain-methods".into(), "lrp, shap".into()),
                ("lime_kernel_width".into(), "0.5".into()),
                ("output_dir".into(), "somewhere".into()),
            ],
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.spec, "O2");
        assert_eq!(cfg.positive_label.as_deref(), Some("1"));
        assert_eq!(cfg.explain_methods, vec![Method::Lrp, Method::Shap]);
        assert_eq!(cfg.lime_kernel_width, Some(0.5));
    }

    #[test]
    fn resolved_form_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.lrp_rule = RuleName::AlphaBeta;
        cfg.cv_protocol = CvProtocol::HeldOutFold;
        let back = RunConfig::load(Some(&cfg.to_toml().unwrap()), &[]).unwrap();
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.output_dir = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn invalid_values_are_rejected() {
        for (k, v) in [
            ("split_ratio", "1.0"),
            ("folds", "1"),
            ("momentum", "1.0"),
            ("explain_methods", "lime"),
        ] {
            assert!(
                RunConfig::load(None, &[(k.into(), v.into())]).is_err(),
                "{k}={v}"
            );
        }
    }
}
