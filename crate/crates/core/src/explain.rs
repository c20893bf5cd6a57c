//! One entry point for explaining a record with any method.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lrp::{propagate_relevance, LrpConfig};
use crate::network::{forward, Parameters};
use crate::surrogate::{
    derive_seed, lime_explain, shap_explain, AttributionVector, LimeConfig, Method, NetworkModel,
    ShapConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainConfig {
    pub lrp: LrpConfig,
    pub lime: LimeConfig,
    pub shap: ShapConfig,
}

/// Explains the predicted class of `record`. The duration covers the whole
/// call, including the prediction and perturbation sampling. Surrogate seeds
/// are derived from the configured seed and `record_index`.
pub fn explain_record(
    params: &Parameters,
    record: &[f64],
    record_index: usize,
    method: Method,
    cfg: &ExplainConfig,
) -> Result<AttributionVector> {
    let start = Instant::now();
    let (probs, trace) = forward(params, record)?;
    let class = u8::from(probs[1] > probs[0]);
    let model = NetworkModel(params);
    let mut out = match method {
        Method::Lrp => {
            let r = propagate_relevance(params, &trace, &cfg.lrp)?;
            AttributionVector::from_relevance(&r, 0.0)
        }
        Method::Lime => {
            let lime = LimeConfig {
                seed: derive_seed(cfg.lime.seed, record_index),
                ..cfg.lime
            };
            lime_explain(&model, record, class, &lime)?
        }
        Method::Shap => {
            let shap = ShapConfig {
                seed: derive_seed(cfg.shap.seed, record_index),
                ..cfg.shap.clone()
            };
            shap_explain(&model, record, class, &shap)?
        }
    };
    out.duration_secs = start.elapsed().as_secs_f64();
    Ok(out)
}
