use std::collections::BTreeMap;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::{explain_record, ExplainConfig};
use crate::network::Parameters;
use crate::surrogate::{Method, ShapMode};

pub const MIN_RECORDS: usize = 20;
pub const MIN_REPETITIONS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodTiming {
    pub method: Method,
    /// Per-record median over repetitions, in record order (seconds).
    pub per_record: Vec<f64>,
    pub median: f64,
    pub p90: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub methods: Vec<MethodTiming>,
    /// Every setting that influences cost.
    pub settings: BTreeMap<String, String>,
    pub lrp_to_lime: Option<f64>,
    pub lrp_to_shap: Option<f64>,
    pub lime_to_shap: Option<f64>,
}

impl TimingReport {
    pub fn get(&self, m: Method) -> Option<&MethodTiming> {
        self.methods.iter().find(|t| t.method == m)
    }

    pub fn markdown(&self) -> String {
        let mut out =
            String::from("| Method | Median (s) | p90 (s) | Mean (s) |\n|---|---|---|---|\n");
        for t in &self.methods {
            out.push_str(&format!(
                "| {} | {:.6} | {:.6} | {:.6} |\n",
                t.method.display(),
                t.median,
                t.p90,
                t.mean
            ));
        }
        for (name, r) in [
            ("LRP : LIME", self.lrp_to_lime),
            ("LRP : SHAP", self.lrp_to_shap),
            ("LIME : SHAP", self.lime_to_shap),
        ] {
            if let Some(r) = r {
                out.push_str(&format!("\n{name} median ratio: {r:.4}"));
            }
        }
        out.push_str("\n\nSettings:\n\n");
        for (k, v) in &self.settings {
            out.push_str(&format!("- {k}: {v}\n"));
        }
        out
    }
}

/// Median of a nonempty slice.
pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

/// Nearest-rank percentile, `q` in (0, 1].
pub fn percentile(v: &[f64], q: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let rank = ((q * s.len() as f64).ceil() as usize).clamp(1, s.len());
    s[rank - 1]
}

pub fn settings_fingerprint(
    params: &Parameters,
    cfg: &ExplainConfig,
    n_records: usize,
    repetitions: usize,
) -> BTreeMap<String, String> {
    let mut s = BTreeMap::new();
    s.insert("spec".into(), params.spec.text.clone());
    s.insert("input_len".into(), params.spec.input_len.to_string());
    s.insert("n_params".into(), params.n_params().to_string());
    s.insert("records".into(), n_records.to_string());
    s.insert("repetitions".into(), repetitions.to_string());
    s.insert("lrp_rule".into(), cfg.lrp.rule.label());
    s.insert(
        "lime_perturbations".into(),
        cfg.lime.n_perturbations.to_string(),
    );
    s.insert("lime_noise".into(), cfg.lime.noise_scale.to_string());
    s.insert(
        "lime_kernel_width".into(),
        cfg.lime
            .kernel_width
            .map_or("0.75*sqrt(n)".into(), |w| w.to_string()),
    );
    s.insert("lime_ridge".into(), cfg.lime.ridge.to_string());
    let shap = match cfg.shap.mode {
        ShapMode::Exact => "exact".to_string(),
        ShapMode::Sampled { n_permutations } => format!("sampled({n_permutations})"),
    };
    s.insert("shap_mode".into(), shap);
    s.insert(
        "threads".into(),
        if cfg!(feature = "threads") {
            "multi"
        } else {
            "single"
        }
        .into(),
    );
    s
}

/// Times the full explain call per record and method. One warm-up call per
/// method is made first and discarded.
pub fn benchmark_latency(
    params: &Parameters,
    records: ArrayView2<f64>,
    methods: &[Method],
    cfg: &ExplainConfig,
    repetitions: usize,
) -> Result<TimingReport> {
    if records.nrows() < MIN_RECORDS {
        return Err(Error::Config(format!(
            "latency benchmark needs at least {MIN_RECORDS} records, got {}",
            records.nrows()
        )));
    }
    if repetitions < MIN_REPETITIONS {
        return Err(Error::Config(format!(
            "latency benchmark needs at least {MIN_REPETITIONS} repetitions, got {repetitions}"
        )));
    }
    let rows: Vec<Vec<f64>> = records.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut methods_out = Vec::new();
    for &m in methods {
        explain_record(params, &rows[0], 0, m, cfg)?;
        let mut per_record = Vec::with_capacity(rows.len());
        for (i, r) in rows.iter().enumerate() {
            let mut reps = Vec::with_capacity(repetitions);
            for _ in 0..repetitions {
                reps.push(
                    explain_record(params, r, i, m, cfg)?
                        .duration_secs
                        .max(f64::MIN_POSITIVE),
                );
            }
            per_record.push(median(&reps));
        }
        methods_out.push(MethodTiming {
            method: m,
            median: median(&per_record),
            p90: percentile(&per_record, 0.9),
            mean: per_record.iter().sum::<f64>() / per_record.len() as f64,
            per_record,
        });
    }
    let med = |m: Method| methods_out.iter().find(|t| t.method == m).map(|t| t.median);
    let ratio = |a: Method, b: Method| Some(med(a)? / med(b)?);
    Ok(TimingReport {
        lrp_to_lime: ratio(Method::Lrp, Method::Lime),
        lrp_to_shap: ratio(Method::Lrp, Method::Shap),
        lime_to_shap: ratio(Method::Lime, Method::Shap),
        settings: settings_fingerprint(params, cfg, rows.len(), repetitions),
        methods: methods_out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lrp::LrpConfig;
    use crate::network::{init_params, parse_spec, InitScheme};
    use crate::surrogate::{LimeConfig, ShapConfig};
    use ndarray::Array2;

    fn setup() -> (Parameters, Array2<f64>, ExplainConfig) {
        let spec = parse_spec("C4-F16-O2", 8).unwrap();
        let p = init_params(&spec, 1, InitScheme::FanInUniform);
        let x = Array2::from_shape_fn((20, 8), |(i, j)| ((i * 8 + j) as f64 * 0.31).sin().abs());
        let cfg = ExplainConfig {
            lrp: LrpConfig::default(),
            lime: LimeConfig::default(),
            shap: ShapConfig::sampled(vec![0.5; 8], 20, 0),
        };
        (p, x, cfg)
    }

    #[test]
    fn order_statistics() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.9), 9.0);
        assert_eq!(percentile(&v, 1.0), 10.0);
    }

    #[test]
    fn preconditions() {
        let (p, x, cfg) = setup();
        assert!(benchmark_latency(&p, x.view(), &[Method::Lrp], &cfg, 1).is_err());
        assert!(
            benchmark_latency(&p, x.slice(ndarray::s![..10, ..]), &[Method::Lrp], &cfg, 3).is_err()
        );
    }

    #[test]
    fn report_has_all_methods_and_settings() {
        let (p, x, cfg) = setup();
        let r = benchmark_latency(
            &p,
            x.view(),
            &[Method::Lrp, Method::Lime, Method::Shap],
            &cfg,
            3,
        )
        .unwrap();
        assert_eq!(r.methods.len(), 3);
        for t in &r.methods {
            assert_eq!(t.per_record.len(), 20);
            assert!(t.per_record.iter().all(|&d| d > 0.0));
            assert!(t.median <= t.p90);
        }
        assert!(r.lrp_to_lime.is_some() && r.lime_to_shap.is_some());
        for key in [
            "lime_perturbations",
            "shap_mode",
            "lrp_rule",
            "spec",
            "repetitions",
        ] {
            assert!(r.settings.contains_key(key), "{key}");
        }
        assert!(r.markdown().contains("LRP : LIME"));
    }
}
