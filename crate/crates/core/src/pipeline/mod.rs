//! File-in, file-out orchestration of the whole study.
//!
//! Each subcommand reads the artifacts of earlier ones from the output
//! directory and fails with [`Error::MissingArtifact`] naming the producer
//! when one is absent. Every run rewrites `config.resolved.toml`.

mod artifacts;
mod config;
mod report;

use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

pub use artifacts::{csv_reader, read_csv_comments, ArtifactDir, Provenance, Wrapped};
pub use config::{KeyKind, RuleName, RunConfig, ShapModeName, DEFAULT_OUTPUT_DIR, OUTPUT_ENV};

use crate::data::{
    encode, fit_encoder, load_table, presets, stratified_split, EncodedMatrix, EncoderState,
    FeatureSchema, KnownDataset, LoadOptions, SplitPlan,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    benchmark_latency, compute_metrics, cross_validate, metrics_markdown, predict_rows,
    reduced_feature_study, rows_hash, study_markdown, train_on_rows, MetricsReport,
};
use crate::explain::explain_record;
use crate::lrp::{aggregate_global, normalize_heatmap, HeatmapMatrix};
use crate::network::{forward_batch, parse_spec_with, write_history, Checkpoint, Parameters};
use crate::ranking::{
    compare_rankings, rank_features, select_subset, write_rank_tables, ClassAggregate, Outcome,
    OverlapReport, RankTable, SubsetSelection,
};
use crate::render::write_heatmap_svg;
use crate::surrogate::{write_attributions_csv, AttributionVector, Method};

/// Thresholds swept by `rank` in addition to the configured one.
pub const TAU_SWEEP: [f64; 3] = [0.3, 0.5, 0.7];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Subcommand {
    Prep,
    Train,
    Eval,
    Explain,
    Rank,
    Reduce,
    Compare,
    Bench,
    Report,
}

impl Subcommand {
    pub const ALL: [Subcommand; 9] = [
        Self::Prep,
        Self::Train,
        Self::Eval,
        Self::Explain,
        Self::Rank,
        Self::Reduce,
        Self::Compare,
        Self::Bench,
        Self::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Prep => "prep",
            Self::Train => "train",
            Self::Eval => "eval",
            Self::Explain => "explain",
            Self::Rank => "rank",
            Self::Reduce => "reduce",
            Self::Compare => "compare",
            Self::Bench => "bench",
            Self::Report => "report",
        }
    }
}

impl FromStr for Subcommand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown subcommand '{s}'")))
    }
}

/// Runs one subcommand and returns the paths it wrote.
pub fn run(cmd: Subcommand, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let dir = open_dir(cfg)?;
    let mut written = vec![dir.write_text("config.resolved.toml", &cfg.to_toml()?)?];
    log::info!("{}: writing to {}", cmd.name(), dir.root.display());
    written.extend(match cmd {
        Subcommand::Prep => prep(cfg, &dir)?,
        Subcommand::Train => train_step(cfg, &dir)?,
        Subcommand::Eval => eval_step(cfg, &dir)?,
        Subcommand::Explain => explain_step(cfg, &dir)?,
        Subcommand::Rank => rank_step(cfg, &dir)?,
        Subcommand::Reduce => reduce_step(cfg, &dir)?,
        Subcommand::Compare => compare_step(cfg, &dir)?,
        Subcommand::Bench => bench_step(cfg, &dir)?,
        Subcommand::Report => report::report_step(cfg, &dir)?,
    });
    Ok(written)
}

/// Runs `cmds` in order, stopping at the first error.
pub fn run_sequence(cmds: &[Subcommand], cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for &c in cmds {
        out.extend(run(c, cfg)?);
    }
    Ok(out)
}

/// The configured output directory, created if needed, stamped with the
/// configuration's provenance.
pub fn open_dir(cfg: &RunConfig) -> Result<ArtifactDir> {
    let root = cfg.output_dir();
    std::fs::create_dir_all(&root)?;
    Ok(ArtifactDir {
        root,
        provenance: Provenance {
            config_hash: cfg.hash(),
            seed: cfg.seed,
        },
    })
}

fn train_test_label(cfg: &RunConfig) -> String {
    let train = (cfg.split_ratio * 100.0).round();
    format!("{train}/{}", 100.0 - train)
}

// ---------------------------------------------------------------- prep

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrepSummary {
    pub data_path: PathBuf,
    pub dataset: Option<String>,
    pub n_rows: usize,
    pub n_original_features: usize,
    pub n_encoded_features: usize,
    pub class_counts: [usize; 2],
    pub n_train: usize,
    pub n_test: usize,
    pub encoder_hash: String,
    /// Deviations from the published row/column counts of a recognised dataset.
    pub preset_warnings: Vec<String>,
    pub warnings: Vec<String>,
}

fn fetch_hint() -> String {
    [KnownDataset::TelecomChurn, KnownDataset::CreditCardFraud]
        .iter()
        .map(|d| format!("{}: {}", d.name(), d.fetch_instructions()))
        .collect::<Vec<_>>()
        .join("; ")
}

fn read_header(path: &Path) -> Result<Vec<String>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    match rdr.records().next() {
        Some(rec) => Ok(rec?.iter().map(|h| h.trim().to_string()).collect()),
        None => Err(Error::Load {
            line: 1,
            column: String::new(),
            message: "missing header row".into(),
        }),
    }
}

fn prep(cfg: &RunConfig, dir: &ArtifactDir) -> Result<Vec<PathBuf>> {
    let data_path = cfg.data_path.clone().ok_or_else(|| {
        Error::Config(format!(
            "data_path is not set; datasets are not bundled ({})",
            fetch_hint()
        ))
    })?;
    if !data_path.is_file() {
        return Err(Error::Config(format!(
            "data file {} not found; datasets are not bundled ({})",
            data_path.display(),
            fetch_hint()
        )));
    }
    let header = read_header(&data_path)?;
    let preset = if cfg.use_presets {
        presets::detect(&header)
    } else {
        None
    };
    let schema: Option<FeatureSchema> = match (&cfg.schema_path, preset) {
        (Some(p), _) => Some(serde_json::from_str(&std::fs::read_to_string(p)?)?),
        (None, Some(d)) => d.schema(),
        (None, None) => None,
    };
    let fraud = preset == Some(KnownDataset::CreditCardFraud);
    let opts = LoadOptions {
        label_column: cfg
            .label_column
            .clone()
            .or_else(|| fraud.then(|| "Class".to_string())),
        positive_label: cfg
            .positive_label
            .clone()
            .or_else(|| fraud.then(|| "1".to_string())),
    };
    let (table, schema) = load_table(&data_path, schema.as_ref(), &opts)?;
    let plan = stratified_split(&table.labels, cfg.split_ratio, cfg.folds, cfg.seed)?;
    let encoder = fit_encoder(&table, &schema, &plan.train_indices, cfg.record_norm)?;
    let matrix = encode(&table, &encoder)?;

    let mut preset_warnings = Vec::new();
    if let Some(d) = preset {
        if !d.expected_rows().contains(&table.n_rows()) {
            preset_warnings.push(format!(
                "{}: {} rows, expected {:?}",
                d.name(),
                table.n_rows(),
                d.expected_rows()
            ));
        }
        if schema.n_original() != d.expected_original_features() {
            preset_warnings.push(format!(
                "{}: {} original features, expected {}",
                d.name(),
                schema.n_original(),
                d.expected_original_features()
            ));
        }
        if encoder.n_encoded() != d.expected_encoded_features() {
            preset_warnings.push(format!(
                "{}: {} encoded features, expected {}",
                d.name(),
                encoder.n_encoded(),
                d.expected_encoded_features()
            ));
        }
        for w in &preset_warnings {
            log::warn!("{w}");
        }
    }
    let encoder_hash = encoder.hash();
    let summary = PrepSummary {
        data_path,
        dataset: preset.map(|d| d.name().to_string()),
        n_rows: table.n_rows(),
        n_original_features: schema.n_original(),
        n_encoded_features: encoder.n_encoded(),
        class_counts: matrix.class_counts(),
        n_train: plan.train_indices.len(),
        n_test: plan.test_indices.len(),
        encoder_hash: encoder_hash.clone(),
        preset_warnings,
        warnings: encoder
            .warnings
            .iter()
            .chain(&matrix.warnings)
            .cloned()
            .collect(),
    };
    Ok(vec![
        write_encoded(dir, &matrix, &plan, &encoder_hash)?,
        dir.write_json("encoder.json", "encoder", &encoder)?,
        dir.write_json("split.json", "split", &plan)?,
        dir.write_json("schema.json", "schema", &schema)?,
        dir.write_json("prep.json", "prep", &summary)?,
    ])
}

fn write_encoded(
    dir: &ArtifactDir,
    m: &EncodedMatrix,
    plan: &SplitPlan,
    encoder_hash: &str,
) -> Result<PathBuf> {
    let mut split = vec![("test", String::new()); m.n_rows()];
    for (pos, &r) in plan.train_indices.iter().enumerate() {
        split[r] = ("train", plan.fold_of[pos].to_string());
    }
    dir.write_csv(
        "encoded.csv",
        &[("encoder_hash", encoder_hash.to_string())],
        |buf| {
            let mut w = csv::Writer::from_writer(buf);
            let mut header = vec![
                "row".to_string(),
                "split".into(),
                "fold".into(),
                "label".into(),
            ];
            header.extend(m.feature_names.iter().cloned());
            w.write_record(&header)?;
            for (r, row) in m.values.rows().into_iter().enumerate() {
                let mut rec = vec![
                    r.to_string(),
                    split[r].0.to_string(),
                    split[r].1.clone(),
                    m.labels[r].to_string(),
                ];
                rec.extend(row.iter().map(|v| v.to_string()));
                w.write_record(&rec)?;
            }
            w.flush()?;
            Ok(())
        },
    )
}

/// The encoded matrix and split written by `prep`.
pub struct Prepared {
    pub matrix: EncodedMatrix,
    pub plan: SplitPlan,
    pub encoder: EncoderState,
    /// Encoder hash recorded in `encoded.csv`.
    pub encoder_hash: String,
}

pub fn load_prepared(dir: &ArtifactDir) -> Result<Prepared> {
    let path = dir.require("encoded.csv", "prep")?;
    let encoder_hash = read_csv_comments(&path)?
        .remove("encoder_hash")
        .ok_or_else(|| Error::Mismatch("encoded.csv carries no encoder_hash".into()))?;
    let mut rdr = csv_reader(&path)?;
    let names: Vec<String> = rdr.headers()?.iter().skip(4).map(str::to_string).collect();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |column: &str, message: String| Error::Load {
            line: i + 2,
            column: column.to_string(),
            message,
        };
        if rec.len() != names.len() + 4 {
            return Err(bad(
                "",
                format!("{} fields, expected {}", rec.len(), names.len() + 4),
            ));
        }
        labels.push(
            rec[3]
                .parse::<u8>()
                .map_err(|e| bad("label", e.to_string()))?,
        );
        for (j, cell) in rec.iter().skip(4).enumerate() {
            values.push(
                cell.parse::<f64>()
                    .map_err(|e| bad(&names[j], e.to_string()))?,
            );
        }
    }
    let n = labels.len();
    let values = Array2::from_shape_vec((n, names.len()), values)
        .map_err(|e| Error::Shape(e.to_string()))?;
    let matrix = EncodedMatrix::new(names, values, labels)?;
    let plan: SplitPlan = dir.read_json("split.json", "prep")?.content;
    let encoder: EncoderState = dir.read_json("encoder.json", "prep")?.content;
    if plan.train_indices.len() + plan.test_indices.len() != n {
        return Err(Error::Mismatch(format!(
            "split.json covers {} rows, encoded.csv has {n}",
            plan.train_indices.len() + plan.test_indices.len()
        )));
    }
    if encoder.hash() != encoder_hash {
        return Err(Error::Mismatch(
            "encoder.json does not match encoded.csv".into(),
        ));
    }
    Ok(Prepared {
        matrix,
        plan,
        encoder,
        encoder_hash,
    })
}

// ---------------------------------------------------------------- train

fn train_step(cfg: &RunConfig, dir: &ArtifactDir) -> Result<Vec<PathBuf>> {
    let p = load_prepared(dir)?;
    let spec = parse_spec_with(&cfg.spec, p.matrix.n_features(), cfg.spec_options())?;
    let (params, history) = train_on_rows(
        &p.matrix,
        &p.plan.train_indices,
        &spec,
        &cfg.train_config(),
        cfg.resample_config(),
    )?;
    let ckpt = Checkpoint {
        params,
        encoder: Some(p.encoder),
        feature_names: p.matrix.feature_names.clone(),
    };
    let mut json: serde_json::Value = serde_json::from_str(&ckpt.to_json()?)?;
    json["run"] = serde_json::to_value(&dir.provenance)?;
    let ckpt_path = dir.write_text("checkpoint.json", &serde_json::to_string(&json)?)?;
    let hist = dir.write_csv("history.csv", &[], |buf| write_history(&history, buf))?;
    Ok(vec![ckpt_path, hist])
}

/// Loads the checkpoint and verifies it was trained on the prepared encoding.
pub fn load_model(dir: &ArtifactDir, prepared: &Prepared) -> Result<Parameters> {
    let path = dir.require("checkpoint.json", "train")?;
    let ckpt = Checkpoint::load(&path)?;
    let Some(enc) = &ckpt.encoder else {
        return Err(Error::Mismatch(
            "checkpoint carries no encoder state".into(),
        ));
    };
    let h = enc.hash();
    if h != prepared.encoder_hash {
        return Err(Error::Mismatch(format!(
            "checkpoint encoder hash {h} does not match the prepared matrix ({}); re-run `train`",
            prepared.encoder_hash
        )));
    }
    if ckpt.params.spec.input_len != prepared.matrix.n_features() {
        return Err(Error::Mismatch(format!(
            "checkpoint expects {} features, prepared matrix has {}",
            ckpt.params.spec.input_len,
            prepared.matrix.n_features()
        )));
    }
    Ok(ckpt.params)
}

// ---------------------------------------------------------------- eval

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSummary {
    pub test: MetricsReport,
    pub cross_validation: Option<MetricsReport>,
}

fn eval_step(cfg: &RunConfig, dir: &ArtifactDir) -> Result<Vec<PathBuf>> {
    let p = load_prepared(dir)?;
    let params = load_model(dir, &p)?;
    let test = &p.plan.test_indices;
    let preds = predict_rows(&params, &p.matrix, test)?;
    let labels: Vec<u8> = test.iter().map(|&r| p.matrix.labels[r]).collect();
    let label = format!("{}-{}", params.spec.text, p.matrix.n_features());
    let test_report = MetricsReport::aggregate(
        &label,
        "train_test",
        &rows_hash(&p.matrix, test),
        vec![compute_metrics(&preds, &labels)?],
    );
    let cv = if cfg.cross_validate {
        Some(
            cross_validate(
                &p.matrix,
                &params.spec,
                &cfg.train_config(),
                &p.plan,
                &cfg.cv_config(),
                &format!("{label} (cv)"),
            )?
            .report,
        )
    } else {
        None
    };
    let mut reports = vec![test_report.clone()];
    reports.extend(cv.clone());
    let md = metrics_markdown(&reports, &train_test_label(cfg));
    Ok(vec![
        dir.write_json(
            "metrics.json",
            "metrics",
            &EvalSummary {
                test: test_report,
                cross_validation: cv,
            },
        )?,
        dir.write_text("metrics.md", &md)?,
    ])
}

// ---------------------------------------------------------------- explain

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplainedRecord {
    pub record: usize,
    pub outcome: Outcome,
    pub attribution: AttributionVector,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributionSet {
    pub method: Method,
    pub feature_names: Vec<String>,
    pub records: Vec<ExplainedRecord>,
}

impl AttributionSet {
    /// Normalized attribution rows of one outcome group, in record order.
    pub fn normalized(&self, group: Outcome) -> Vec<(usize, Vec<f64>)> {
        self.records
            .iter()
            .filter(|r| r.outcome == group)
            .map(|r| (r.record, normalize_heatmap(&r.attribution.values)))
            .collect()
    }
}

/// Per-record test predictions: dataset row, label, predicted class, P(class 1).
#[derive(Debug, Clone, PartialEq)]
pub struct TestPrediction {
    pub record: usize,
    pub label: u8,
    pub prediction: u8,
    pub probability: f64,
}

impl TestPrediction {
    pub fn outcome(&self) -> Outcome {
        Outcome::of(self.prediction, self.label)
    }
}

fn test_predictions(params: &Parameters, p: &Prepared) -> Result<Vec<TestPrediction>> {
    let mut out = Vec::with_capacity(p.plan.test_indices.len());
    for chunk in p.plan.test_indices.chunks(2048) {
        let probs = forward_batch(params, p.matrix.values.select(Axis(0), chunk).view())?;
        for (&r, row) in chunk.iter().zip(probs.rows()) {
            out.push(TestPrediction {
                record: r,
                label: p.matrix.labels[r],
                prediction: u8::from(row[1] > row[0]),
                probability: row[1],
            });
        }
    }
    Ok(out)
}

/// Column means over the real training rows; the SHAP replacement record.
fn training_means(p: &Prepared) -> Vec<f64> {
    p.matrix
        .values
        .select(Axis(0), &p.plan.train_indices)
        .mean_axis(Axis(0))
        .expect("training split is non-empty")
        .to_vec()
}

fn explain_step(cfg: &RunConfig, dir: &ArtifactDir) -> Result<Vec<PathBuf>> {
    let p = load_prepared(dir)?;
    let params = load_model(dir, &p)?;
    let preds = test_predictions(&params, &p)?;
    let mut written = vec![dir.write_csv("predictions.csv", &[], |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["record", "label", "prediction", "probability_1", "outcome"])?;
        for t in &preds {
            w.write_record([
                t.record.to_string(),
                t.label.to_string(),
                t.prediction.to_string(),
                t.probability.to_string(),
                t.outcome().short().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?];

    let ecfg = cfg.explain_config(training_means(&p));
    let names = &p.matrix.feature_names;
    // Surrogates are costly: the first N TP and first N TN test records.
    let n = cfg.surrogate_max_records;
    let mut surrogate_rows: Vec<&TestPrediction> = Vec::new();
    for group in [Outcome::TruePositive, Outcome::TrueNegative] {
        surrogate_rows.extend(preds.iter().filter(|t| t.outcome() == group).take(n));
    }
    surrogate_rows.sort_by_key(|t| t.record);

    for &method in &cfg.explain_methods {
        let rows: Vec<&TestPrediction> = match method {
            Method::Lrp => preds.iter().collect(),
            _ => surrogate_rows.clone(),
        };
        log::info!("explain: {} on {} records", method.name(), rows.len());
        let mut records = Vec::with_capacity(rows.len());
        for t in rows {
            let x = p.matrix.values.row(t.record).to_vec();
            records.push(ExplainedRecord {
                record: t.record,
                outcome: t.outcome(),
                attribution: explain_record(&params, &x, t.record, method, &ecfg)?,
            });
        }
        let set = AttributionSet {
            method,
            feature_names: names.clone(),
            records,
        };
        let m = method.name();
        let pairs: Vec<(usize, &AttributionVector)> = set
            .records
            .iter()
            .map(|r| (r.record, &r.attribution))
            .collect();
        written.push(dir.write_csv(&format!("attributions_{m}.csv"), &[], |buf| {
            write_attributions_csv(names, &pairs, buf)
        })?);
        written.push(dir.write_json(&format!("attributions_{m}.json"), "attributions", &set)?);
        written.extend(write_heatmaps(cfg, dir, &set)?);
    }
    Ok(written)
}

fn write_heatmaps(
    cfg: &RunConfig,
    dir: &ArtifactDir,
    set: &AttributionSet,
) -> Result<Vec<PathBuf>> {
    let m = set.method.name();
    let desc = format!(
        "config_hash={} seed={} method={m} threshold={}",
        dir.provenance.config_hash, dir.provenance.seed, cfg.rank_threshold
    );
    let mut written = Vec::new();
    for group in [Outcome::TruePositive, Outcome::TrueNegative] {
        let g = group.short().to_ascii_lowercase();
        let rows = set.normalized(group);
        let Some((first_id, first)) = rows.first() else {
            log::warn!("explain: no {group} records; skipping {m} heatmaps for that group");
            continue;
        };
        let local = HeatmapMatrix {
            feature_names: set.feature_names.clone(),
            record_ids: vec![*first_id],
            rows: vec![first.clone()],
            mean: None,
            group: Some(group),
        };
        let refs: Vec<(usize, &[f64])> = rows.iter().map(|(id, v)| (*id, v.as_slice())).collect();
        let global = aggregate_global(&set.feature_names, &refs, group)?;
        for (scope, hm) in [("local", &local), ("global", &global)] {
            let stem = format!("heatmap_{m}_{scope}_{g}");
            written.push(dir.write_csv(&format!("{stem}.csv"), &[], |buf| hm.write_csv(buf))?);
            let title = format!(
                "{} {scope} heatmap, {group} ({} records)",
                set.method.display(),
                hm.rows.len()
            );
            let svg = dir.path(&format!("{stem}.svg"));
            write_heatmap_svg(hm, &title, cfg.rank_threshold, &desc, &svg)?;
            written.push(svg);
        }
    }
    Ok(written)
}

fn read_attributions(dir: &ArtifactDir, method: Method) -> Result<AttributionSet> {
    Ok(dir
        .read_json(&format!("attributions_{}.json", method.name()), "explain")?
        .content)
}

// ---------------------------------------------------------------- rank

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupRanking {
    pub aggregate: ClassAggregate,
    pub table: RankTable,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodRanking {
    pub method: Method,
    pub tp: GroupRanking,
    pub tn: GroupRanking,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankSummary {
    pub threshold: f64,
    pub methods: Vec<MethodRanking>,
}

impl RankSummary {
    pub fn get(&self, m: Method) -> Option<&MethodRanking> {
        self.methods.iter().find(|r| r.method == m)
    }
}

fn rank_group(
    set: &AttributionSet,
    group: Outcome,
    threshold: f64,
    cfg: &RunConfig,
) -> Result<GroupRanking> {
    let rows: Vec<Vec<f64>> = set.normalized(group).into_iter().map(|(_, v)| v).collect();
    let rc = crate::ranking::RankingConfig {
        threshold,
        ..cfg.ranking_config()
    };
    let (aggregate, table) =
        rank_features(set.method.name(), &set.feature_names, &rows, group, &rc)?;
    Ok(GroupRanking { aggregate, table })
}

fn rank_step(cfg: &RunConfig, dir: &ArtifactDir) -> Result<Vec<PathBuf>> {
    let sets: Vec<AttributionSet> = cfg
        .explain_methods
        .iter()
        .map(|&m| read_attributions(dir, m))
        .collect::<Result<_>>()?;
    cfg.ranking_config().validate(sets[0].feature_names.len())?;
    let mut methods = Vec::new();
    for set in &sets {
        methods.push(MethodRanking {
            method: set.method,
            tp: rank_group(set, Outcome::TruePositive, cfg.rank_threshold, cfg)?,
            tn: rank_group(set, Outcome::TrueNegative, cfg.rank_threshold, cfg)?,
        });
    }
    let summary = RankSummary {
        threshold: cfg.rank_threshold,
        methods,
    };
    let lrp = summary.get(Method::Lrp).expect("lrp is always explained");
    let subset = select_subset(&lrp.tp.table, &lrp.tn.table, &cfg.ranking_config())?;
    let mut written = vec![
        dir.write_json("rank.json", "rank", &summary)?,
        dir.write_json("subset.json", "subset", &subset)?,
    ];
    for (g, pick) in [("tp", 0usize), ("tn", 1)] {
        let tables: Vec<RankTable> = summary
            .methods
            .iter()
            .map(|m| {
                if pick == 0 {
                    m.tp.table.clone()
                } else {
                    m.tn.table.clone()
                }
            })
            .collect();
        written.push(dir.write_csv(
            &format!("rank_{g}.csv"),
            &[("threshold", cfg.rank_threshold.to_string())],
            |buf| write_rank_tables(&tables, buf),
        )?);
    }
    let names = &sets[0].feature_names;
    written.push(dir.write_csv("tau_sweep.csv", &[], |buf| {
        let mut w = csv::Writer::from_writer(buf);
        let mut header = vec![
            "threshold".to_string(),
            "method".into(),
            "group".into(),
            "records".into(),
            "top".into(),
        ];
        header.extend(names.iter().cloned());
        w.write_record(&header)?;
        for tau in TAU_SWEEP {
            for set in &sets {
                for group in [Outcome::TruePositive, Outcome::TrueNegative] {
                    let r = rank_group(set, group, tau, cfg)?;
                    let top: Vec<&str> = r
                        .table
                        .top(cfg.rank_per_class_top)
                        .iter()
                        .map(|&i| names[i].as_str())
                        .collect();
                    let mut rec = vec![
                        tau.to_string(),
                        set.method.name().to_string(),
                        group.short().to_string(),
                        r.aggregate.n_records.to_string(),
                        top.join(";"),
                    ];
                    rec.extend(r.aggregate.counts.iter().map(|c| c.to_string()));
                    w.write_record(&rec)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    })?);
    Ok(written)
}

// ---------------------------------------------------------------- compare

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareSummary {
    pub top_k: usize,
    pub tp: OverlapReport,
    pub tn: OverlapReport,
}

fn compare_step(cfg: &RunConfig, dir: &ArtifactDir) -> Result<Vec<PathBuf>> {
    let summary: RankSummary = dir.read_json("rank.json", "rank")?.content;
    if summary.methods.len() < 2 {
        return Err(Error::Config(
            "compare needs at least two explanation methods".into(),
        ));
    }
    // LRP first so columns follow its order.
    let mut ordered: Vec<&MethodRanking> = summary.methods.iter().collect();
    ordered.sort_by_key(|m| m.method);
    let tp: Vec<RankTable> = ordered.iter().map(|m| m.tp.table.clone()).collect();
    let tn: Vec<RankTable> = ordered.iter().map(|m| m.tn.table.clone()).collect();
    let report = CompareSummary {
        top_k: cfg.compare_top_k,
        tp: compare_rankings(&tp, cfg.compare_top_k)?,
        tn: compare_rankings(&tn, cfg.compare_top_k)?,
    };
    let extra = [
        ("values", "rank".to_string()),
        ("threshold", summary.threshold.to_string()),
    ];
    Ok(vec![
        dir.write_csv("compare_tp.csv", &extra, |buf| write_rank_tables(&tp, buf))?,
        dir.write_csv("compare_tn.csv", &extra, |buf| write_rank_tables(&tn, buf))?,
        dir.write_json("overlap.json", "overlap", &report)?,
    ])
}

// ---------------------------------------------------------------- reduce

fn reduce_step(cfg: &RunConfig, dir: &ArtifactDir) -> Result<Vec<PathBuf>> {
    let p = load_prepared(dir)?;
    let subset: SubsetSelection = dir.read_json("subset.json", "rank")?.content;
    let study = reduced_feature_study(
        &p.matrix,
        &p.plan,
        &subset.indices(),
        &cfg.study_specs(),
        cfg.reduce_baseline,
        cfg.spec_options(),
        &cfg.train_config(),
        &cfg.cv_config(),
    )?;
    Ok(vec![
        dir.write_json("study.json", "study", &study)?,
        dir.write_text("study.md", &study_markdown(&study, &train_test_label(cfg)))?,
    ])
}

// ---------------------------------------------------------------- bench

fn bench_step(cfg: &RunConfig, dir: &ArtifactDir) -> Result<Vec<PathBuf>> {
    let p = load_prepared(dir)?;
    let params = load_model(dir, &p)?;
    let rows: Vec<usize> = p
        .plan
        .test_indices
        .iter()
        .copied()
        .take(cfg.bench_records)
        .collect();
    let records = p.matrix.values.select(Axis(0), &rows);
    let ecfg = cfg.explain_config(training_means(&p));
    let report = benchmark_latency(
        &params,
        records.view(),
        &cfg.explain_methods,
        &ecfg,
        cfg.bench_repetitions,
    )?;
    Ok(vec![
        dir.write_json("timing.json", "timing", &report)?,
        dir.write_text("timing.md", &report.markdown())?,
    ])
}

/// Artifacts whose bytes depend on wall-clock time.
pub const TIMING_ARTIFACTS: [&str; 2] = ["timing.json", "timing.md"];
