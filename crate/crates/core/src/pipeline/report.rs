//! Markdown bundle of whatever artifacts exist in the output directory.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::de::DeserializeOwned;

use super::{
    ArtifactDir, CompareSummary, EvalSummary, PrepSummary, RankSummary, RunConfig, TIMING_ARTIFACTS,
};
use crate::error::Result;
use crate::evaluation::{metrics_markdown, study_markdown, ReducedFeatureStudy, TimingReport};
use crate::ranking::SubsetSelection;

fn optional<T: DeserializeOwned>(dir: &ArtifactDir, name: &str) -> Result<Option<T>> {
    if dir.path(name).is_file() {
        Ok(Some(dir.read_json::<T>(name, "")?.content))
    } else {
        Ok(None)
    }
}

fn not_run(s: &mut String, cmd: &str) {
    let _ = writeln!(s, "_Not available: run `{cmd}`._\n");
}

pub(super) fn report_step(cfg: &RunConfig, dir: &ArtifactDir) -> Result<Vec<PathBuf>> {
    let split = super::train_test_label(cfg);
    let mut s = String::from("# Run report\n\n");
    let _ = writeln!(s, "- config hash: `{}`", dir.provenance.config_hash);
    let _ = writeln!(s, "- seed: {}", dir.provenance.seed);
    let _ = writeln!(s, "- architecture: `{}`\n", cfg.spec);

    s.push_str("## Data\n\n");
    match optional::<PrepSummary>(dir, "prep.json")? {
        Some(p) => {
            let _ = writeln!(s, "- source: `{}`", p.data_path.display());
            if let Some(d) = &p.dataset {
                let _ = writeln!(s, "- recognised dataset: {d}");
            }
            let _ = writeln!(
                s,
                "- rows: {} ({} negative, {} positive); train {}, test {}",
                p.n_rows, p.class_counts[0], p.class_counts[1], p.n_train, p.n_test
            );
            let _ = writeln!(
                s,
                "- features: {} original, {} encoded",
                p.n_original_features, p.n_encoded_features
            );
            for w in p.preset_warnings.iter().chain(&p.warnings) {
                let _ = writeln!(s, "- warning: {w}");
            }
            s.push('\n');
        }
        None => not_run(&mut s, "prep"),
    }

    s.push_str("## Classification\n\n");
    match optional::<EvalSummary>(dir, "metrics.json")? {
        Some(e) => {
            let mut reports = vec![e.test];
            reports.extend(e.cross_validation);
            s.push_str(&metrics_markdown(&reports, &split));
            s.push('\n');
        }
        None => not_run(&mut s, "eval"),
    }

    s.push_str("## Heatmaps\n\n");
    let mut svgs: Vec<String> = std::fs::read_dir(&dir.root)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with("heatmap_") && n.ends_with(".svg"))
        .collect();
    svgs.sort();
    if svgs.is_empty() {
        not_run(&mut s, "explain");
    } else {
        for n in &svgs {
            let _ = writeln!(s, "![{}]({n})", n.trim_end_matches(".svg"));
        }
        s.push('\n');
    }

    s.push_str("## Feature ranking\n\n");
    match optional::<RankSummary>(dir, "rank.json")? {
        Some(r) => {
            let k = cfg.rank_per_class_top;
            let _ = writeln!(
                s,
                "Threshold {}; top {k} per method and group.\n",
                r.threshold
            );
            s.push_str("| Method | Group | Records | Top features |\n|---|---|---|---|\n");
            for m in &r.methods {
                for g in [&m.tp, &m.tn] {
                    let top: Vec<&str> = g
                        .table
                        .top(k)
                        .iter()
                        .map(|&i| g.table.feature_names[i].as_str())
                        .collect();
                    let _ = writeln!(
                        s,
                        "| {} | {} | {} | {} |",
                        m.method.display(),
                        g.aggregate.group,
                        g.aggregate.n_records,
                        top.join(", ")
                    );
                }
            }
            s.push('\n');
        }
        None => not_run(&mut s, "rank"),
    }
    if let Some(sub) = optional::<SubsetSelection>(dir, "subset.json")? {
        let names: Vec<String> = sub
            .features
            .iter()
            .map(|f| format!("{} ({})", f.name, f.source))
            .collect();
        let _ = writeln!(
            s,
            "Selected subset ({}): {}\n",
            names.len(),
            names.join(", ")
        );
    }

    s.push_str("## Method agreement\n\n");
    match optional::<CompareSummary>(dir, "overlap.json")? {
        Some(c) => {
            for (g, o) in [("TP", &c.tp), ("TN", &c.tn)] {
                let pairs: Vec<String> = o
                    .pairwise
                    .iter()
                    .map(|p| format!("{}/{}: {}", p.a, p.b, p.overlap))
                    .collect();
                let _ = writeln!(
                    s,
                    "- {g}, top {}: {}; common to all: {} ({})",
                    c.top_k,
                    pairs.join(", "),
                    o.common,
                    o.common_features.join(", ")
                );
            }
            s.push_str("\nFull rank tables: `compare_tp.csv`, `compare_tn.csv`.\n\n");
        }
        None => not_run(&mut s, "compare"),
    }

    s.push_str("## Reduced-feature study\n\n");
    match optional::<ReducedFeatureStudy>(dir, "study.json")? {
        Some(st) => {
            s.push_str(&study_markdown(&st, &split));
            s.push('\n');
        }
        None => not_run(&mut s, "reduce"),
    }

    s.push_str("## Explanation latency\n\n");
    match optional::<TimingReport>(dir, TIMING_ARTIFACTS[0])? {
        Some(t) => {
            s.push_str(&t.markdown());
            s.push('\n');
        }
        None => not_run(&mut s, "bench"),
    }
    Ok(vec![dir.write_text("report.md", &s)?])
}
