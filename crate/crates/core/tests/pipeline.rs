mod common;

use std::path::Path;

use tablrp::pipeline::{
    load_prepared, read_csv_comments, run, run_sequence, ArtifactDir, Provenance, Subcommand,
};
use tablrp::Error;

fn setup() -> (tempfile::TempDir, tablrp::pipeline::RunConfig) {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    common::write_synthetic_csv(&data, 300, 11);
    let cfg = common::tiny_config(&data, &dir.path().join("out"));
    (dir, cfg)
}

fn files_with(root: &Path, ext: &str) -> Vec<std::path::PathBuf> {
    let mut v: Vec<_> = std::fs::read_dir(root)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == ext))
        .collect();
    v.sort();
    v
}

#[test]
fn full_sequence_writes_stamped_artifacts() {
    let (_tmp, cfg) = setup();
    run_sequence(&Subcommand::ALL, &cfg).unwrap();
    let out = cfg.output_dir();
    for name in [
        "config.resolved.toml",
        "encoded.csv",
        "encoder.json",
        "split.json",
        "schema.json",
        "prep.json",
        "checkpoint.json",
        "history.csv",
        "metrics.json",
        "metrics.md",
        "predictions.csv",
        "attributions_lrp.csv",
        "attributions_lime.json",
        "attributions_shap.json",
        "heatmap_lrp_local_tp.svg",
        "heatmap_lrp_global_tn.csv",
        "rank.json",
        "subset.json",
        "rank_tp.csv",
        "tau_sweep.csv",
        "compare_tp.csv",
        "overlap.json",
        "study.json",
        "study.md",
        "timing.json",
        "report.md",
    ] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
    let hash = cfg.hash();
    for p in files_with(&out, "csv") {
        let c = read_csv_comments(&p).unwrap();
        assert_eq!(c.get("config_hash"), Some(&hash), "{}", p.display());
        assert_eq!(c.get("seed").map(String::as_str), Some("0"));
    }
    for p in files_with(&out, "json") {
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
        let h = v
            .get("config_hash")
            .or_else(|| v.get("run").and_then(|r| r.get("config_hash")));
        assert_eq!(
            h.and_then(|h| h.as_str()),
            Some(hash.as_str()),
            "{}",
            p.display()
        );
    }
    for p in files_with(&out, "svg") {
        assert!(std::fs::read_to_string(&p).unwrap().contains(&hash));
    }
    let report = std::fs::read_to_string(out.join("report.md")).unwrap();
    assert!(!report.contains("Not available"), "{report}");
    let resolved = std::fs::read_to_string(out.join("config.resolved.toml")).unwrap();
    assert!(resolved.contains("spec = \"C2-F8-O2\""));
}

#[test]
fn later_steps_name_their_missing_prerequisite() {
    let (_tmp, cfg) = setup();
    for (cmd, producer) in [(Subcommand::Train, "prep"), (Subcommand::Rank, "explain")] {
        match run(cmd, &cfg) {
            Err(Error::MissingArtifact { subcommand, .. }) => assert_eq!(subcommand, producer),
            other => panic!("{cmd:?}: {other:?}"),
        }
    }
    run(Subcommand::Prep, &cfg).unwrap();
    match run(Subcommand::Explain, &cfg) {
        Err(Error::MissingArtifact { subcommand, path }) => {
            assert_eq!(subcommand, "train");
            assert!(path.ends_with("checkpoint.json"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn explain_rejects_checkpoint_from_another_encoding() {
    let (_tmp, cfg) = setup();
    run_sequence(&[Subcommand::Prep, Subcommand::Train], &cfg).unwrap();
    // Re-preparing with another split seed refits the encoder on other rows.
    let mut other = cfg.clone();
    other.seed = 5;
    run(Subcommand::Prep, &other).unwrap();
    match run(Subcommand::Explain, &cfg) {
        Err(e @ Error::Mismatch(_)) => assert!(e.to_string().contains("encoder hash"), "{e}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn prepared_matrix_reads_back_exactly() {
    let (_tmp, cfg) = setup();
    run(Subcommand::Prep, &cfg).unwrap();
    let dir = ArtifactDir {
        root: cfg.output_dir(),
        provenance: Provenance {
            config_hash: cfg.hash(),
            seed: cfg.seed,
        },
    };
    let p = load_prepared(&dir).unwrap();
    assert_eq!(p.matrix.n_rows(), 300);
    // 4 numeric + 3 one-hot + 1 binary; the id column is ignored.
    assert_eq!(p.matrix.n_features(), 8);
    assert!(p.matrix.values.iter().all(|v| (0.0..=1.0).contains(v)));
    assert_eq!(p.encoder.hash(), p.encoder_hash);
}

#[test]
fn missing_data_file_explains_how_to_fetch() {
    let (tmp, mut cfg) = setup();
    cfg.data_path = Some(tmp.path().join("absent.csv"));
    let e = run(Subcommand::Prep, &cfg).unwrap_err();
    assert!(e.to_string().contains("kaggle"), "{e}");
}

#[test]
fn churn_layout_is_recognised_and_checked() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("churn.csv");
    common::write_churn_like_csv(&data, 400, 3);
    let cfg = tablrp::pipeline::RunConfig::load(
        None,
        &[
            ("data_path".into(), data.display().to_string()),
            (
                "output_dir".into(),
                tmp.path().join("out").display().to_string(),
            ),
        ],
    )
    .unwrap();
    run(Subcommand::Prep, &cfg).unwrap();
    let dir = tablrp::pipeline::open_dir(&cfg).unwrap();
    let prep: tablrp::pipeline::PrepSummary = dir.read_json("prep.json", "prep").unwrap().content;
    assert_eq!(prep.dataset.as_deref(), Some("telecom-churn"));
    assert_eq!(
        (prep.n_original_features, prep.n_encoded_features),
        (19, 28)
    );
    assert_eq!(prep.preset_warnings.len(), 1, "{:?}", prep.preset_warnings);
    assert!(prep.preset_warnings[0].contains("400 rows"));
    assert_eq!(prep.n_test, 80);
}
