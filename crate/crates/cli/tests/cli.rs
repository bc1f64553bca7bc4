use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use evcoref::{Manifest, PipelineConfig};
use serde_json::{json, Value};

fn evcoref(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evcoref"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = evcoref(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    evcoref(dir, args).status.code().unwrap()
}

fn tiny_config(dir: &Path) {
    let encoder = json!({
        "features": { "context_window": 3, "pos_window": 1, "word_dim": 6, "pos_dim": 3, "lemma_dim": 4 },
        "context_features": 5,
        "pos_features": 3
    });
    let optimizer = json!({ "epochs": 2 });
    let cfg = json!({
        "splits": { "train": [1, 2], "dev": [3], "test": [4] },
        "extractor": { "encoder": encoder, "hidden": [6, 4], "optimizer": optimizer },
        "coref": { "encoder": encoder, "cn_hidden": [6, 4], "sn_hidden": [6, 4], "optimizer": optimizer }
    });
    fs::write(dir.join("cfg.json"), cfg.to_string()).unwrap();
}

fn synth(dir: &Path, name: &str, seed: &str) {
    ok(
        dir,
        &[
            "gen-synth",
            "--output",
            name,
            "--topics",
            "4",
            "--docs-per-topic",
            "2",
            "--noise",
            "0.1",
            "--seed",
            seed,
        ],
    );
}

#[test]
fn show_config_prints_the_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(dir.path(), &["--show-config"]);
    let cfg: PipelineConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(cfg, PipelineConfig::default());

    let text = ok(
        dir.path(),
        &[
            "--show-config",
            "train-coref",
            "--mode",
            "C-NN",
            "--seed",
            "9",
        ],
    );
    let cfg: PipelineConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(cfg.seed, 9);
    assert_eq!(cfg.mode, evcoref::SystemMode::CNn);
}

#[test]
fn usage_and_data_errors_have_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(d, &["run", "--no-such-flag"]), 1);
    assert_eq!(code(d, &["train-coref", "--mode", "fancy"]), 1);
    assert_eq!(code(d, &[]), 1);
    fs::write(d.join("bad.json"), r#"{"unknown_field": 1}"#).unwrap();
    assert_eq!(code(d, &["--config", "bad.json", "run"]), 1);
    assert_eq!(code(d, &["stats", "--corpus", "missing.jsonl"]), 2);
    fs::write(d.join("broken.jsonl"), "{not json}\n").unwrap();
    assert_eq!(
        code(d, &["ingest", "broken.jsonl", "--output", "x.jsonl"]),
        2
    );
    assert_eq!(code(d, &["--help"]), 0);
}

#[test]
fn ingest_and_stats_report_the_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "raw.jsonl", "3");
    ok(d, &["ingest", "raw.jsonl", "--output", "clean.jsonl"]);
    assert_eq!(
        fs::read(d.join("raw.jsonl")).unwrap(),
        fs::read(d.join("clean.jsonl")).unwrap()
    );
    assert!(d.join("clean.jsonl.manifest.json").exists());

    let table = ok(d, &["stats", "--corpus", "clean.jsonl", "--out-dir", "out"]);
    assert!(table.contains("#WDChains"), "{table}");
    assert!(!table.contains("outside the configured topics"), "{table}");
    let json: Value = serde_json::from_str(&ok(
        d,
        &[
            "--json-report",
            "stats",
            "--corpus",
            "clean.jsonl",
            "--out-dir",
            "out",
        ],
    ))
    .unwrap();
    assert_eq!(json["rows"][3]["split"], "Total");
    assert_eq!(json["rows"][0]["documents"], 8);
    assert_eq!(json["rows"][3]["documents"], 8);
    assert_eq!(json["dropped"], 0);
    assert!(d.join("out/stats.manifest.json").exists());
}

#[test]
fn scoring_a_file_against_itself_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    tiny_config(d);
    synth(d, "c.jsonl", "5");
    ok(
        d,
        &[
            "--config",
            "cfg.json",
            "run",
            "--corpus",
            "c.jsonl",
            "--out-dir",
            "out",
            "--mention-source",
            "gold",
        ],
    );
    let json: Value = serde_json::from_str(&ok(
        d,
        &[
            "--json-report",
            "score",
            "--gold",
            "out/gold_chains.jsonl",
            "--pred",
            "out/gold_chains.jsonl",
            "--out-dir",
            "s",
        ],
    ))
    .unwrap();
    for metric in ["muc", "b_cubed", "ceaf_e"] {
        assert_eq!(json[metric]["f1"], 1.0, "{metric}");
    }
    assert_eq!(json["conll_f1"], 1.0);
    let table = ok(
        d,
        &[
            "score",
            "--gold",
            "out/gold_chains.jsonl",
            "--pred",
            "out/lemma_chains.jsonl",
            "--out-dir",
            "s",
        ],
    );
    assert!(table.contains("CoNLL"), "{table}");
}

#[test]
fn training_replayed_from_its_manifest_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    tiny_config(d);
    synth(d, "c.jsonl", "6");
    ok(
        d,
        &[
            "--config",
            "cfg.json",
            "train-mention",
            "--corpus",
            "c.jsonl",
            "--out-dir",
            "m",
        ],
    );
    ok(
        d,
        &[
            "--config",
            "cfg.json",
            "train-coref",
            "--corpus",
            "c.jsonl",
            "--out-dir",
            "m",
            "--mode",
            "C-MLNN",
        ],
    );

    for command in ["train-mention", "train-coref"] {
        let manifest = format!("m/{command}.manifest.json");
        let before = fs::read(d.join(&manifest)).unwrap();
        let ckpt_before = Manifest::load(&d.join(&manifest)).unwrap().outputs;
        fs::rename(d.join(&manifest), d.join("replay.json")).unwrap();
        ok(d, &["--manifest", "replay.json"]);
        assert_eq!(fs::read(d.join(&manifest)).unwrap(), before, "{command}");
        assert_eq!(
            Manifest::load(&d.join(&manifest)).unwrap().outputs,
            ckpt_before
        );
    }

    let report = ok(
        d,
        &[
            "--config",
            "cfg.json",
            "--json-report",
            "predict",
            "--corpus",
            "c.jsonl",
            "--out-dir",
            "m",
            "--mode",
            "C-MLNN",
        ],
    );
    let report: Value = serde_json::from_str(&report).unwrap();
    assert_eq!(report["mode"], "C-MLNN");
    assert!(report["coref_best_epoch"].is_null());
    let manifest = Manifest::load(&d.join("m/predict.manifest.json")).unwrap();
    assert!(manifest
        .inputs
        .keys()
        .any(|k| k.ends_with("coref.ckpt.json")));
    assert!(manifest.outputs.contains_key("chains.jsonl"));
}

#[test]
fn run_twice_gives_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    tiny_config(d);
    synth(d, "c.jsonl", "7");
    ok(
        d,
        &[
            "--config",
            "cfg.json",
            "run",
            "--corpus",
            "c.jsonl",
            "--out-dir",
            "a",
        ],
    );
    ok(
        d,
        &["--manifest", "a/run.manifest.json", "run", "--out-dir", "b"],
    );
    for file in [
        "report.json",
        "report.txt",
        "chains.jsonl",
        "pairs.jsonl",
        "mention.ckpt.json",
        "coref.ckpt.json",
    ] {
        assert_eq!(
            fs::read(d.join("a").join(file)).unwrap(),
            fs::read(d.join("b").join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn predict_without_checkpoints_or_with_foreign_vocab_fails() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    tiny_config(d);
    synth(d, "a.jsonl", "8");
    synth(d, "b.jsonl", "9");
    assert_eq!(
        code(
            d,
            &[
                "--config",
                "cfg.json",
                "predict",
                "--corpus",
                "a.jsonl",
                "--out-dir",
                "m"
            ]
        ),
        2
    );
    ok(
        d,
        &[
            "--config",
            "cfg.json",
            "train-coref",
            "--corpus",
            "a.jsonl",
            "--out-dir",
            "m",
        ],
    );
    let out = evcoref(
        d,
        &[
            "--config",
            "cfg.json",
            "predict",
            "--corpus",
            "b.jsonl",
            "--out-dir",
            "m",
            "--mention-source",
            "gold",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("vocabulary fingerprint"));
}
