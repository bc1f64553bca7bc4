use std::path::Path;

use evcoref::artifact::read_jsonl;
use evcoref::corpus::{generate_synthetic_corpus, load_corpus, write_corpus, SyntheticSpec};
use evcoref::features::FeatureConfig;
use evcoref::nn::OptimizerConfig;
use evcoref::pipeline::{sha256_file, write_run, SplitConfig};
use evcoref::{
    run_pipeline, ChainSet, Corpus, EncoderConfig, Error, ExtractorConfig, Manifest, MentionSource,
    MlnnConfig, PipelineConfig, SystemMode,
};

fn corpus(seed: u64) -> Corpus {
    generate_synthetic_corpus(&SyntheticSpec {
        seed,
        n_topics: 4,
        docs_per_topic: 2,
        noise: 0.1,
    })
    .unwrap()
}

fn tiny_config() -> PipelineConfig {
    let encoder = EncoderConfig {
        features: FeatureConfig {
            context_window: 3,
            pos_window: 1,
            word_dim: 6,
            pos_dim: 3,
            lemma_dim: 4,
        },
        context_features: 5,
        pos_features: 3,
    };
    let optimizer = OptimizerConfig {
        epochs: 2,
        ..OptimizerConfig::default()
    };
    PipelineConfig {
        splits: SplitConfig {
            train: [1, 2].into_iter().collect(),
            dev: [3].into_iter().collect(),
            test: [4].into_iter().collect(),
        },
        extractor: ExtractorConfig {
            encoder: encoder.clone(),
            hidden: [6, 4],
            optimizer: optimizer.clone(),
            ..ExtractorConfig::default()
        },
        coref: MlnnConfig {
            encoder,
            cn_hidden: [6, 4],
            sn_hidden: [6, 4],
            optimizer,
            ..MlnnConfig::default()
        },
        ..PipelineConfig::default()
    }
}

#[test]
fn corpus_survives_a_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.jsonl");
    let c = corpus(1);
    write_corpus(&path, &c).unwrap();
    assert_eq!(load_corpus(&path).unwrap(), c);
}

#[test]
fn written_run_matches_manifest_and_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config();
    let run = run_pipeline(&cfg, &corpus(2)).unwrap();
    let mut manifest = Manifest::new("run", &cfg);
    write_run(dir.path(), &run, &mut manifest).unwrap();
    manifest.save(&dir.path().join("manifest.json")).unwrap();

    let loaded = Manifest::load(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(loaded, manifest);
    for name in [
        "mention.ckpt.json",
        "coref.ckpt.json",
        "mentions.jsonl",
        "pairs.jsonl",
        "chains.jsonl",
        "lemma_chains.jsonl",
        "gold_chains.jsonl",
        "report.json",
        "report.txt",
    ] {
        let hash = sha256_file(&dir.path().join(name)).unwrap();
        assert_eq!(loaded.outputs.get(name), Some(&hash), "{name}");
    }

    let chains = read_jsonl::<ChainSet>(&dir.path().join("chains.jsonl")).unwrap();
    assert_eq!(chains.header.unwrap().stage, "chains");
    let chains: Vec<ChainSet> = chains.records.into_iter().map(|(_, c)| c).collect();
    assert_eq!(chains, run.predictions.chains);
}

#[test]
fn saved_checkpoints_reproduce_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(3);
    let mut cfg = tiny_config();
    let first = run_pipeline(&cfg, &c).unwrap();
    let mut manifest = Manifest::new("run", &cfg);
    write_run(dir.path(), &first, &mut manifest).unwrap();

    cfg.paths.mention_checkpoint = Some(dir.path().join("mention.ckpt.json"));
    cfg.paths.coref_checkpoint = Some(dir.path().join("coref.ckpt.json"));
    let second = run_pipeline(&cfg, &c).unwrap();
    assert!(second.trained.is_empty());
    assert_eq!(second.report.coref_best_epoch, None);
    assert_eq!(second.report.system, first.report.system);
    assert_eq!(second.predictions.chains, first.predictions.chains);
}

#[test]
fn checkpoint_from_another_vocabulary_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config();
    cfg.mention_source = MentionSource::Gold;
    let run = run_pipeline(&cfg, &corpus(4)).unwrap();
    let path = dir.path().join("coref.ckpt.json");
    run.trained[0].1.save(&path).unwrap();

    cfg.paths.coref_checkpoint = Some(path);
    let err = run_pipeline(&cfg, &corpus(5)).unwrap_err();
    assert!(matches!(err, Error::VocabMismatch { .. }), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn checkpoint_trained_with_another_loss_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(6);
    let mut cfg = tiny_config();
    cfg.mention_source = MentionSource::Gold;
    cfg.mode = SystemMode::CNn;
    let run = run_pipeline(&cfg, &c).unwrap();
    let path = dir.path().join("coref.ckpt.json");
    run.trained[0].1.save(&path).unwrap();

    cfg.paths.coref_checkpoint = Some(path.clone());
    cfg.mode = SystemMode::Mlnn;
    assert!(matches!(run_pipeline(&cfg, &c), Err(Error::Config(_))));
    cfg.mode = SystemMode::CNn;
    assert!(run_pipeline(&cfg, &c).is_ok());
}

#[test]
fn gold_mentions_skip_extraction() {
    let mut cfg = tiny_config();
    cfg.mention_source = MentionSource::Gold;
    let run = run_pipeline(&cfg, &corpus(7)).unwrap();
    assert!(run.report.extraction.is_none());
    assert_eq!(run.report.mention_best_epoch, None);
    assert_eq!(run.trained.len(), 1);
    assert_eq!(run.trained[0].0, "coref");
}

#[test]
fn missing_corpus_file_is_an_io_error() {
    let err = load_corpus(Path::new("/nonexistent/corpus.jsonl")).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert_eq!(err.exit_code(), 2);
}
