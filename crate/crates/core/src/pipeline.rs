//! End-to-end orchestration: split, vocabulary, both models, pair decisions,
//! clustering, scoring, artifacts and manifests.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::artifact::{write_jsonl, FORMAT_VERSION};
use crate::chains::{build_chains, lemma_baseline, ChainSet, FilterThresholds};
use crate::corpus::{
    gold_clusters, split_topics, Corpus, CorpusStats, Document, Mention, TopicSplit,
};
use crate::error::{Error, Result};
use crate::extractor::{
    evaluate_extraction, mention_keys, predict_mentions, train_extractor, ExtractionScores,
    ExtractorConfig, MentionExtractorModel,
};
use crate::features::{build_vocab, Vocab};
use crate::metrics::{format_table, score_corpus, CorefScores};
use crate::mlnn::{predict_pairs, train_joint, MlnnConfig, MlnnModel, PairDecision, SystemMode};
use crate::nn::Checkpoint;

pub const MENTIONS_STAGE: &str = "mentions";
pub const PAIRS_STAGE: &str = "pairs";
pub const CHAINS_STAGE: &str = "chains";
pub const GOLD_CHAINS_STAGE: &str = "gold_chains";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MentionSource {
    Gold,
    Predicted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub train: BTreeSet<u32>,
    pub dev: BTreeSet<u32>,
    pub test: BTreeSet<u32>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train: (1..=20).collect(),
            dev: (21..=23).collect(),
            test: (34..=43).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathConfig {
    pub corpus: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Loaded when the file exists, otherwise the model is trained.
    pub mention_checkpoint: Option<PathBuf>,
    pub coref_checkpoint: Option<PathBuf>,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            output_dir: PathBuf::from("evcoref-out"),
            mention_checkpoint: None,
            coref_checkpoint: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Training-split frequency below which a string maps to UNK.
    pub min_count: usize,
    pub mode: SystemMode,
    pub mention_source: MentionSource,
    pub splits: SplitConfig,
    pub extractor: ExtractorConfig,
    pub coref: MlnnConfig,
    pub thresholds: FilterThresholds,
    pub paths: PathConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 13,
            min_count: 1,
            mode: SystemMode::Mlnn,
            mention_source: MentionSource::Predicted,
            splits: SplitConfig::default(),
            extractor: ExtractorConfig::default(),
            coref: MlnnConfig::default(),
            thresholds: FilterThresholds::default(),
            paths: PathConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.extractor.encoder.validate()?;
        self.coref.encoder.validate()?;
        self.thresholds.validate()?;
        for (name, keep) in [
            ("extractor.negative_keep", self.extractor.negative_keep),
            ("coref.negative_keep", self.coref.negative_keep),
        ] {
            if !(keep > 0.0 && keep <= 1.0) {
                return Err(Error::Config(format!(
                    "{name} must be in (0, 1], got {keep}"
                )));
            }
        }
        for opt in [&self.extractor.optimizer, &self.coref.optimizer] {
            if opt.batch_size == 0 || !(0.0..1.0).contains(&opt.rho) || opt.eps <= 0.0 {
                return Err(Error::Config(
                    "optimizer needs batch_size > 0, rho in [0, 1) and eps > 0".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_pretty_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

pub struct Prepared {
    pub split: TopicSplit,
    pub vocab: Vocab,
}

/// Splits by topic and builds the vocabulary from the training split.
pub fn prepare(config: &PipelineConfig, corpus: &Corpus) -> Result<Prepared> {
    let s = &config.splits;
    let split = split_topics(corpus, &s.train, &s.dev, &s.test)?;
    if split.train.is_empty() {
        return Err(Error::Empty("training split"));
    }
    let vocab = build_vocab(&split.train, config.min_count);
    Ok(Prepared { split, vocab })
}

pub fn check_vocab(ck: &Checkpoint, vocab: &Vocab) -> Result<()> {
    let (expected, found) = (vocab.fingerprint(), ck.vocab.fingerprint());
    if expected != found {
        return Err(Error::VocabMismatch { expected, found });
    }
    Ok(())
}

/// Loads the extractor from `path` or, when absent, trains it on the split.
pub fn obtain_extractor(
    config: &PipelineConfig,
    prepared: &Prepared,
    path: Option<&Path>,
) -> Result<(MentionExtractorModel, ExtractorConfig, Option<usize>)> {
    if let Some(p) = path.filter(|p| p.exists()) {
        let ck = Checkpoint::load(p)?;
        check_vocab(&ck, &prepared.vocab)?;
        let (model, cfg) = MentionExtractorModel::from_checkpoint(&ck)?;
        return Ok((model, cfg, None));
    }
    let trained = train_extractor(
        &prepared.split.train,
        &prepared.split.dev,
        &prepared.vocab,
        &config.extractor,
        config.seed,
    )?;
    Ok((
        trained.model,
        config.extractor.clone(),
        Some(trained.best_epoch),
    ))
}

/// Loads the pair model from `path` or, when absent, trains it in the
/// configured mode. A loaded model must have been trained with the same loss.
pub fn obtain_coref(
    config: &PipelineConfig,
    prepared: &Prepared,
    path: Option<&Path>,
) -> Result<(MlnnModel, MlnnConfig, Option<usize>)> {
    if let Some(p) = path.filter(|p| p.exists()) {
        let ck = Checkpoint::load(p)?;
        check_vocab(&ck, &prepared.vocab)?;
        let (model, cfg, mode) = MlnnModel::from_checkpoint(&ck)?;
        if mode.objective() != config.mode.objective() {
            return Err(Error::Config(format!(
                "checkpoint was trained as {} but mode is {}",
                mode.name(),
                config.mode.name()
            )));
        }
        return Ok((model, cfg, None));
    }
    let trained = train_joint(
        &prepared.split.train,
        &prepared.split.dev,
        &prepared.vocab,
        &config.coref,
        config.mode,
        config.thresholds,
        config.seed,
    )?;
    Ok((
        trained.model,
        config.coref.clone(),
        Some(trained.best_epoch),
    ))
}

/// Gives predicted mentions the id of the gold mention with the same head
/// position, so both sides of scoring share identifiers.
pub fn align_to_gold(doc: &Document, predicted: Vec<Mention>) -> Vec<Mention> {
    let mut by_pos: BTreeMap<(usize, usize), &str> = BTreeMap::new();
    for g in &doc.gold_mentions {
        by_pos.entry(g.position()).or_insert(g.id.as_str());
    }
    predicted
        .into_iter()
        .map(|mut m| {
            if let Some(id) = by_pos.get(&m.position()) {
                m.id = (*id).to_owned();
            }
            m
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictedMention {
    pub id: String,
    pub sent: usize,
    pub token: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MentionsRecord {
    pub doc_id: String,
    pub mentions: Vec<PredictedMention>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub doc_id: String,
    #[serde(flatten)]
    pub decision: PairDecision,
}

#[derive(Clone, Debug, Default)]
pub struct Predictions {
    pub mentions: Vec<MentionsRecord>,
    pub pairs: Vec<PairRecord>,
    pub chains: Vec<ChainSet>,
    pub lemma_chains: Vec<ChainSet>,
    pub extraction: Option<ExtractionScores>,
}

pub struct PredictionModels<'a> {
    /// `None` uses gold mentions.
    pub extractor: Option<(&'a MentionExtractorModel, &'a ExtractorConfig)>,
    pub coref: &'a MlnnModel,
    pub coref_config: &'a MlnnConfig,
    pub mode: SystemMode,
    pub thresholds: FilterThresholds,
}

/// Mentions, pair decisions and chains for every document, in corpus order.
pub fn predict_documents(
    docs: &Corpus,
    vocab: &Vocab,
    models: &PredictionModels,
) -> Result<Predictions> {
    let policy = models.mode.filter_policy(models.thresholds);
    let features = &models.coref_config.encoder.features;
    let mut out = Predictions::default();
    let mut pred_keys = Vec::new();
    let mut gold_keys = Vec::new();
    for doc in &docs.documents {
        let mentions = match models.extractor {
            Some((model, cfg)) => {
                let found = predict_mentions(model, doc, vocab, cfg)?;
                pred_keys.extend(mention_keys(&doc.doc_id, &found));
                gold_keys.extend(mention_keys(&doc.doc_id, &doc.gold_mentions));
                align_to_gold(doc, found)
            }
            None => doc.gold_mentions.clone(),
        };
        let decisions = predict_pairs(models.coref, doc, &mentions, vocab, features)?;
        let ids: Vec<String> = mentions.iter().map(|m| m.id.clone()).collect();
        out.chains
            .push(build_chains(&doc.doc_id, &ids, &decisions, &policy)?);
        out.lemma_chains.push(lemma_baseline(doc, &mentions)?);
        out.mentions.push(MentionsRecord {
            doc_id: doc.doc_id.clone(),
            mentions: mentions
                .iter()
                .map(|m| PredictedMention {
                    id: m.id.clone(),
                    sent: m.sentence,
                    token: m.head,
                })
                .collect(),
        });
        out.pairs
            .extend(decisions.into_iter().map(|decision| PairRecord {
                doc_id: doc.doc_id.clone(),
                decision,
            }));
    }
    if models.extractor.is_some() {
        out.extraction = Some(evaluate_extraction(&pred_keys, &gold_keys));
    }
    Ok(out)
}

pub fn gold_chain_sets(docs: &Corpus) -> Result<Vec<ChainSet>> {
    docs.documents
        .iter()
        .map(|d| ChainSet::new(&d.doc_id, gold_clusters(d)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    pub dropped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub mode: SystemMode,
    pub mention_source: MentionSource,
    pub documents: SplitSizes,
    pub vocab_fingerprint: String,
    pub mention_best_epoch: Option<usize>,
    pub coref_best_epoch: Option<usize>,
    /// Head-match extraction scores on the test split.
    pub extraction: Option<ExtractionScores>,
    pub system: CorefScores,
    pub lemma_baseline: CorefScores,
}

impl PipelineReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let d = &self.documents;
        let _ = writeln!(
            out,
            "documents: train {} dev {} test {} (dropped {})",
            d.train, d.dev, d.test, d.dropped
        );
        if let Some(e) = self.extraction {
            let _ = writeln!(
                out,
                "mention extraction: P {:.1} R {:.1} F1 {:.1}",
                100.0 * e.precision,
                100.0 * e.recall,
                100.0 * e.f1
            );
        }
        out.push_str(&format_table(&[
            ("LEMMA", self.lemma_baseline),
            (self.mode.name(), self.system),
        ]));
        out
    }
}

/// Everything a run produces, before anything touches the filesystem.
#[derive(Clone, Debug)]
pub struct PipelineRun {
    pub report: PipelineReport,
    pub predictions: Predictions,
    pub gold_chains: Vec<ChainSet>,
    /// Checkpoints of models trained during this run, by file stem.
    pub trained: Vec<(&'static str, Checkpoint)>,
}

/// Runs every stage on `corpus`. Checkpoints named in `config.paths` are
/// loaded when present; missing models are trained.
pub fn run_pipeline(config: &PipelineConfig, corpus: &Corpus) -> Result<PipelineRun> {
    config.validate()?;
    let prepared = prepare(config, corpus)?;
    let mut trained = Vec::new();

    let extractor = match config.mention_source {
        MentionSource::Gold => None,
        MentionSource::Predicted => {
            let (model, cfg, epoch) = obtain_extractor(
                config,
                &prepared,
                config.paths.mention_checkpoint.as_deref(),
            )?;
            if epoch.is_some() {
                trained.push((
                    "mention",
                    model.to_checkpoint(&cfg, &prepared.vocab, config.seed),
                ));
            }
            Some((model, cfg, epoch))
        }
    };
    let (coref, coref_cfg, coref_epoch) =
        obtain_coref(config, &prepared, config.paths.coref_checkpoint.as_deref())?;
    if coref_epoch.is_some() {
        trained.push((
            "coref",
            coref.to_checkpoint(&coref_cfg, config.mode, &prepared.vocab, config.seed),
        ));
    }

    let test = &prepared.split.test;
    let predictions = predict_documents(
        test,
        &prepared.vocab,
        &PredictionModels {
            extractor: extractor.as_ref().map(|(m, c, _)| (m, c)),
            coref: &coref,
            coref_config: &coref_cfg,
            mode: config.mode,
            thresholds: config.thresholds,
        },
    )?;
    let gold_chains = gold_chain_sets(test)?;
    let system = score_corpus(&gold_chains, &predictions.chains)?;
    let lemma = score_corpus(&gold_chains, &predictions.lemma_chains)?;
    let split = &prepared.split;
    let report = PipelineReport {
        mode: config.mode,
        mention_source: config.mention_source,
        documents: SplitSizes {
            train: split.train.len(),
            dev: split.dev.len(),
            test: split.test.len(),
            dropped: split.dropped,
        },
        vocab_fingerprint: prepared.vocab.fingerprint(),
        mention_best_epoch: extractor.and_then(|(_, _, e)| e),
        coref_best_epoch: coref_epoch,
        extraction: predictions.extraction,
        system,
        lemma_baseline: lemma,
    };
    Ok(PipelineRun {
        report,
        predictions,
        gold_chains,
        trained,
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Record of one command invocation: its full configuration and the hashes
/// of every input and output file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub command: String,
    /// Command-line arguments after the subcommand name.
    #[serde(default)]
    pub arguments: Vec<String>,
    pub seed: u64,
    pub config: PipelineConfig,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, config: &PipelineConfig) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            command: command.to_owned(),
            arguments: Vec::new(),
            seed: config.seed,
            config: config.clone(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs
            .insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    /// Hashes `path` and records it under its file name.
    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        self.outputs.insert(name, sha256_file(path)?);
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        m.config.validate()?;
        Ok(m)
    }
}

pub fn report_json(report: &PipelineReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)? + "\n")
}

/// Writes checkpoints, stage artifacts and reports of `run` into `dir` and
/// records their hashes in `manifest`.
pub fn write_run(dir: &Path, run: &PipelineRun, manifest: &mut Manifest) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (stem, ck) in &run.trained {
        let path = dir.join(format!("{stem}.ckpt.json"));
        ck.save(&path)?;
        manifest.add_output(&path)?;
    }
    let p = &run.predictions;
    let files = [
        (dir.join("mentions.jsonl"), MENTIONS_STAGE),
        (dir.join("pairs.jsonl"), PAIRS_STAGE),
        (dir.join("chains.jsonl"), CHAINS_STAGE),
        (dir.join("lemma_chains.jsonl"), CHAINS_STAGE),
        (dir.join("gold_chains.jsonl"), GOLD_CHAINS_STAGE),
    ];
    write_jsonl(&files[0].0, files[0].1, &p.mentions)?;
    write_jsonl(&files[1].0, files[1].1, &p.pairs)?;
    write_jsonl(&files[2].0, files[2].1, &p.chains)?;
    write_jsonl(&files[3].0, files[3].1, &p.lemma_chains)?;
    write_jsonl(&files[4].0, files[4].1, &run.gold_chains)?;
    for (path, _) in &files {
        manifest.add_output(path)?;
    }
    let json = dir.join("report.json");
    fs::write(&json, report_json(&run.report)?).map_err(|e| Error::io(&json, e))?;
    let text = dir.join("report.txt");
    fs::write(&text, run.report.to_text()).map_err(|e| Error::io(&text, e))?;
    manifest.add_output(&json)?;
    manifest.add_output(&text)?;
    Ok(())
}

/// Corpus statistics in a fixed five-column layout.
pub fn format_stats_table(rows: &[(&str, CorpusStats)]) -> String {
    let mut out = format!(
        "{:<8} {:>10} {:>10} {:>10} {:>10} {:>10}\n",
        "", "#Docs", "#Sents", "#Mentions", "#WDChains", "AvgWDLen"
    );
    for (name, s) in rows {
        let _ = writeln!(
            out,
            "{:<8} {:>10} {:>10} {:>10} {:>10} {:>10.1}",
            name, s.documents, s.sentences, s.mentions, s.chains, s.mean_chain_length
        );
    }
    out
}
