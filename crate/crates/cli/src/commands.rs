use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use evcoref::artifact::read_jsonl;
use evcoref::corpus::{
    corpus_stats, generate_synthetic_corpus, load_corpus, write_corpus, SyntheticSpec,
};
use evcoref::extractor::train_extractor;
use evcoref::metrics::format_table;
use evcoref::mlnn::train_joint;
use evcoref::pipeline::{format_stats_table, prepare, write_run, Prepared};
use evcoref::{
    run_pipeline, ChainSet, Corpus, CorpusStats, Error, Manifest, MentionSource, PipelineConfig,
};
use serde::Serialize;
use serde_json::json;

pub struct Context {
    pub config: PipelineConfig,
    pub json: bool,
    pub command: &'static str,
    pub arguments: Vec<String>,
}

impl Context {
    fn manifest(&self) -> Manifest {
        let mut m = Manifest::new(self.command, &self.config);
        m.arguments.clone_from(&self.arguments);
        m
    }

    fn out_dir(&self) -> Result<&Path> {
        let dir = self.config.paths.output_dir.as_path();
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        Ok(dir)
    }

    fn corpus_path(&self) -> Result<&Path> {
        self.config.paths.corpus.as_deref().ok_or_else(|| {
            Error::Config(format!("{} needs --corpus or paths.corpus", self.command)).into()
        })
    }

    /// Writes the manifest next to the command's outputs.
    fn finish(&self, manifest: &Manifest, dir: &Path) -> Result<()> {
        manifest.save(&dir.join(format!("{}.manifest.json", self.command)))?;
        Ok(())
    }

    fn print<T: Serialize>(&self, text: &str, value: &T) -> Result<()> {
        if self.json {
            println!("{}", serde_json::to_string_pretty(value)?);
        } else {
            print!("{text}");
        }
        Ok(())
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn sibling_manifest(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).map_err(|e| io_error(path, e))?;
    Ok(())
}

pub fn ingest(ctx: &Context, input: &Path, output: &Path) -> Result<()> {
    let corpus = load_corpus(input)?;
    write_corpus(output, &corpus)?;
    let mut manifest = ctx.manifest();
    manifest.add_input(input)?;
    manifest.add_output(output)?;
    manifest.save(&sibling_manifest(output))?;
    let s = corpus_stats(&corpus);
    let text = format!(
        "{} documents, {} sentences, {} mentions, {} chains -> {}\n",
        s.documents,
        s.sentences,
        s.mentions,
        s.chains,
        output.display()
    );
    ctx.print(&text, &s)
}

#[derive(Serialize)]
struct StatsRow {
    split: &'static str,
    #[serde(flatten)]
    stats: CorpusStats,
}

pub fn stats(ctx: &Context) -> Result<()> {
    let path = ctx.corpus_path()?;
    let corpus = load_corpus(path)?;
    let s = &ctx.config.splits;
    let split = evcoref::corpus::split_topics(&corpus, &s.train, &s.dev, &s.test)?;
    let all = Corpus::new(
        [&split.train, &split.dev, &split.test]
            .iter()
            .flat_map(|c| c.documents.iter().cloned())
            .collect(),
    )?;
    let rows = [
        ("Train", corpus_stats(&split.train)),
        ("Dev", corpus_stats(&split.dev)),
        ("Test", corpus_stats(&split.test)),
        ("Total", corpus_stats(&all)),
    ];
    let mut text = format_stats_table(&rows);
    if split.dropped > 0 {
        text.push_str(&format!(
            "{} documents outside the configured topics\n",
            split.dropped
        ));
    }
    let report: Vec<StatsRow> = rows
        .into_iter()
        .map(|(name, stats)| StatsRow { split: name, stats })
        .collect();

    let dir = ctx.out_dir()?;
    let out = dir.join("stats.json");
    write_json(&out, &json!({ "rows": report, "dropped": split.dropped }))?;
    let mut manifest = ctx.manifest();
    manifest.add_input(path)?;
    manifest.add_output(&out)?;
    ctx.finish(&manifest, dir)?;
    ctx.print(&text, &json!({ "rows": report, "dropped": split.dropped }))
}

pub fn gen_synth(
    ctx: &Context,
    output: &Path,
    topics: u32,
    docs_per_topic: usize,
    noise: f64,
) -> Result<()> {
    let corpus = generate_synthetic_corpus(&SyntheticSpec {
        seed: ctx.config.seed,
        n_topics: topics,
        docs_per_topic,
        noise,
    })?;
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
    }
    write_corpus(output, &corpus)?;
    let mut manifest = ctx.manifest();
    manifest.add_output(output)?;
    manifest.save(&sibling_manifest(output))?;
    let s = corpus_stats(&corpus);
    let text = format!(
        "{} documents, {} mentions, {} chains -> {}\n",
        s.documents,
        s.mentions,
        s.chains,
        output.display()
    );
    ctx.print(&text, &s)
}

fn prepared(ctx: &Context) -> Result<(Prepared, PathBuf)> {
    let path = ctx.corpus_path()?.to_path_buf();
    let corpus = load_corpus(&path)?;
    Ok((prepare(&ctx.config, &corpus)?, path))
}

pub fn train_mention(ctx: &Context) -> Result<()> {
    let cfg = &ctx.config;
    let (prepared, corpus_path) = prepared(ctx)?;
    let trained = train_extractor(
        &prepared.split.train,
        &prepared.split.dev,
        &prepared.vocab,
        &cfg.extractor,
        cfg.seed,
    )?;
    let dir = ctx.out_dir()?;
    let ckpt = dir.join("mention.ckpt.json");
    trained
        .model
        .to_checkpoint(&cfg.extractor, &prepared.vocab, cfg.seed)
        .save(&ckpt)?;
    let mut manifest = ctx.manifest();
    manifest.add_input(&corpus_path)?;
    manifest.add_output(&ckpt)?;
    ctx.finish(&manifest, dir)?;

    let mut text = String::new();
    for e in &trained.log {
        text.push_str(&format!(
            "epoch {:>3}  loss {:.4}  dev P {:.3} R {:.3} F1 {:.3}\n",
            e.epoch, e.train_loss, e.dev.precision, e.dev.recall, e.dev.f1
        ));
    }
    text.push_str(&format!(
        "best epoch {} -> {}\n",
        trained.best_epoch,
        ckpt.display()
    ));
    ctx.print(
        &text,
        &json!({ "best_epoch": trained.best_epoch, "log": trained.log, "checkpoint": ckpt }),
    )
}

pub fn train_coref(ctx: &Context) -> Result<()> {
    let cfg = &ctx.config;
    let (prepared, corpus_path) = prepared(ctx)?;
    let trained = train_joint(
        &prepared.split.train,
        &prepared.split.dev,
        &prepared.vocab,
        &cfg.coref,
        cfg.mode,
        cfg.thresholds,
        cfg.seed,
    )?;
    let dir = ctx.out_dir()?;
    let ckpt = dir.join("coref.ckpt.json");
    trained
        .model
        .to_checkpoint(&cfg.coref, cfg.mode, &prepared.vocab, cfg.seed)
        .save(&ckpt)?;
    let mut manifest = ctx.manifest();
    manifest.add_input(&corpus_path)?;
    manifest.add_output(&ckpt)?;
    ctx.finish(&manifest, dir)?;

    let mut text = String::new();
    for e in &trained.log {
        text.push_str(&format!(
            "epoch {:>3}  L1 {:.4}  L2 {:.4}  dev pair acc {:.3}  dev CoNLL F1 {:.3}\n",
            e.epoch, e.train_loss.l1, e.train_loss.l2, e.dev_pair_accuracy, e.dev_conll_f1
        ));
    }
    text.push_str(&format!(
        "{} best epoch {} -> {}\n",
        cfg.mode.name(),
        trained.best_epoch,
        ckpt.display()
    ));
    ctx.print(
        &text,
        &json!({ "mode": cfg.mode, "best_epoch": trained.best_epoch, "log": trained.log, "checkpoint": ckpt }),
    )
}

fn pipeline(ctx: &Context, config: &PipelineConfig) -> Result<()> {
    let corpus_path = ctx.corpus_path()?;
    let corpus = load_corpus(corpus_path)?;
    let run = run_pipeline(config, &corpus)?;
    let dir = ctx.out_dir()?;
    let mut manifest = ctx.manifest();
    manifest.add_input(corpus_path)?;
    for p in [
        &config.paths.mention_checkpoint,
        &config.paths.coref_checkpoint,
    ]
    .into_iter()
    .flatten()
    .filter(|p| p.exists())
    {
        manifest.add_input(p)?;
    }
    write_run(dir, &run, &mut manifest)?;
    ctx.finish(&manifest, dir)?;
    ctx.print(&run.report.to_text(), &run.report)
}

pub fn predict(ctx: &Context) -> Result<()> {
    let mut config = ctx.config.clone();
    let dir = config.paths.output_dir.clone();
    let mut required = vec![config
        .paths
        .coref_checkpoint
        .get_or_insert_with(|| dir.join("coref.ckpt.json"))
        .clone()];
    if config.mention_source == MentionSource::Predicted {
        required.push(
            config
                .paths
                .mention_checkpoint
                .get_or_insert_with(|| dir.join("mention.ckpt.json"))
                .clone(),
        );
    }
    if let Some(missing) = required.iter().find(|p| !p.exists()) {
        return Err(Error::Checkpoint(format!("missing checkpoint {}", missing.display())).into());
    }
    pipeline(ctx, &config)
}

pub fn run(ctx: &Context) -> Result<()> {
    pipeline(ctx, &ctx.config)
}

fn read_chains(path: &Path) -> Result<Vec<ChainSet>> {
    let file =
        read_jsonl::<ChainSet>(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(file.records.into_iter().map(|(_, c)| c).collect())
}

pub fn score(ctx: &Context, gold: &Path, pred: &Path) -> Result<()> {
    let scores = evcoref::score_corpus(&read_chains(gold)?, &read_chains(pred)?)?;
    let dir = ctx.out_dir()?;
    let out = dir.join("score.json");
    write_json(&out, &scores)?;
    let mut manifest = ctx.manifest();
    manifest.add_input(gold)?;
    manifest.add_input(pred)?;
    manifest.add_output(&out)?;
    ctx.finish(&manifest, dir)?;
    ctx.print(&format_table(&[("system", scores)]), &scores)
}
