mod commands;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use evcoref::{Manifest, MentionSource, PipelineConfig, SystemMode};

#[derive(Parser, Debug)]
#[command(
    name = "evcoref",
    version,
    about = "Within-document event coreference pipeline"
)]
struct Cli {
    /// JSON configuration. Missing fields take their defaults.
    #[arg(long, conflicts_with = "manifest")]
    config: Option<PathBuf>,

    /// Take the configuration from a manifest. Without a subcommand, the
    /// recorded command is run again with its recorded arguments.
    #[arg(long)]
    manifest: Option<PathBuf>,

    /// Print the effective configuration as JSON and exit.
    #[arg(long)]
    show_config: bool,

    /// Print reports as JSON instead of tables.
    #[arg(long)]
    json_report: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug, Clone)]
enum Command {
    /// Validate a corpus JSONL file and write it back in canonical form.
    Ingest {
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Corpus statistics for the configured train, dev and test topics.
    Stats {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Write a synthetic corpus with planted event chains.
    GenSynth {
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 20)]
        topics: u32,
        #[arg(long, default_value_t = 5)]
        docs_per_topic: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
    /// Train the mention extractor and save its checkpoint.
    TrainMention {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train the pair model in the configured mode and save its checkpoint.
    TrainCoref {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<SystemMode>,
    },
    /// Run saved checkpoints on the test topics and score the result.
    Predict {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        models: ModelArgs,
    },
    /// Score a predicted chain file against a gold chain file.
    Score {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Train whatever is missing, predict, cluster and score.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        models: ModelArgs,
    },
}

#[derive(Args, Debug, Clone)]
struct CommonArgs {
    /// Corpus JSONL. Defaults to `paths.corpus`.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Output directory. Defaults to `paths.output_dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    #[arg(long, value_parser = parse_mode)]
    mode: Option<SystemMode>,
    #[arg(long, value_parser = parse_source)]
    mention_source: Option<MentionSource>,
    #[arg(long)]
    mention_checkpoint: Option<PathBuf>,
    #[arg(long)]
    coref_checkpoint: Option<PathBuf>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest { .. } => "ingest",
            Command::Stats { .. } => "stats",
            Command::GenSynth { .. } => "gen-synth",
            Command::TrainMention { .. } => "train-mention",
            Command::TrainCoref { .. } => "train-coref",
            Command::Predict { .. } => "predict",
            Command::Score { .. } => "score",
            Command::Run { .. } => "run",
        }
    }

    fn apply(&self, config: &mut PipelineConfig) {
        let common = match self {
            Command::Stats { corpus, out_dir } => {
                set(&mut config.paths.corpus, corpus);
                set_path(&mut config.paths.output_dir, out_dir);
                return;
            }
            Command::Score { out_dir, .. } => {
                set_path(&mut config.paths.output_dir, out_dir);
                return;
            }
            Command::GenSynth { seed, .. } => {
                config.seed = seed.unwrap_or(config.seed);
                return;
            }
            Command::Ingest { .. } => return,
            Command::TrainMention { common } => common,
            Command::TrainCoref { common, mode } => {
                config.mode = mode.unwrap_or(config.mode);
                common
            }
            Command::Predict { common, models } | Command::Run { common, models } => {
                config.mode = models.mode.unwrap_or(config.mode);
                config.mention_source = models.mention_source.unwrap_or(config.mention_source);
                set(
                    &mut config.paths.mention_checkpoint,
                    &models.mention_checkpoint,
                );
                set(&mut config.paths.coref_checkpoint, &models.coref_checkpoint);
                common
            }
        };
        set(&mut config.paths.corpus, &common.corpus);
        set_path(&mut config.paths.output_dir, &common.out_dir);
        config.seed = common.seed.unwrap_or(config.seed);
    }
}

fn set(slot: &mut Option<PathBuf>, value: &Option<PathBuf>) {
    if value.is_some() {
        slot.clone_from(value);
    }
}

fn set_path(slot: &mut PathBuf, value: &Option<PathBuf>) {
    if let Some(v) = value {
        slot.clone_from(v);
    }
}

fn parse_mode(s: &str) -> Result<SystemMode, String> {
    [SystemMode::CNn, SystemMode::CMlnn, SystemMode::Mlnn]
        .into_iter()
        .find(|m| m.name().eq_ignore_ascii_case(s))
        .ok_or_else(|| format!("unknown mode {s:?}; expected C-NN, C-MLNN or MLNN"))
}

fn parse_source(s: &str) -> Result<MentionSource, String> {
    match s {
        "gold" => Ok(MentionSource::Gold),
        "predicted" => Ok(MentionSource::Predicted),
        _ => Err(format!(
            "unknown mention source {s:?}; expected gold or predicted"
        )),
    }
}

/// Arguments following the subcommand name, with top-level flags removed.
fn subcommand_arguments(argv: &[OsString]) -> Vec<String> {
    let mut i = 1;
    while i < argv.len() {
        let a = argv[i].to_string_lossy();
        match a.as_ref() {
            "--config" | "--manifest" => i += 2,
            "--show-config" | "--json-report" => i += 1,
            s if s.starts_with("--config=") || s.starts_with("--manifest=") => i += 1,
            _ => break,
        }
    }
    argv.iter()
        .skip(i + 1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect()
}

fn parse(argv: &[OsString]) -> std::result::Result<Cli, ExitCode> {
    Cli::try_parse_from(argv).map_err(|e| {
        let _ = e.print();
        if e.use_stderr() {
            ExitCode::from(1)
        } else {
            ExitCode::SUCCESS
        }
    })
}

fn execute(cli: Cli, argv: &[OsString]) -> Result<()> {
    let manifest = cli.manifest.as_deref().map(Manifest::load).transpose()?;
    let mut config = match (&manifest, &cli.config) {
        (Some(m), _) => m.config.clone(),
        (None, Some(path)) => PipelineConfig::load(path)?,
        (None, None) => PipelineConfig::default(),
    };
    let (command, arguments) = match (&cli.command, &manifest) {
        (Some(c), _) => (c.clone(), subcommand_arguments(argv)),
        (None, Some(m)) => {
            let mut replay = vec![OsString::from("evcoref"), OsString::from(&m.command)];
            replay.extend(m.arguments.iter().map(OsString::from));
            let parsed = Cli::try_parse_from(&replay)
                .map_err(|e| evcoref::Error::Config(format!("manifest arguments: {e}")))?;
            (
                parsed.command.expect("replay names a subcommand"),
                m.arguments.clone(),
            )
        }
        (None, None) if cli.show_config => {
            println!("{}", config.to_pretty_json());
            return Ok(());
        }
        (None, None) => bail!(evcoref::Error::Config(
            "a subcommand or --manifest is required".into()
        )),
    };
    command.apply(&mut config);
    config.validate()?;
    if cli.show_config {
        println!("{}", config.to_pretty_json());
        return Ok(());
    }
    let ctx = commands::Context {
        config,
        json: cli.json_report,
        command: command.name(),
        arguments,
    };
    match command {
        Command::Ingest { input, output } => commands::ingest(&ctx, &input, &output),
        Command::Stats { .. } => commands::stats(&ctx),
        Command::GenSynth {
            output,
            topics,
            docs_per_topic,
            noise,
            ..
        } => commands::gen_synth(&ctx, &output, topics, docs_per_topic, noise),
        Command::TrainMention { .. } => commands::train_mention(&ctx),
        Command::TrainCoref { .. } => commands::train_coref(&ctx),
        Command::Predict { .. } => commands::predict(&ctx),
        Command::Score { gold, pred, .. } => commands::score(&ctx, &gold, &pred),
        Command::Run { .. } => commands::run(&ctx),
    }
}

fn main() -> ExitCode {
    let argv: Vec<OsString> = std::env::args_os().collect();
    let cli = match parse(&argv) {
        Ok(cli) => cli,
        Err(code) => return code,
    };
    match execute(cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .downcast_ref::<evcoref::Error>()
                .map_or(1, evcoref::Error::exit_code);
            ExitCode::from(code as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<OsString> {
        s.split_whitespace().map(OsString::from).collect()
    }

    #[test]
    fn arguments_skip_top_level_flags() {
        let a = argv("evcoref --config c.json --json-report run --corpus x --mode C-NN");
        assert_eq!(
            subcommand_arguments(&a),
            vec!["--corpus", "x", "--mode", "C-NN"]
        );
        let a = argv("evcoref --manifest=m.json score --gold g --pred p");
        assert_eq!(subcommand_arguments(&a), vec!["--gold", "g", "--pred", "p"]);
    }

    #[test]
    fn modes_parse_by_display_name() {
        assert_eq!(parse_mode("c-mlnn"), Ok(SystemMode::CMlnn));
        assert_eq!(parse_mode("MLNN"), Ok(SystemMode::Mlnn));
        assert!(parse_mode("mlp").is_err());
    }

    #[test]
    fn arguments_override_the_config() {
        let cli = Cli::try_parse_from(argv(
            "evcoref run --corpus c.jsonl --mode C-NN --seed 4 --mention-source gold",
        ))
        .unwrap();
        let mut cfg = PipelineConfig::default();
        cli.command.unwrap().apply(&mut cfg);
        assert_eq!(cfg.paths.corpus, Some(PathBuf::from("c.jsonl")));
        assert_eq!(cfg.mode, SystemMode::CNn);
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.mention_source, MentionSource::Gold);
    }
}
