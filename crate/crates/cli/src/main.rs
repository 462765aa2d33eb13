mod commands;
mod workspace;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use procex::fixtures::FixtureFamily;
use procex::pipeline::PipelineConfig;

use crate::workspace::{read_text, Workspace};

/// Extracts procedural steps and their relations from interview transcripts.
#[derive(Debug, Parser)]
#[command(name = "procex", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Working directory holding inputs and every stage's outputs.
    #[arg(long, short = 'd', global = true, env = "PROCEX_DATA")]
    data: Option<PathBuf>,

    /// Flat `key = value` configuration file.
    #[arg(long, short = 'c', global = true, env = "PROCEX_CONFIG")]
    config: Option<PathBuf>,

    /// Master seed; overrides the config file.
    #[arg(long, global = true, env = "PROCEX_SEED")]
    seed: Option<u64>,

    /// Context sentences per side of a span.
    #[arg(long, short = 'k', global = true)]
    k: Option<usize>,

    /// Sampling portion `none:next:if`.
    #[arg(long, global = true)]
    portion: Option<String>,

    /// Pooling mode for the relation classifier.
    #[arg(long, global = true)]
    pooling: Option<String>,

    /// Overrides any configuration key; repeatable.
    #[arg(long = "set", short = 's', global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// More log output (-v info, -vv debug).
    #[arg(long, short = 'v', global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Writes a synthetic corpus with planted steps and relations.
    MakeFixtures {
        #[arg(long, default_value = "separable")]
        family: FamilyArg,
        #[arg(long, default_value_t = 20)]
        docs: usize,
    },
    /// Parses protocols into graphs. With `--input`, prints one graph as JSON.
    ParseProtocol {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Projects every protocol phrase onto its transcript.
    Match {
        #[arg(long, default_value = "fuzzy")]
        method: MethodArg,
    },
    /// Builds the sequence-labeling and relation datasets.
    GenDatasets,
    /// Trains the CRF sequence labeler.
    TrainSeq,
    /// Trains the relation classifier.
    TrainRe,
    /// Extracts spans and classifies span pairs.
    Predict {
        /// Every document instead of the test split.
        #[arg(long)]
        all: bool,
        /// Only classify spans at most this many sentences apart.
        #[arg(long)]
        max_distance: Option<usize>,
    },
    /// Assembles predictions into graphs and exports them.
    Assemble {
        #[arg(long, default_value = "both")]
        format: FormatArg,
    },
    /// Scores matching, extraction and relation classification.
    Evaluate,
    /// Runs the context-size by sampling-portion grid.
    Sweep {
        /// Context sizes, comma separated.
        #[arg(long, default_value = "0,1,2,3", value_delimiter = ',')]
        ks: Vec<usize>,
        /// Sampling portions, comma separated.
        #[arg(long, default_value = "6:3:1,4:2:1,1:1:1", value_delimiter = ',')]
        portions: Vec<String>,
        /// Pooling mode used in every run.
        #[arg(long, default_value = "unmasked-avg")]
        sweep_pooling: String,
        /// Fail with status 3 unless K=2 beats K=0 at 4:2:1.
        #[arg(long)]
        check: bool,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FamilyArg {
    Separable,
    Context,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MethodArg {
    Fuzzy,
    Exact,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FormatArg {
    Dot,
    Json,
    Both,
}

fn load_config(g: &GlobalArgs) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    if let Some(path) = &g.config {
        cfg.merge_str(&read_text(path)?)
            .with_context(|| format!("in {}", path.display()))?;
    }
    let mut set = |k: &str, v: &str| cfg.set(k, v).map_err(anyhow::Error::from);
    if let Some(seed) = g.seed {
        set("seed", &seed.to_string())?;
    }
    if let Some(k) = g.k {
        set("k", &k.to_string())?;
    }
    if let Some(p) = &g.portion {
        set("portion", p)?;
    }
    if let Some(p) = &g.pooling {
        set("pooling", p)?;
    }
    for kv in &g.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| procex::Error::Argument(format!("expected KEY=VALUE, got '{kv}'")))?;
        set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.global)?;
    let root = cli
        .global
        .data
        .clone()
        .or_else(|| cfg.data_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let ws = Workspace::new(root);
    match cli.command {
        Command::MakeFixtures { family, docs } => {
            let family = match family {
                FamilyArg::Separable => FixtureFamily::Separable,
                FamilyArg::Context => FixtureFamily::Context,
            };
            commands::make_fixtures(&ws, &cfg, family, docs)
        }
        Command::ParseProtocol { input } => commands::parse_protocol(&ws, input.as_deref()),
        Command::Match { method } => commands::match_docs(&ws, &cfg, method),
        Command::GenDatasets => commands::gen_datasets(&ws, &cfg),
        Command::TrainSeq => commands::train_seq(&ws, &cfg),
        Command::TrainRe => commands::train_re(&ws, &cfg),
        Command::Predict { all, max_distance } => commands::predict(&ws, all, max_distance.or(cfg.max_distance)),
        Command::Assemble { format } => commands::assemble(&ws, format),
        Command::Evaluate => commands::evaluate(&ws),
        Command::Sweep {
            ks,
            portions,
            sweep_pooling,
            check,
        } => commands::sweep(&ws, &cfg, &ks, &portions, &sweep_pooling, check),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<commands::ValidationFailed>().is_some() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<procex::Error>() {
            return match e {
                procex::Error::Config(_) | procex::Error::Argument(_) => 1,
                _ => 2,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
