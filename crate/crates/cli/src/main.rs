//! The `gramforge` command line.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

mod artifacts;
mod commands;
mod config;
mod error;

use artifacts::{Artifacts, Manifest};
use config::{Overrides, PipelineConfig};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "gramforge", version, about = "Grammar induction guided by sequence-probability oracles")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixFormat {
    Csv,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Forward, backward and combined log-probabilities of sentences
    Score {
        #[arg(required = true)]
        sentences: Vec<String>,
    },
    /// Fill the word by blanked-sentence probability matrix
    Matrix {
        #[arg(long, value_enum, default_value_t = MatrixFormat::Csv)]
        format: MatrixFormat,
    },
    /// Split word senses by clustering instance rows
    Wsd,
    /// Group sense columns into word categories
    Categories,
    /// Induce a grammar from the corpus
    Induce {
        /// Tag words from a JSON lexicon {category: [words]} instead of clustering
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Sentence-final token kept out of the rules
        #[arg(long)]
        terminator: Option<String>,
    },
    /// Accept or reject a single rule
    EvalRule {
        /// Rule text, e.g. "kids: small- & the-"
        rule: String,
        /// Grammar file (bundled: poc.dict, gold.dict, full.dict)
        #[arg(long)]
        grammar: PathBuf,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Reference sentences; implies reference mode
        #[arg(long)]
        references: Option<PathBuf>,
    },
    /// Generate sentences from a grammar
    Generate {
        #[arg(long)]
        grammar: PathBuf,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Rule every sentence must use
        #[arg(long)]
        anchor: Option<String>,
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
    /// Link-parse a sentence
    Parse {
        sentence: String,
        #[arg(long)]
        grammar: PathBuf,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Require the links to connect every word
        #[arg(long)]
        connected: bool,
    },
    /// Evaluate the 21 rules of the bundled six-category grammar
    Poc,
    /// Rerun the command recorded in a manifest
    Rerun { manifest: PathBuf },
}

fn init_logging(level: &str) {
    let env = env_logger::Env::default().default_filter_or(level);
    let _ = env_logger::Builder::from_env(env)
        .target(env_logger::Target::Stderr)
        .try_init();
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (command, mut config) = match cli.command {
        Command::Rerun { manifest } => {
            if cli.overrides.config.is_some() {
                return Err(CliError::Usage("rerun takes its config from the manifest, not --config".into()));
            }
            let m = Manifest::read(&manifest)?;
            (m.command, m.config)
        }
        command => (command, PipelineConfig::load(cli.overrides.config.as_deref())?),
    };
    config.apply(&cli.overrides)?;
    config.validate()?;
    init_logging(&config.log_level);
    if config.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build_global()
            .map_err(|e| CliError::Config(format!("jobs: {e}")))?;
    }
    log::info!("config hash {}", config.hash());
    let start = Instant::now();
    let mut artifacts = Artifacts::create(&config.output_dir)?;
    commands::execute(&command, &config, &mut artifacts)?;
    artifacts.finish(&command, &config)?;
    log::info!("done in {:.1?}", start.elapsed());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
