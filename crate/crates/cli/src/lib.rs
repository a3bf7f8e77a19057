//! Config-driven front end over the `robustmt` library.
//!
//! Exit codes: 0 success, 1 invalid arguments or configuration, 2 bad input
//! data, 3 external hook failure.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::commands::{EpochArgs, PostprocessArgs, ScoreArgs, Tokenize};
use crate::config::PipelineConfig;
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "robustmt", version, about = "Corpus toolkit for translating noisy social-media text")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Pipeline configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Writes the report here instead of standard output.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize, encode placeholders, case-encode, segment and tag every corpus.
    Preprocess {
        #[command(flatten)]
        common: Common,
    },
    /// Turn model output back into text.
    Postprocess {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        /// Placeholder sidecar written by `preprocess` for the source side.
        #[arg(long)]
        sidecar: Option<PathBuf>,
        /// Defaults to standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Drop copied, misidentified, length-mismatched or hallucinated pairs.
    Filter {
        #[command(flatten)]
        common: Common,
    },
    /// Train source and target subword models.
    BpeTrain {
        #[command(flatten)]
        common: Common,
    },
    /// Append noised copies of the configured corpora.
    Noise {
        #[command(flatten)]
        common: Common,
    },
    /// Assemble the training set of one epoch from a plan.
    BuildEpochs {
        #[command(flatten)]
        common: Common,
        /// 1-based epoch number.
        #[arg(long)]
        epoch: usize,
        /// Overrides `epochs.plan`.
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Output root; defaults to the config `output` or the current directory.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Use targets unchanged instead of calling a back-translation hook.
        #[arg(long)]
        identity_hook: bool,
    },
    /// Corpus BLEU of a hypothesis file against one reference.
    Score {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long, value_enum, default_value = "13a")]
        tokenize: Tokenize,
    },
}

fn load(common: &Common) -> Result<PipelineConfig> {
    let path = common
        .config
        .as_deref()
        .ok_or_else(|| CliError::Validation("--config is required".into()))?;
    PipelineConfig::load(path)
}

fn load_optional(common: &Common) -> Result<Option<PipelineConfig>> {
    common.config.as_deref().map(PipelineConfig::load).transpose()
}

fn emit(report: &str, path: Option<&Path>, stdout_busy: bool) -> Result<()> {
    match path {
        Some(p) => io::write_text(p, &format!("{report}\n")),
        None if stdout_busy => {
            eprintln!("{report}");
            Ok(())
        }
        None => {
            println!("{report}");
            Ok(())
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Preprocess { common } => {
            let cfg = load(&common)?;
            emit(&commands::preprocess(&cfg)?, common.report.as_deref(), false)
        }
        Command::Postprocess {
            common,
            input,
            sidecar,
            output,
        } => {
            let cfg = load(&common)?;
            let (lines, report) = commands::postprocess(
                &cfg,
                PostprocessArgs {
                    input: &input,
                    sidecar: sidecar.as_deref(),
                    output: output.as_deref(),
                },
            )?;
            if output.is_none() {
                for l in &lines {
                    println!("{l}");
                }
            }
            emit(&report, common.report.as_deref(), output.is_none())
        }
        Command::Filter { common } => {
            let cfg = load(&common)?;
            emit(&commands::filter(&cfg)?, common.report.as_deref(), false)
        }
        Command::BpeTrain { common } => {
            let cfg = load(&common)?;
            emit(&commands::bpe_train(&cfg)?, common.report.as_deref(), false)
        }
        Command::Noise { common } => {
            let cfg = load(&common)?;
            let seed = cfg.require_seed(common.seed)?;
            emit(&commands::noise(&cfg, seed)?, common.report.as_deref(), false)
        }
        Command::BuildEpochs {
            common,
            epoch,
            plan,
            output,
            identity_hook,
        } => {
            let cfg = load_optional(&common)?;
            let plan = plan
                .or_else(|| cfg.as_ref().and_then(|c| c.plan.clone()))
                .ok_or_else(|| CliError::field("epochs.plan", "missing (set it in the config or pass --plan)"))?;
            let seed = match &cfg {
                Some(c) => c.require_seed(common.seed)?,
                None => common
                    .seed
                    .ok_or_else(|| CliError::field("seed", "required (pass --seed)"))?,
            };
            let output = output
                .or_else(|| cfg.as_ref().map(|c| c.output.clone()))
                .unwrap_or_else(|| PathBuf::from("."));
            let report = commands::build_epochs(EpochArgs {
                epoch,
                plan: &plan,
                output: &output,
                hook: cfg.as_ref().and_then(|c| c.bt_hook.clone()),
                identity: identity_hook,
                seed,
            })?;
            emit(&report, common.report.as_deref(), false)
        }
        Command::Score {
            common,
            hyp,
            reference,
            tokenize,
        } => {
            let cfg = load_optional(&common)?;
            let (line, report) = commands::score(ScoreArgs {
                hyp: &hyp,
                reference: &reference,
                tokenize,
                tokenizer_hook: cfg.and_then(|c| c.tokenizer_hook),
            })?;
            match &common.report {
                Some(p) => {
                    println!("{line}");
                    io::write_text(p, &format!("{report}\n"))
                }
                None => emit(&report, None, false),
            }
        }
    }
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
