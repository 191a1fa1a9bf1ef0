//! Command-line surface for the deep abstaining classifier toolkit:
//! corpus generation, training with abstention-budget control, selective
//! evaluation, perturbation explanations, and word-association analysis.

pub mod commands;
pub mod config;
pub mod data;
pub mod util;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use dac_core::error::{Error, Result};

use commands::eval::SplitChoice;

#[derive(Parser)]
#[command(
    name = "dac",
    about = "Deep abstaining classifier toolkit",
    version,
    max_term_width = 100
)]
pub struct Cli {
    /// Cap on worker threads (overrides the config's [run] threads).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus with configured label noise.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train an abstaining classifier on a corpus directory.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Directory holding corpus.jsonl (and sidecars).
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Initialize the embedding table from a checkpoint-format file.
        #[arg(long)]
        init_embeddings: Option<PathBuf>,
        /// Initialize all weights from an existing checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a checkpoint: per-task metrics, combos, abstention audit.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Config file (required for --split other than 'all').
        #[arg(long)]
        config: Option<PathBuf>,
        /// Which split to evaluate: train|val|test|all.
        #[arg(long, default_value = "all")]
        split: String,
        /// Restrict the per-task report to these tasks.
        #[arg(long, value_delimiter = ',')]
        tasks: Option<Vec<String>>,
        /// Task combination (comma-separated names or aliases); repeatable.
        #[arg(long)]
        combos: Vec<String>,
    },
    /// Explain predicted classes (including abstain) for selected documents.
    Explain {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Task whose prediction is explained.
        #[arg(long)]
        task: String,
        /// Explicit document ids (comma-separated).
        #[arg(long, value_delimiter = ',')]
        doc_ids: Option<Vec<u64>>,
        /// Balanced sampling: per gold class, up to N correct and N abstained.
        #[arg(long)]
        sample_per_class: Option<usize>,
        /// Config file supplying perturbation parameters and the seed.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Build word-association tables with exact-test p-values.
    Associate {
        #[arg(long)]
        out: PathBuf,
        /// Word stems (comma-separated, lowercase, prefix-matched).
        #[arg(long, value_delimiter = ',')]
        stems: Vec<String>,
        /// Explanations JSONL produced by `dac explain`.
        #[arg(long)]
        explanations: Option<PathBuf>,
        /// Corpus directory the explanations refer to.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Verification mode: published counts TSV in, p-values out.
        #[arg(long)]
        from_counts: Option<PathBuf>,
    },
}

/// Runs a parsed command; errors map to exit codes via [`Error::exit_code`].
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { config, out } => {
            let cfg = config::load_config(&config)?;
            commands::generate::run(&cfg, &out)
        }
        Command::Train {
            config,
            data,
            out,
            init_embeddings,
            resume,
        } => {
            let mut cfg = config::load_config(&config)?;
            if let Some(threads) = cli.threads {
                cfg.threads = threads.max(1);
            }
            commands::train::run(
                &cfg,
                &commands::train::TrainArgs {
                    data_dir: &data,
                    out_dir: &out,
                    init_embeddings: init_embeddings.as_deref(),
                    resume: resume.as_deref(),
                },
            )
        }
        Command::Eval {
            checkpoint,
            data,
            out,
            config,
            split,
            tasks,
            combos,
        } => {
            let cfg = config.map(|p| config::load_config(&p)).transpose()?;
            let split: SplitChoice = split.parse().map_err(Error::Config)?;
            commands::eval::run(&commands::eval::EvalArgs {
                checkpoint: &checkpoint,
                data_dir: &data,
                out_dir: &out,
                config: cfg.as_ref(),
                split,
                tasks,
                combos,
            })
        }
        Command::Explain {
            checkpoint,
            data,
            out,
            task,
            doc_ids,
            sample_per_class,
            config,
        } => {
            let mut cfg = config.map(|p| config::load_config(&p)).transpose()?;
            if let (Some(cfg), Some(threads)) = (cfg.as_mut(), cli.threads) {
                cfg.threads = threads.max(1);
            }
            commands::explain::run(&commands::explain::ExplainArgs {
                checkpoint: &checkpoint,
                data_dir: &data,
                out_dir: &out,
                task: &task,
                doc_ids,
                sample_per_class,
                config: cfg.as_ref(),
            })
        }
        Command::Associate {
            out,
            stems,
            explanations,
            data,
            from_counts,
        } => commands::associate::run(&commands::associate::AssociateArgs {
            out_dir: &out,
            stems,
            explanations: explanations.as_deref(),
            data_dir: data.as_deref(),
            from_counts: from_counts.as_deref(),
        }),
    }
}
