//! Evaluation harness for forward-backward answer verification: run a
//! dataset against a live or replayed model, sweep the combination knobs
//! offline, and audit the emitted results.

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

mod commands;
mod config;
mod dataset;

use config::{BackendChoice, Overrides};
use dataset::DatasetFormat;

#[derive(Parser)]
#[command(
    name = "fobar",
    version,
    about = "Forward-backward reasoning evaluation harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Default)]
struct ConfigFlags {
    /// TOML config file; flags override it, it overrides the environment.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Forward weight in [0,1]; 1 = pure majority voting.
    #[arg(long)]
    alpha: Option<f64>,
    /// Additive smoothing for backward counts.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Forward chains per question.
    #[arg(long)]
    mf: Option<usize>,
    /// Backward chains per (candidate, mask) pair.
    #[arg(long)]
    mb: Option<usize>,
    #[arg(long)]
    temperature: Option<f64>,
    /// Model id sent to the backend (also picks m_f/m_b defaults).
    #[arg(long)]
    model: Option<String>,
    /// Prompt pack name under the packs directory.
    #[arg(long)]
    prompt_pack: Option<String>,
    #[arg(long)]
    packs_dir: Option<PathBuf>,
    #[arg(long)]
    max_tokens: Option<usize>,
    /// Upper bound on in-flight backend requests.
    #[arg(long)]
    parallelism: Option<usize>,
    /// Run backward sampling even when forward voting is unanimous.
    #[arg(long)]
    no_skip_unanimous: bool,
    /// live = OpenAI-compatible endpoint (token from FOBAR_API_KEY or
    /// OPENAI_API_KEY), replay = recorded fixtures only.
    #[arg(long, value_enum)]
    backend: Option<BackendChoice>,
    /// Record directory for replay mode.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Cache directory for live mode.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

impl ConfigFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            alpha: self.alpha,
            epsilon: self.epsilon,
            m_f: self.mf,
            m_b: self.mb,
            temperature: self.temperature,
            model: self.model.clone(),
            prompt_pack: self.prompt_pack.clone(),
            packs_dir: self.packs_dir.clone(),
            max_tokens: self.max_tokens,
            parallelism: self.parallelism,
            skip_backward_when_unanimous: if self.no_skip_unanimous {
                Some(false)
            } else {
                None
            },
            backend: self.backend,
            fixtures: self.fixtures.clone(),
            cache_dir: self.cache_dir.clone(),
        }
    }
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Evaluate a dataset and write per-question records plus a manifest.
    Run {
        #[arg(long)]
        dataset: PathBuf,
        /// jsonl (default, inferred from extension) or csv.
        #[arg(long, value_enum)]
        format: Option<DatasetFormat>,
        /// Output directory for results.jsonl and manifest.json.
        #[arg(long)]
        out: PathBuf,
        /// Evaluate only the first N questions.
        #[arg(long)]
        limit: Option<usize>,
        #[command(flatten)]
        config: ConfigFlags,
    },
    /// Recompute accuracy over alpha / backward-budget grids from a
    /// finished run's cache; never issues a live request.
    Sweep {
        /// Directory holding manifest.json from a previous run.
        #[arg(long)]
        run: PathBuf,
        /// Comma-separated alphas, e.g. 0,0.1,0.2,...,1.0
        #[arg(long)]
        alpha_grid: Option<String>,
        /// Comma-separated backward budgets, e.g. 0,5,10
        #[arg(long)]
        mb_grid: Option<String>,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute accuracy from a results file and verify its records.
    Rescore {
        #[arg(long)]
        results: PathBuf,
    },
    /// Parse and sanity-check a dataset without running anything.
    ValidateDataset {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum)]
        format: Option<DatasetFormat>,
    },
    /// Inspect the response cache.
    Cache {
        #[command(subcommand)]
        command: CacheCommand,
    },
}

#[derive(Subcommand)]
enum CacheCommand {
    /// Per-model record counts and sizes.
    Stats {
        #[arg(long, default_value = ".fobar-cache")]
        cache_dir: PathBuf,
    },
}

#[tokio::main]
async fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();

    match Cli::parse().command {
        Command::Run {
            dataset,
            format,
            out,
            limit,
            config,
        } => {
            let setup = config::resolve(config.overrides(), config.config.as_deref())?;
            commands::run::cmd_run(setup, &dataset, format, &out, limit).await?;
        }
        Command::Sweep {
            run,
            alpha_grid,
            mb_grid,
            out,
        } => {
            let alphas = alpha_grid
                .as_deref()
                .map(commands::sweep::parse_grid_f64)
                .transpose()?
                .unwrap_or_default();
            let mbs = mb_grid
                .as_deref()
                .map(commands::sweep::parse_grid_usize)
                .transpose()?
                .unwrap_or_default();
            commands::sweep::cmd_sweep(&run, &alphas, &mbs, out.as_deref()).await?;
        }
        Command::Rescore { results } => {
            commands::rescore::cmd_rescore(&results)?;
        }
        Command::ValidateDataset { dataset, format } => {
            commands::validate::cmd_validate(&dataset, format)?;
        }
        Command::Cache { command } => match command {
            CacheCommand::Stats { cache_dir } => {
                commands::cache::cmd_cache_stats(&cache_dir)?;
            }
        },
    }
    Ok(())
}
