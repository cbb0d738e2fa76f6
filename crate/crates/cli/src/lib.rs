//! `tactigrasp`: simulate grasps, collect and balance datasets, train and ablate the
//! success classifier.

pub mod commands;
pub mod config;
pub mod corpus;
pub mod error;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tactigrasp_core::dataset::Pool;

use crate::config::{key_table, Config};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "tactigrasp", version, about = "Tactile grasp-outcome simulation and learning workbench")]
#[command(after_help = after_help())]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one configuration key; repeatable, applied after the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Shorthand for `--set seed=N`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Shorthand for `--set workers=N`; never changes results.
    #[arg(long, global = true)]
    pub workers: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PoolArg {
    Known,
    Unknown,
}

impl From<PoolArg> for Pool {
    fn from(p: PoolArg) -> Self {
        match p {
            PoolArg::Known => Pool::Known,
            PoolArg::Unknown => Pool::Unknown,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Screen the corpus, pick a scale per object and split it into known/unknown pools.
    SelectObjects {
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate grasps and record a raw dataset (plus `.csv` and `.telemetry.csv` sidecars).
    Collect {
        #[arg(long)]
        out: PathBuf,
        /// Target sample count (overrides `dataset.n_target`).
        #[arg(long)]
        n: Option<usize>,
        /// Selection table from `select-objects`; without it every corpus object is used
        /// at `dataset.scale`.
        #[arg(long)]
        selection: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "known", requires = "selection")]
        pool: PoolArg,
    },
    /// Cap and class-balance a raw dataset per object.
    Filter {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-object cap (overrides `dataset.cap`).
        #[arg(long)]
        cap: Option<usize>,
    },
    /// K-fold training of one modality combination.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Modality mask, e.g. `vision+touch_left` (overrides `train.mask`).
        #[arg(long)]
        mask: Option<String>,
    },
    /// Full modality × sample-size ablation with per-object and unknown-object tables.
    Ablate {
        #[arg(long)]
        data: PathBuf,
        /// Held-out dataset of objects never seen in training.
        #[arg(long)]
        unknown: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Re-emit the tables and chart of a saved `ablation.json`.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Write one sample's tactile, camera and depth images.
    RenderSample {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        index: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Print the effective configuration in canonical form with its hash.
    ShowConfig,
}

fn after_help() -> String {
    format!("Configuration keys (key = default):\n{}", key_table())
}

fn load_config(g: &GlobalArgs) -> Result<Config, CliError> {
    let mut cfg = match &g.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    for kv in &g.set {
        cfg.apply_override(kv)?;
    }
    if let Some(s) = g.seed {
        cfg.set("seed", &s.to_string())?;
    }
    if let Some(w) = &g.workers {
        cfg.set("workers", w)?;
    }
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> Result<String, CliError> {
    let mut cfg = load_config(&cli.global)?;
    match &cli.command {
        Command::SelectObjects { out } => commands::select(&cfg, out),
        Command::Collect { out, n, selection, pool } => {
            if let Some(n) = n {
                cfg.set("dataset.n_target", &n.to_string())?;
            }
            commands::collect_cmd(&cfg, out, selection.as_deref().map(|p| (p, Pool::from(*pool))))
        }
        Command::Filter { input, out, cap } => {
            if let Some(c) = cap {
                cfg.set("dataset.cap", &c.to_string())?;
            }
            commands::filter_cmd(&cfg, input, out)
        }
        Command::Train { data, out_dir, mask } => {
            if let Some(m) = mask {
                cfg.set("train.mask", m)?;
            }
            commands::train_cmd(&cfg, data, out_dir)
        }
        Command::Ablate { data, unknown, out_dir } => commands::ablate_cmd(&cfg, data, unknown.as_deref(), out_dir),
        Command::Report { input, out_dir } => commands::report_cmd(input, out_dir),
        Command::RenderSample { data, index, out_dir } => commands::render_sample(&cfg, data, *index, out_dir),
        Command::ShowConfig => Ok(format!("{}\n{}", cfg.provenance(), cfg.canonical_text().trim_end())),
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = write!(out, "{}", e.render());
                    if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { 1 } else { 0 }
                }
                _ => {
                    let first = e.to_string().lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
                    let _ = writeln!(err, "{}", CliError::Usage(first).line());
                    let _ = writeln!(err, "Usage: tactigrasp [OPTIONS] <COMMAND>  (see --help)");
                    1
                }
            };
        }
    };
    match dispatch(&cli) {
        Ok(summary) => {
            let _ = writeln!(out, "{summary}");
            0
        }
        Err(e) => {
            let _ = writeln!(err, "{}", e.line());
            e.exit_code()
        }
    }
}
