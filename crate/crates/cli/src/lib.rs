//! Command-line front end for the holoforge pipeline.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod output;
pub mod render;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;
pub use error::{CliError, CliResult};

use output::Outputs;

pub const THREADS_ENV: &str = "HOLOFORGE_THREADS";
const DEFAULT_OUT: &str = "holoforge-out";

#[derive(Debug, Parser)]
#[command(name = "holoforge", version, about = "Lensfree holography simulation and reconstruction")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON run configuration; built-in defaults when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (some commands also accept a file name here).
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; falls back to HOLOFORGE_THREADS, then to the number of cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Padding factor for synthesis; the scene is embedded in free space.
    #[arg(long, global = true)]
    pub pad: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Synthesize a hologram stack from the configured phantom.
    Simulate(commands::simulate::SimulateArgs),
    /// Multi-height phase recovery from a stack manifest.
    Reconstruct(commands::reconstruct::ReconstructArgs),
    /// Estimate the sample-to-sensor distance of one hologram.
    Autofocus(commands::focus::AutofocusArgs),
    /// Fuse sub-pixel shifted frames into a high-resolution hologram.
    Psr(commands::psr::PsrArgs),
    /// SSIM against a reference and per-cell phase measurements.
    Metrics(commands::metrics::MetricsArgs),
    /// Write a tiled training-pair archive.
    ExportTraining(commands::export::ExportArgs),
    /// Quality against the number of heights, or against defocus with --defocus.
    Sweep(commands::sweep::SweepArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Reconstruct(_) => "reconstruct",
            Command::Autofocus(_) => "autofocus",
            Command::Psr(_) => "psr",
            Command::Metrics(_) => "metrics",
            Command::ExportTraining(_) => "export-training",
            Command::Sweep(_) => "sweep",
        }
    }
}

/// Resolved settings shared by every subcommand.
pub struct Context {
    pub config: RunConfig,
    pub threads: usize,
    out: Option<PathBuf>,
    subcommand: &'static str,
}

impl Context {
    pub fn new(common: &CommonArgs, subcommand: &'static str, threads: usize) -> CliResult<Self> {
        let mut config = match &common.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = common.seed {
            config.seed = seed;
        }
        if let Some(pad) = common.pad {
            config.pad_factor = pad;
        }
        config.validate()?;
        Ok(Self {
            out: common.out.clone().or_else(|| config.output_dir.clone()),
            config,
            threads,
            subcommand,
        })
    }

    /// Output directory and optional file name. An `--out` ending in `extension` names
    /// the primary artifact; its parent becomes the directory.
    pub fn out_target(&self, extension: &str) -> (PathBuf, Option<String>) {
        let out = self.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        if out.extension().is_some_and(|e| e.eq_ignore_ascii_case(extension)) {
            let name = out.file_name().map(|n| n.to_string_lossy().into_owned());
            let dir = out.parent().map(Path::to_path_buf).unwrap_or_default();
            let dir = if dir.as_os_str().is_empty() { PathBuf::from(".") } else { dir };
            (dir, name)
        } else {
            (out, None)
        }
    }

    pub fn outputs(&self, dir: &Path) -> CliResult<Outputs> {
        Outputs::new(dir, self.subcommand, self.config.hash(), self.config.seed, self.threads)
    }
}

/// Thread count from the flag, then the environment.
pub fn thread_count(flag: Option<usize>) -> CliResult<Option<usize>> {
    if let Some(n) = flag {
        return if n == 0 {
            Err(CliError::Validation("--threads must be at least 1".into()))
        } else {
            Ok(Some(n))
        };
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Validation(format!("{THREADS_ENV}={v} is not a positive integer"))),
        },
        _ => Ok(None),
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let requested = thread_count(cli.common.threads)?;
    if let Some(n) = requested {
        // a second call in the same process (tests) keeps the first pool
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::debug!("thread pool already configured: {e}");
        }
    }
    let ctx = Context::new(&cli.common, cli.command.name(), rayon::current_num_threads())?;
    match &cli.command {
        Command::Simulate(a) => commands::simulate::run(&ctx, a),
        Command::Reconstruct(a) => commands::reconstruct::run(&ctx, a),
        Command::Autofocus(a) => commands::focus::run(&ctx, a),
        Command::Psr(a) => commands::psr::run(&ctx, a),
        Command::Metrics(a) => commands::metrics::run(&ctx, a),
        Command::ExportTraining(a) => commands::export::run(&ctx, a),
        Command::Sweep(a) => commands::sweep::run(&ctx, a),
    }
}
