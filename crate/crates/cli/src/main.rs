//! `polarfuse` command line: runs one pipeline stage per invocation.
//!
//! Log verbosity follows `POLARFUSE_LOG` (env_logger filter syntax, default `info`).

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use polarfuse::io::{run_pipeline, Branch, Mode, PipelineConfig};

#[derive(Parser)]
#[command(name = "polarfuse", version, about = "Camera and 4D radar polar BEV fusion toolkit")]
struct Cli {
    /// Pipeline configuration (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `paths.out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate random scenes and their ADC cubes.
    Simulate,
    /// Turn one ADC cube into a radar point cloud.
    Process {
        #[arg(long)]
        adc: PathBuf,
        #[arg(long, value_parser = ["spectrum", "rd-dbf"])]
        branch: String,
    },
    /// Compute BEV features for every simulated frame.
    Fuse,
    /// Overfit the simulated frames and self-evaluate.
    TrainToy {
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Score a detection file against a ground-truth file.
    Eval {
        #[arg(long)]
        dets: PathBuf,
        #[arg(long)]
        gts: PathBuf,
    },
    /// Write camera, depth and BEV figures per frame.
    Render,
}

fn parent_dir(p: &Path) -> PathBuf {
    p.parent()
        .filter(|d| !d.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("POLARFUSE_LOG", "info")).init();
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::read(path).with_context(|| format!("loading {}", path.display()))?,
        None => PipelineConfig::default(),
    };
    let mode = match cli.command {
        Command::Simulate => Mode::Simulate,
        Command::Process { adc, branch } => Mode::Process {
            branch: branch.parse::<Branch>()?,
            adc,
        },
        Command::Fuse => Mode::Fuse,
        Command::TrainToy { steps } => Mode::TrainToy { steps },
        Command::Eval { dets, gts } => Mode::Eval { dets, gts },
        Command::Render => Mode::Render,
    };
    // single-file modes write next to their input unless told otherwise
    let default_out = match &mode {
        Mode::Process { adc, .. } if cli.config.is_none() => Some(parent_dir(adc)),
        Mode::Eval { dets, .. } if cli.config.is_none() => Some(parent_dir(dets)),
        _ => None,
    };
    if let Some(out) = cli.out.or(default_out) {
        cfg.paths.out_dir = out;
    }
    let summary = run_pipeline(&cfg, &mode).with_context(|| format!("{} failed", mode.name()))?;
    for p in &summary.outputs {
        println!("{}", p.display());
    }
    Ok(())
}
