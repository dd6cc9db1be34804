//! `wildgen` command-line driver.

mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "wildgen", version, about = "Long-horizon wildlife trajectory generation")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed; every stage seed is derived from it.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Raw,
    Smoothed,
    Mbr,
    Full,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BaselineArg {
    Levy,
    Hgpr,
}

#[derive(Debug, Args)]
struct ToggleArgs {
    /// Skip Savitzky-Golay smoothing.
    #[arg(long)]
    no_smoothing: bool,
    /// Skip the real-data region filter.
    #[arg(long)]
    no_mbr: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic migration corpus.
    Synth,
    /// Train the autoencoder and latent mixture into a checkpoint.
    Train {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Sample trajectories from a checkpoint.
    Generate {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "full")]
        mode: ModeArg,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Fit a comparison generator on the corpus and sample from it.
    Baseline {
        #[arg(value_enum)]
        which: BaselineArg,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        count: Option<usize>,
        #[command(flatten)]
        toggles: ToggleArgs,
    },
    /// Compare generated sets against the real corpus.
    Evaluate {
        #[arg(long)]
        real: Option<PathBuf>,
        /// Generated trajectory files; `LABEL=PATH` sets the row label.
        #[arg(long, required = true, num_args = 1..)]
        generated: Vec<String>,
    },
    /// Export GeoJSON and SVG overlays.
    Plot {
        #[arg(long)]
        real: Option<PathBuf>,
        #[arg(long, num_args = 1..)]
        generated: Vec<PathBuf>,
        #[arg(long, num_args = 1..)]
        baseline: Vec<PathBuf>,
        /// Also draw the latent codes of the real corpus.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn report(err: &anyhow::Error) -> String {
    let kind = err
        .chain()
        .find_map(|e| e.downcast_ref::<wildgen::Error>())
        .map_or_else(
            || {
                if err.chain().any(|e| e.is::<std::io::Error>()) {
                    "io"
                } else if err.chain().any(|e| e.is::<toml::de::Error>()) {
                    "config"
                } else {
                    "error"
                }
            },
            |e| e.kind(),
        );
    let message = err.chain().map(ToString::to_string).collect::<Vec<_>>().join(": ");
    json!({ "error": kind, "message": message }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e.to_string();
            let line = first.lines().next().unwrap_or("usage error").trim_start_matches("error: ");
            eprintln!("{}", json!({ "error": "usage", "message": line }));
            return ExitCode::from(2);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", report(&e));
            ExitCode::FAILURE
        }
    }
}
