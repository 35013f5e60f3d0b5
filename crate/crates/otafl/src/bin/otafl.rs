//! Batch front end: resolve a configuration, run a preset, write CSV/JSON.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use otafl::config::parse_config;
use otafl::report::{run_experiment, Preset};

/// Over-the-air federated learning simulator for cell-free MIMO uplinks.
#[derive(Debug, Parser)]
#[command(name = "otafl", version, about)]
struct Cli {
    /// TOML configuration file; every key has a built-in default.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Experiment preset: fig1, fig2, fig3 or single.
    #[arg(long, default_value = "single")]
    preset: String,

    /// Master seed (overrides run.seed).
    #[arg(long)]
    seed: Option<u64>,

    /// Communication rounds (overrides run.rounds).
    #[arg(long)]
    rounds: Option<usize>,

    /// Output directory; OTAFL_OUT overrides the default, this flag wins.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Dotted-key override, e.g. --set lyapunov.v=25 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> otafl::error::Result<Vec<PathBuf>> {
    let preset: Preset = cli.preset.parse()?;
    let mut overrides = cli.overrides.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("run.seed={seed}"));
    }
    if let Some(rounds) = cli.rounds {
        overrides.push(format!("run.rounds={rounds}"));
    }
    let config = parse_config(cli.config.as_deref(), &overrides)?;
    let out_dir = cli
        .out
        .or_else(|| std::env::var_os("OTAFL_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    run_experiment(preset, &config, &out_dir)
}
