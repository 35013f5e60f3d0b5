//! Experiment presets and machine-readable result emission.
//!
//! Each preset writes schema-stable CSV (UTF-8, '.' decimal separator) plus
//! a JSON summary embedding the master seed and the fully resolved
//! configuration, so any output file is regenerable from its own metadata.
//!
//! - `fig1`: running-average power per round for the four power strategies
//!   under the proposed combiner (`fig1_avg_power.csv`).
//! - `fig2`: loss per round for all eight combiner x power combinations
//!   (`fig2_loss.csv`).
//! - `fig3`: penalty-parameter sweep summary (`fig3_v_sweep.csv`).
//! - `single`: full per-round records of one run (`single_rounds.csv`).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{BeamformerKind, PowerStrategyKind, SimulationConfig};
use crate::error::{Error, Result};
use crate::sim::{
    power_convergence_round, run_simulation, sweep_v, RoundRecord, StrategyConfig, World,
};

/// Figure presets plus a plain single run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig1,
    Fig2,
    Fig3,
    Single,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fig1" => Ok(Preset::Fig1),
            "fig2" => Ok(Preset::Fig2),
            "fig3" => Ok(Preset::Fig3),
            "single" => Ok(Preset::Single),
            other => Err(Error::Config(format!(
                "unknown preset '{other}' (expected fig1, fig2, fig3 or single)"
            ))),
        }
    }
}

/// The V values swept by the `fig3` preset.
pub const FIG3_V_VALUES: [f64; 3] = [1.0, 10.0, 100.0];

const POWER_STRATEGIES: [PowerStrategyKind; 4] = [
    PowerStrategyKind::Lofpc,
    PowerStrategyKind::Lgr,
    PowerStrategyKind::Ci,
    PowerStrategyKind::Fixed,
];

#[derive(Debug, Serialize)]
struct RunSummary {
    preset: String,
    seed: u64,
    rounds: usize,
    strategy: String,
    final_loss: f64,
    final_optimality_gap: f64,
    optimal_loss: f64,
    model_norm_bound: f64,
    power_convergence_round: Option<usize>,
    files: Vec<String>,
    config: SimulationConfig,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn float(x: f64) -> String {
    // Shortest round-trip representation; locale-free.
    format!("{x}")
}

/// Runs a preset, writes its files under `out_dir`, and returns the paths.
pub fn run_experiment(
    preset: Preset,
    config: &SimulationConfig,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    match preset {
        Preset::Fig1 => fig1(config, out_dir),
        Preset::Fig2 => fig2(config, out_dir),
        Preset::Fig3 => fig3(config, out_dir),
        Preset::Single => single(config, out_dir),
    }
}

fn fig1(config: &SimulationConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let world = World::build(config)?;
    let mut csv = String::from("round,strategy,ue,avg_power\n");
    for power in POWER_STRATEGIES {
        let mut cfg = config.clone();
        cfg.strategy.beamformer = BeamformerKind::Mop;
        cfg.strategy.power = power;
        let strategy = StrategyConfig::from_config(&cfg);
        let records = run_simulation(&world, &strategy)?;
        let label = strategy.label();
        for r in &records {
            for (ue, avg) in r.avg_power.iter().enumerate() {
                let _ = writeln!(csv, "{},{},{},{}", r.round, label, ue, float(*avg));
            }
        }
    }
    let csv_path = out_dir.join("fig1_avg_power.csv");
    write_file(&csv_path, &csv)?;
    let summary_path = out_dir.join("fig1_summary.json");
    write_summary(
        &summary_path,
        "fig1",
        config,
        &world,
        "MOP-{LOFPC,Lgr,Ci,Fixed}",
        None,
        vec![csv_path.clone()],
    )?;
    Ok(vec![csv_path, summary_path])
}

fn fig2(config: &SimulationConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let world = World::build(config)?;
    let mut csv = String::from("round,beamformer,power,loss\n");
    for beamformer in [BeamformerKind::Mop, BeamformerKind::Mrc] {
        for power in POWER_STRATEGIES {
            let mut cfg = config.clone();
            cfg.strategy.beamformer = beamformer;
            cfg.strategy.power = power;
            let strategy = StrategyConfig::from_config(&cfg);
            let records = run_simulation(&world, &strategy)?;
            for r in &records {
                let _ = writeln!(
                    csv,
                    "{},{},{},{}",
                    r.round,
                    beamformer,
                    power,
                    float(r.loss)
                );
            }
        }
    }
    let csv_path = out_dir.join("fig2_loss.csv");
    write_file(&csv_path, &csv)?;
    let summary_path = out_dir.join("fig2_summary.json");
    write_summary(
        &summary_path,
        "fig2",
        config,
        &world,
        "{MOP,MRC}x{LOFPC,Lgr,Ci,Fixed}",
        None,
        vec![csv_path.clone()],
    )?;
    Ok(vec![csv_path, summary_path])
}

fn fig3(config: &SimulationConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let world = World::build(config)?;
    let strategy = StrategyConfig::from_config(config);
    let summaries = sweep_v(&world, &strategy, &FIG3_V_VALUES)?;
    let mut csv = String::from("v,final_loss,convergence_round\n");
    for s in &summaries {
        let conv = s
            .convergence_round
            .map(|r| r.to_string())
            .unwrap_or_default();
        let _ = writeln!(csv, "{},{},{}", float(s.v), float(s.final_loss), conv);
    }
    let csv_path = out_dir.join("fig3_v_sweep.csv");
    write_file(&csv_path, &csv)?;
    let summary_path = out_dir.join("fig3_summary.json");
    write_summary(
        &summary_path,
        "fig3",
        config,
        &world,
        &strategy.label(),
        None,
        vec![csv_path.clone()],
    )?;
    Ok(vec![csv_path, summary_path])
}

fn single(config: &SimulationConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let world = World::build(config)?;
    let strategy = StrategyConfig::from_config(config);
    let records = run_simulation(&world, &strategy)?;
    let csv_path = out_dir.join("single_rounds.csv");
    write_file(&csv_path, &records_csv(&records))?;
    let summary_path = out_dir.join("single_summary.json");
    write_summary(
        &summary_path,
        "single",
        config,
        &world,
        &strategy.label(),
        Some(&records),
        vec![csv_path.clone()],
    )?;
    Ok(vec![csv_path, summary_path])
}

/// Full per-round record schema shared by the `single` preset and tests.
pub fn records_csv(records: &[RoundRecord]) -> String {
    let mut csv = String::from(
        "round,loss,optimality_gap,ue,power,avg_power,queue,phi,phi_initial,bias_bound,mse_bound,error_norm_squared,alternation_iters\n",
    );
    for r in records {
        for ue in 0..r.power.len() {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.round,
                float(r.loss),
                float(r.optimality_gap),
                ue,
                float(r.power[ue]),
                float(r.avg_power[ue]),
                float(r.queue[ue]),
                float(r.phi),
                float(r.phi_initial),
                float(r.bias_bound),
                float(r.mse_bound),
                float(r.error_norm_squared),
                r.alternation_iters,
            );
        }
    }
    csv
}

#[allow(clippy::too_many_arguments)]
fn write_summary(
    path: &Path,
    preset: &str,
    config: &SimulationConfig,
    world: &World,
    strategy: &str,
    records: Option<&[RoundRecord]>,
    files: Vec<PathBuf>,
) -> Result<()> {
    let (final_loss, final_gap, conv) = match records {
        Some(rs) => {
            let last = rs.last();
            (
                last.map(|r| r.loss).unwrap_or(f64::NAN),
                last.map(|r| r.optimality_gap).unwrap_or(f64::NAN),
                power_convergence_round(rs, &world.budget, 0.05),
            )
        }
        None => (f64::NAN, f64::NAN, None),
    };
    let summary = RunSummary {
        preset: preset.to_string(),
        seed: world.seed,
        rounds: world.rounds,
        strategy: strategy.to_string(),
        final_loss,
        final_optimality_gap: final_gap,
        optimal_loss: world.f_star,
        model_norm_bound: world.gap.g,
        power_convergence_round: conv,
        files: files.iter().map(|p| p.display().to_string()).collect(),
        config: config.clone(),
    };
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::ConfigParse(format!("summary serialization: {e}")))?;
    write_file(path, &json)
}
