//! Final training loss for every combiner x power-strategy combination on
//! a shared seed (the second figure's experiment).
//!
//! ```bash
//! cargo run --release --example loss_comparison
//! ```

use otafl::config::{parse_config, BeamformerKind, PowerStrategyKind};
use otafl::sim::{run_simulation, StrategyConfig, World};

fn main() -> otafl::error::Result<()> {
    let base = parse_config(None, &[])?;
    let world = World::build(&base)?;
    println!(
        "final loss after {} rounds (seed {}); F* = {:.6e}\n",
        world.rounds, world.seed, world.f_star
    );
    println!("{:<12} {:>14} {:>14}", "power", "MOP", "MRC");

    for power in [
        PowerStrategyKind::Lofpc,
        PowerStrategyKind::Lgr,
        PowerStrategyKind::Ci,
        PowerStrategyKind::Fixed,
    ] {
        let mut row = format!("{:<12}", power.to_string());
        for beamformer in [BeamformerKind::Mop, BeamformerKind::Mrc] {
            let mut cfg = base.clone();
            cfg.strategy.beamformer = beamformer;
            cfg.strategy.power = power;
            let strategy = StrategyConfig::from_config(&cfg);
            let records = run_simulation(&world, &strategy)?;
            row.push_str(&format!(" {:>14.6e}", records.last().unwrap().loss));
        }
        println!("{row}");
    }
    println!("\nlower is better; the proposed combiner should dominate column-wise");
    Ok(())
}
