//! Penalty-parameter sweep: how V trades final loss against the speed at
//! which the running-average power settles into the long-term budget (the
//! third figure's experiment). Channel, noise and data draws are shared
//! across the sweep so V is the only variable.
//!
//! ```bash
//! cargo run --release --example v_tradeoff
//! ```

use otafl::config::parse_config;
use otafl::sim::{sweep_v, StrategyConfig, World};

fn main() -> otafl::error::Result<()> {
    let config = parse_config(None, &[])?;
    let world = World::build(&config)?;
    let strategy = StrategyConfig::from_config(&config);
    let summaries = sweep_v(&world, &strategy, &[0.1, 1.0, 10.0, 100.0, 1000.0])?;

    println!("seed {}, {} rounds\n", world.seed, world.rounds);
    println!(
        "{:>8}  {:>14}  {:>18}",
        "V", "final loss", "power convergence"
    );
    for s in &summaries {
        let conv = s
            .convergence_round
            .map(|r| format!("round {r}"))
            .unwrap_or_else(|| "not within horizon".into());
        println!("{:>8}  {:>14.6e}  {:>18}", s.v, s.final_loss, conv);
    }
    println!("\nlarger V favors the loss; smaller V reaches the budget sooner");
    Ok(())
}
