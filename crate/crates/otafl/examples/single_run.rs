//! One full training run with the default setup, printing a round-by-round
//! digest and the final summary.
//!
//! ```bash
//! cargo run --release --example single_run
//! ```

use otafl::config::parse_config;
use otafl::sim::{power_convergence_round, run_simulation, StrategyConfig, World};

fn main() -> otafl::error::Result<()> {
    let config = parse_config(None, &["run.rounds=100".into()])?;
    let world = World::build(&config)?;
    let strategy = StrategyConfig::from_config(&config);

    println!(
        "{} over {} rounds, seed {}, {} UEs / {} APs x {} antennas",
        strategy.label(),
        world.rounds,
        world.seed,
        world.topology.n_ues(),
        world.topology.n_aps(),
        world.topology.n_rx_antennas
    );
    println!(
        "optimal loss F* = {:.6e}, model-norm bound G = {:.3}",
        world.f_star, world.gap.g
    );
    println!();
    println!("round    loss       gap        max avg power  max queue  phi");

    let records = run_simulation(&world, &strategy)?;
    for r in records.iter().filter(|r| r.round % 10 == 0 || r.round == 1) {
        let max_avg = r.avg_power.iter().cloned().fold(0.0f64, f64::max);
        let max_q = r.queue.iter().cloned().fold(0.0f64, f64::max);
        println!(
            "{:>5}  {:-9.3e}  {:-9.3e}  {:>12.4}  {:>9.4}  {:-9.3e}",
            r.round, r.loss, r.optimality_gap, max_avg, max_q, r.phi
        );
    }

    let last = records.last().unwrap();
    println!();
    println!("final loss           {:.6e}", last.loss);
    println!("final optimality gap {:.6e}", last.optimality_gap);
    println!(
        "power convergence    {:?} (first round with all running averages within 5% of budget)",
        power_convergence_round(&records, &world.budget, 0.05)
    );
    Ok(())
}
