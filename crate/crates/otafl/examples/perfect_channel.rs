//! Debug-mode run with the aggregation error forced to zero, compared
//! against centralized full-gradient descent on the pooled objective. The
//! two trajectories must coincide to numerical precision.
//!
//! ```bash
//! cargo run --release --example perfect_channel
//! ```

use nalgebra::DVector;
use otafl::config::parse_config;
use otafl::ridge::{global_gradient, global_loss};
use otafl::sim::{run_simulation, StrategyConfig, World};

fn main() -> otafl::error::Result<()> {
    let config = parse_config(
        None,
        &["run.perfect_channel=true".into(), "run.rounds=50".into()],
    )?;
    let world = World::build(&config)?;
    let strategy = StrategyConfig::from_config(&config);
    let records = run_simulation(&world, &strategy)?;

    let mut w = DVector::<f64>::zeros(world.task.model_dim);
    let mut worst = 0.0f64;
    println!(
        "{:>6}  {:>14}  {:>14}  {:>10}",
        "round", "simulated loss", "central loss", "|dw|"
    );
    for r in &records {
        w -= world.task.eta * global_gradient(&w, &world.datasets, world.task.rho);
        let central_loss = global_loss(&w, &world.datasets, world.task.rho);
        let dev = (&w - DVector::from_column_slice(&r.model)).norm();
        worst = worst.max(dev);
        if r.round % 5 == 0 || r.round == 1 {
            println!(
                "{:>6}  {:>14.6e}  {:>14.6e}  {:>10.2e}",
                r.round, r.loss, central_loss, dev
            );
        }
    }
    println!("\nworst trajectory deviation: {worst:.2e}");
    Ok(())
}
