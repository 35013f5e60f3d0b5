//! Running-average transmit power per round for the four power strategies
//! under the proposed combiner (the first figure's experiment).
//!
//! ```bash
//! cargo run --release --example power_convergence
//! ```

use otafl::config::{parse_config, PowerStrategyKind};
use otafl::sim::{power_convergence_round, run_simulation, StrategyConfig, World};

fn main() -> otafl::error::Result<()> {
    let base = parse_config(None, &[])?;
    let world = World::build(&base)?;
    println!(
        "per-UE running-average power (watts), budget {} W long-term / {} W instantaneous",
        base.budget.p_ave_w, base.budget.p_max_w
    );

    for power in [
        PowerStrategyKind::Lofpc,
        PowerStrategyKind::Lgr,
        PowerStrategyKind::Ci,
        PowerStrategyKind::Fixed,
    ] {
        let mut cfg = base.clone();
        cfg.strategy.power = power;
        let strategy = StrategyConfig::from_config(&cfg);
        let records = run_simulation(&world, &strategy)?;
        println!("\n{}", strategy.label());
        println!("round   avg power per UE");
        for r in records
            .iter()
            .filter(|r| [1, 10, 50, 100, 200, 300].contains(&r.round))
        {
            let avgs: Vec<String> = r.avg_power.iter().map(|p| format!("{p:.4}")).collect();
            println!("{:>5}   [{}]", r.round, avgs.join(", "));
        }
        match power_convergence_round(&records, &world.budget, 0.05) {
            Some(t) => println!("within 5% of the long-term budget from round {t}"),
            None => println!("never settled within 5% of the long-term budget"),
        }
    }
    Ok(())
}
