//! Monte-Carlo sanity checks of the channel model: path-loss curve, the
//! match between sampled fading energy and the large-scale gains, and
//! round-to-round independence.
//!
//! ```bash
//! cargo run --release --example channel_statistics
//! ```

use otafl::channel::{
    large_scale_gains, path_loss_db, place_nodes, sample_channel, PathLossParams,
};

fn main() -> otafl::error::Result<()> {
    let params = PathLossParams::default();
    println!(
        "log-distance path loss at {} GHz, exponent {}:",
        params.carrier_hz / 1e9,
        params.exponent
    );
    for d in [1.0, 10.0, 50.0, 100.0, 250.0, 500.0] {
        println!("  {:>6.1} m -> {:>7.2} dB", d, path_loss_db(d, &params)?);
    }

    let topology = place_nodes(7, 500.0, 3, 6, 4)?;
    let gains = large_scale_gains(&topology, &params)?;
    println!("\nUE-AP large-scale gains (dB):");
    for k in 0..3 {
        let row: Vec<String> = (0..6)
            .map(|l| format!("{:>7.1}", 10.0 * gains.beta(k, l).log10()))
            .collect();
        println!("  UE {k}: [{}]", row.join(", "));
    }

    // Fading energy vs beta for one UE-AP pair, averaged over many rounds.
    let rounds = 50_000;
    let (k, l) = (0, 0);
    let mut energy = 0.0;
    for t in 0..rounds {
        let ch = sample_channel(&topology, &gains, 7, t)?;
        energy += ch.h[k][l].iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    let estimate = energy / (rounds as f64 * topology.n_rx_antennas as f64);
    let beta = gains.beta(k, l);
    println!(
        "\nE[||h||^2]/N_r over {rounds} rounds for pair ({k},{l}): {estimate:.3e} vs beta {beta:.3e} ({:+.2}%)",
        100.0 * (estimate / beta - 1.0)
    );

    // Lag-1 correlation of a single entry across rounds.
    let mut prev = None;
    let mut corr = 0.0;
    for t in 0..rounds {
        let ch = sample_channel(&topology, &gains, 7, t)?;
        let x = ch.h[0][0][0].re / beta.sqrt();
        if let Some(p) = prev {
            corr += x * p;
        }
        prev = Some(x);
    }
    println!(
        "lag-1 correlation of one fading entry: {:+.4} (should be near zero)",
        corr / (rounds - 1) as f64 / 0.5
    );
    Ok(())
}
