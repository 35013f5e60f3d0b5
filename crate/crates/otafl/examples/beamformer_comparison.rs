//! Per-round surrogate value of the closed-form combiner against the MRC
//! baseline and a zero combiner, over fresh channel draws.
//!
//! ```bash
//! cargo run --release --example beamformer_comparison
//! ```

use otafl::beamforming::{build_inputs, mop_beamformer, mrc_beamformer, phi_from_inputs};
use otafl::channel::{large_scale_gains, place_nodes, sample_channel, PathLossParams};
use otafl::ota::{
    gap_coefficients, BeamformingVector, GapHyperparams, NoiseModel, PowerAllocation,
};

fn main() -> otafl::error::Result<()> {
    let topology = place_nodes(7, 500.0, 3, 6, 4)?;
    let gains = large_scale_gains(&topology, &PathLossParams::default())?;
    let noise = NoiseModel::from_dbm(-101.0);
    let hyper = GapHyperparams {
        g: 6.4,
        ..GapHyperparams::default()
    };
    let coeffs = gap_coefficients(&hyper, 1, 300);
    let p = PowerAllocation::from_powers(&[0.3, 0.3, 0.3])?;
    let q = 10;

    println!(
        "{:>6}  {:>12}  {:>12}  {:>12}  {:>8}",
        "round", "phi(MOP)", "phi(MRC)", "phi(zero)", "MRC/MOP"
    );
    let mut ratio_sum = 0.0;
    let rounds = 10;
    for t in 1..=rounds {
        let ch = sample_channel(&topology, &gains, 7, t)?;
        let inputs = build_inputs(&ch, &p)?;
        let mop = mop_beamformer(&inputs, &coeffs, noise.sigma2, q)?;
        let mrc = mrc_beamformer(&ch, &gains, &inputs, &coeffs, noise.sigma2, q)?;
        let zero = BeamformingVector::zeros(topology.n_aps(), topology.n_rx_antennas);
        let phi_mop = phi_from_inputs(&inputs, &mop, &coeffs, noise.sigma2, q);
        let phi_mrc = phi_from_inputs(&inputs, &mrc, &coeffs, noise.sigma2, q);
        let phi_zero = phi_from_inputs(&inputs, &zero, &coeffs, noise.sigma2, q);
        ratio_sum += phi_mrc / phi_mop;
        println!(
            "{t:>6}  {phi_mop:>12.4e}  {phi_mrc:>12.4e}  {phi_zero:>12.4e}  {:>8.1}",
            phi_mrc / phi_mop
        );
    }
    println!(
        "\nmean MRC/MOP surrogate ratio over {rounds} rounds: {:.1}x",
        ratio_sum / rounds as f64
    );
    Ok(())
}
