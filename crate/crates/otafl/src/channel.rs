//! Network geometry and the uplink channel model.
//!
//! Large-scale gains follow a log-distance path-loss law referenced to the
//! free-space loss at `d0`; small-scale fading is Rayleigh (i.i.d. standard
//! complex Gaussian per receive antenna). The channel from UE `k` to AP `l`
//! in a round is `h = sqrt(beta[k][l]) * g`, so `E[||h||^2] = n_rx * beta`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Static node layout: UE and AP coordinates in a square service area.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub ue_positions: Vec<[f64; 2]>,
    pub ap_positions: Vec<[f64; 2]>,
    pub area_side: f64,
    pub n_rx_antennas: usize,
}

impl Topology {
    pub fn n_ues(&self) -> usize {
        self.ue_positions.len()
    }

    pub fn n_aps(&self) -> usize {
        self.ap_positions.len()
    }
}

/// Log-distance path-loss parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossParams {
    /// Carrier frequency in Hz.
    pub carrier_hz: f64,
    /// Reference distance d0 in meters; distances below d0 clamp to d0.
    pub ref_distance_m: f64,
    /// Path-loss exponent.
    pub exponent: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        // Urban log-distance defaults; the reference loss at d0 is free-space.
        Self {
            carrier_hz: 2.4e9,
            ref_distance_m: 1.0,
            exponent: 3.0,
        }
    }
}

/// Linear-scale large-scale power gains `beta[k][l]` for every UE-AP pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LargeScaleGains {
    beta: Vec<Vec<f64>>,
}

impl LargeScaleGains {
    pub fn beta(&self, ue: usize, ap: usize) -> f64 {
        self.beta[ue][ap]
    }

    pub fn n_ues(&self) -> usize {
        self.beta.len()
    }

    pub fn n_aps(&self) -> usize {
        self.beta.first().map_or(0, Vec::len)
    }
}

/// One round's small-scale realization: `h[k][l]` is the length-`n_rx`
/// complex gain vector from UE `k` to AP `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: Vec<Vec<Vec<Complex64>>>,
    pub round_index: u64,
}

impl ChannelRealization {
    pub fn n_ues(&self) -> usize {
        self.h.len()
    }

    pub fn n_aps(&self) -> usize {
        self.h.first().map_or(0, Vec::len)
    }

    pub fn n_rx(&self) -> usize {
        self.h
            .first()
            .and_then(|row| row.first())
            .map_or(0, Vec::len)
    }
}

/// Drops K UEs and L APs uniformly at random into `[0, area_side]^2`.
pub fn place_nodes(
    seed: u64,
    area_side: f64,
    n_ues: usize,
    n_aps: usize,
    n_rx_antennas: usize,
) -> Result<Topology> {
    if n_ues == 0 || n_aps == 0 {
        return Err(Error::Config("need at least one UE and one AP".into()));
    }
    if n_rx_antennas == 0 {
        return Err(Error::Config("need at least one receive antenna".into()));
    }
    if !(area_side > 0.0) {
        return Err(Error::Config(format!(
            "area side must be positive, got {area_side}"
        )));
    }
    let mut rng = stream_rng(seed, Stream::Placement, 0);
    let mut draw = |n: usize| -> Vec<[f64; 2]> {
        (0..n)
            .map(|_| [rng.gen_range(0.0..area_side), rng.gen_range(0.0..area_side)])
            .collect()
    };
    Ok(Topology {
        ue_positions: draw(n_ues),
        ap_positions: draw(n_aps),
        area_side,
        n_rx_antennas,
    })
}

/// Path loss in dB at `distance`, log-distance model with free-space
/// reference loss at `d0`. Distances below `d0` are clamped to `d0`.
pub fn path_loss_db(distance: f64, params: &PathLossParams) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::Config(format!(
            "distance must be positive, got {distance}"
        )));
    }
    let d0 = params.ref_distance_m;
    let d = distance.max(d0);
    let pl0 = 20.0 * (4.0 * std::f64::consts::PI * d0 * params.carrier_hz / SPEED_OF_LIGHT).log10();
    Ok(pl0 + 10.0 * params.exponent * (d / d0).log10())
}

/// Deterministic large-scale gains for a topology.
pub fn large_scale_gains(topology: &Topology, params: &PathLossParams) -> Result<LargeScaleGains> {
    let beta = topology
        .ue_positions
        .iter()
        .map(|ue| {
            topology
                .ap_positions
                .iter()
                .map(|ap| {
                    let d = ((ue[0] - ap[0]).powi(2) + (ue[1] - ap[1]).powi(2)).sqrt();
                    // Clamp handles coincident random placements.
                    let pl = path_loss_db(d.max(params.ref_distance_m), params)?;
                    Ok(10f64.powf(-pl / 10.0))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LargeScaleGains { beta })
}

/// Standard complex Gaussian sample: unit variance split across re/im.
pub(crate) fn complex_gaussian<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Samples the round-`round` Rayleigh realization. The stream is keyed by
/// `(seed, round)`, so realizations are independent of evaluation order.
pub fn sample_channel(
    topology: &Topology,
    gains: &LargeScaleGains,
    seed: u64,
    round: u64,
) -> Result<ChannelRealization> {
    if gains.n_ues() != topology.n_ues() || gains.n_aps() != topology.n_aps() {
        return Err(Error::Dimension(format!(
            "gains are {}x{} but topology is {}x{}",
            gains.n_ues(),
            gains.n_aps(),
            topology.n_ues(),
            topology.n_aps()
        )));
    }
    let mut rng = stream_rng(seed, Stream::Fading, round);
    let h = (0..topology.n_ues())
        .map(|k| {
            (0..topology.n_aps())
                .map(|l| {
                    let amp = gains.beta(k, l).sqrt();
                    (0..topology.n_rx_antennas)
                        .map(|_| complex_gaussian(&mut rng) * amp)
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(ChannelRealization {
        h,
        round_index: round,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn placement_stays_in_area_and_is_seeded() {
        let topo = place_nodes(7, 500.0, 3, 6, 4).unwrap();
        assert_eq!(topo.n_ues(), 3);
        assert_eq!(topo.n_aps(), 6);
        for p in topo.ue_positions.iter().chain(topo.ap_positions.iter()) {
            assert!(p[0] >= 0.0 && p[0] <= 500.0);
            assert!(p[1] >= 0.0 && p[1] <= 500.0);
        }
        let again = place_nodes(7, 500.0, 3, 6, 4).unwrap();
        assert_eq!(topo, again);
        let other = place_nodes(8, 500.0, 3, 6, 4).unwrap();
        assert_ne!(topo, other);
    }

    #[test]
    fn placement_rejects_degenerate_inputs() {
        assert!(place_nodes(1, 500.0, 0, 6, 4).is_err());
        assert!(place_nodes(1, 500.0, 3, 0, 4).is_err());
        assert!(place_nodes(1, 0.0, 3, 6, 4).is_err());
        assert!(place_nodes(1, -1.0, 3, 6, 4).is_err());
        assert!(place_nodes(1, 500.0, 3, 6, 0).is_err());
    }

    #[test]
    fn free_space_reference_at_2_4_ghz() {
        // 20*log10(4*pi*1m*2.4GHz/c) evaluates to about 40.05 dB.
        let params = PathLossParams::default();
        let pl = path_loss_db(1.0, &params).unwrap();
        assert!((pl - 40.05).abs() < 0.05, "pl = {pl}");
    }

    #[test]
    fn exponent_adds_ten_n_db_per_decade() {
        let params = PathLossParams::default();
        let pl0 = path_loss_db(1.0, &params).unwrap();
        let pl10 = path_loss_db(10.0, &params).unwrap();
        assert!((pl10 - pl0 - 30.0).abs() < 1e-9);
    }

    #[test]
    fn path_loss_is_monotone_and_clamped() {
        let params = PathLossParams::default();
        let pl1 = path_loss_db(50.0, &params).unwrap();
        let pl2 = path_loss_db(120.0, &params).unwrap();
        assert!(pl2 > pl1);
        // Below-reference distances clamp to the reference loss.
        let clamped = path_loss_db(0.2, &params).unwrap();
        let at_ref = path_loss_db(1.0, &params).unwrap();
        assert_eq!(clamped, at_ref);
        assert!(path_loss_db(0.0, &params).is_err());
        assert!(path_loss_db(-3.0, &params).is_err());
    }

    #[test]
    fn betas_positive_for_reference_geometry() {
        let topo = place_nodes(7, 500.0, 3, 6, 4).unwrap();
        let gains = large_scale_gains(&topo, &PathLossParams::default()).unwrap();
        for k in 0..3 {
            for l in 0..6 {
                let b = gains.beta(k, l);
                assert!(b > 0.0 && b.is_finite());
            }
        }
    }

    #[test]
    fn channel_is_deterministic_per_round() {
        let topo = place_nodes(7, 500.0, 3, 6, 4).unwrap();
        let gains = large_scale_gains(&topo, &PathLossParams::default()).unwrap();
        let a = sample_channel(&topo, &gains, 7, 12).unwrap();
        let b = sample_channel(&topo, &gains, 7, 12).unwrap();
        assert_eq!(a, b);
        let c = sample_channel(&topo, &gains, 7, 13).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn channel_energy_matches_beta() {
        // Monte-Carlo estimate of E[||h||^2]/n_rx against beta for one pair.
        let topo = place_nodes(7, 500.0, 2, 2, 4).unwrap();
        let gains = large_scale_gains(&topo, &PathLossParams::default()).unwrap();
        let n_rounds = 20_000usize;
        let (k, l) = (0, 1);
        let beta = gains.beta(k, l);
        let mut samples = Vec::with_capacity(n_rounds);
        for t in 0..n_rounds {
            let ch = sample_channel(&topo, &gains, 99, t as u64).unwrap();
            let e: f64 = ch.h[k][l].iter().map(|z| z.norm_sqr()).sum();
            samples.push(e / topo.n_rx_antennas as f64);
        }
        let mean = samples.iter().sum::<f64>() / n_rounds as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n_rounds - 1) as f64;
        let se = (var / n_rounds as f64).sqrt();
        assert!(
            (mean - beta).abs() < 3.0 * se,
            "mean {mean:e} vs beta {beta:e} (se {se:e})"
        );
    }

    #[test]
    fn successive_rounds_are_uncorrelated() {
        let topo = place_nodes(7, 500.0, 1, 1, 1).unwrap();
        let gains = large_scale_gains(&topo, &PathLossParams::default()).unwrap();
        let n = 20_000usize;
        let draws: Vec<Complex64> = (0..=n)
            .map(|t| sample_channel(&topo, &gains, 5, t as u64).unwrap().h[0][0][0])
            .collect();
        let scale = gains.beta(0, 0);
        // Sample correlation of real parts between rounds t and t+1.
        let xs: Vec<f64> = draws.iter().map(|z| z.re / scale.sqrt()).collect();
        let num: f64 = (0..n).map(|t| xs[t] * xs[t + 1]).sum::<f64>() / n as f64;
        // Entries are unit-variance/2 per component; 3-sigma MC band.
        let band = 3.0 * (0.25 / n as f64).sqrt();
        assert!(num.abs() < band, "lag-1 correlation {num} exceeds {band}");
    }
}
