//! Receive-beamformer design: the closed-form gap-minimizing combiner and
//! the MRC baseline.
//!
//! For fixed transmit amplitudes the surrogate is a convex quadratic in the
//! stacked combiner `v`,
//!
//! ```text
//! phi(v) = A |v^H u - 1|^2 + C sum_k |v^H u_k - 1/K|^2 + B q sigma^2 ||v||^2
//! ```
//!
//! whose unique minimizer solves the Hermitian positive-definite system
//! `(A u u^H + C sum_k u_k u_k^H + B q sigma^2 I) v = A u + (C/K) sum_k u_k`.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::{ChannelRealization, LargeScaleGains};
use crate::error::{Error, Result};
use crate::ota::{BeamformingVector, GapCoefficients, PowerAllocation};

/// Power-weighted channel stacks feeding the combiner design:
/// `u_k` stacks `h[k][l] * p_hat_k` over APs and `u = sum_k u_k`.
#[derive(Debug, Clone)]
pub struct BeamformingInputs {
    pub u: DVector<Complex64>,
    pub u_per_ue: Vec<DVector<Complex64>>,
    pub n_rx: usize,
}

impl BeamformingInputs {
    pub fn n_ues(&self) -> usize {
        self.u_per_ue.len()
    }
}

/// Builds the stacked inputs for the current channels and amplitudes.
pub fn build_inputs(
    channels: &ChannelRealization,
    p: &PowerAllocation,
) -> Result<BeamformingInputs> {
    let (n_ues, n_aps, n_rx) = (channels.n_ues(), channels.n_aps(), channels.n_rx());
    if p.n_ues() != n_ues {
        return Err(Error::Dimension(format!(
            "{} amplitudes for {} UEs",
            p.n_ues(),
            n_ues
        )));
    }
    let dim = n_aps * n_rx;
    let mut u_per_ue = Vec::with_capacity(n_ues);
    for k in 0..n_ues {
        let mut uk = DVector::from_element(dim, Complex64::new(0.0, 0.0));
        for l in 0..n_aps {
            for a in 0..n_rx {
                uk[l * n_rx + a] = channels.h[k][l][a] * p.amplitude(k);
            }
        }
        u_per_ue.push(uk);
    }
    let mut u = DVector::from_element(dim, Complex64::new(0.0, 0.0));
    for uk in &u_per_ue {
        u += uk;
    }
    Ok(BeamformingInputs { u, u_per_ue, n_rx })
}

/// Evaluates `phi` in its quadratic (stacked-channel) form.
pub fn phi_from_inputs(
    inputs: &BeamformingInputs,
    v: &BeamformingVector,
    coeffs: &GapCoefficients,
    sigma2: f64,
    model_dim: usize,
) -> f64 {
    let k = inputs.n_ues() as f64;
    let vh_u = hermitian_dot(v.stacked(), &inputs.u);
    let mut per_user = 0.0;
    for uk in &inputs.u_per_ue {
        per_user += (hermitian_dot(v.stacked(), uk) - Complex64::new(1.0 / k, 0.0)).norm_sqr();
    }
    let gamma = model_dim as f64 * sigma2 * v.norm_squared();
    coeffs.a * (vh_u - Complex64::new(1.0, 0.0)).norm_sqr() + coeffs.c * per_user + coeffs.b * gamma
}

/// `v^H u`.
fn hermitian_dot(v: &DVector<Complex64>, u: &DVector<Complex64>) -> Complex64 {
    v.iter().zip(u.iter()).map(|(vi, ui)| vi.conj() * ui).sum()
}

/// Closed-form gap-minimizing combiner for the current amplitudes.
pub fn mop_beamformer(
    inputs: &BeamformingInputs,
    coeffs: &GapCoefficients,
    sigma2: f64,
    model_dim: usize,
) -> Result<BeamformingVector> {
    let dim = inputs.u.len();
    let k = inputs.n_ues() as f64;
    let reg = coeffs.b * model_dim as f64 * sigma2;
    if !(reg > 0.0) {
        return Err(Error::Singular(format!(
            "combiner system needs B q sigma^2 > 0, got {reg}"
        )));
    }
    let mut system = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    rank_one_update(&mut system, &inputs.u, coeffs.a);
    for uk in &inputs.u_per_ue {
        rank_one_update(&mut system, uk, coeffs.c);
    }
    for i in 0..dim {
        system[(i, i)] += Complex64::new(reg, 0.0);
    }
    let mut rhs = inputs.u.map(|z| z * coeffs.a);
    for uk in &inputs.u_per_ue {
        rhs += uk.map(|z| z * (coeffs.c / k));
    }
    let chol = Cholesky::new(system).ok_or_else(|| {
        Error::Singular("combiner system is not positive definite (B q sigma^2 = 0?)".into())
    })?;
    let v = chol.solve(&rhs);
    BeamformingVector::new(v, inputs.n_rx)
}

/// `system += scale * x x^H`.
fn rank_one_update(system: &mut DMatrix<Complex64>, x: &DVector<Complex64>, scale: f64) {
    let n = x.len();
    for i in 0..n {
        for j in 0..n {
            system[(i, j)] += x[i] * x[j].conj() * scale;
        }
    }
}

/// MRC baseline: per AP the direction is the channel sum weighted by the
/// inverse large-scale gain; the free scalar along that ray is set to the
/// exact 1-D minimizer of `phi`.
pub fn mrc_beamformer(
    channels: &ChannelRealization,
    gains: &LargeScaleGains,
    inputs: &BeamformingInputs,
    coeffs: &GapCoefficients,
    sigma2: f64,
    model_dim: usize,
) -> Result<BeamformingVector> {
    let (n_ues, n_aps, n_rx) = (channels.n_ues(), channels.n_aps(), channels.n_rx());
    if gains.n_ues() != n_ues || gains.n_aps() != n_aps {
        return Err(Error::Dimension("gains do not match channels".into()));
    }
    let dim = n_aps * n_rx;
    let mut direction = DVector::from_element(dim, Complex64::new(0.0, 0.0));
    for l in 0..n_aps {
        for k in 0..n_ues {
            let w = 1.0 / gains.beta(k, l);
            for a in 0..n_rx {
                direction[l * n_rx + a] += channels.h[k][l][a] * w;
            }
        }
    }
    let d_norm_sq: f64 = direction.iter().map(|z| z.norm_sqr()).sum();
    if d_norm_sq == 0.0 {
        eprintln!("warning: MRC direction vanished; falling back to zero combiner");
        return BeamformingVector::new(direction, n_rx);
    }
    let kf = n_ues as f64;
    let x = hermitian_dot(&direction, &inputs.u);
    let mut num = coeffs.a * x.re;
    let mut den = coeffs.a * x.norm_sqr() + coeffs.b * model_dim as f64 * sigma2 * d_norm_sq;
    for uk in &inputs.u_per_ue {
        let xk = hermitian_dot(&direction, uk);
        num += coeffs.c / kf * xk.re;
        den += coeffs.c * xk.norm_sqr();
    }
    let scale = if den > 0.0 { num / den } else { 0.0 };
    BeamformingVector::new(direction.map(|z| z * scale), n_rx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{
        complex_gaussian, large_scale_gains, place_nodes, sample_channel, PathLossParams,
    };
    use crate::ota::{gap_coefficients, phi, GapHyperparams, NoiseModel};
    use crate::rng::{stream_rng, Stream};
    use rand::Rng;

    fn random_instance(
        seed: u64,
        n_ues: usize,
        n_aps: usize,
        n_rx: usize,
    ) -> (ChannelRealization, PowerAllocation) {
        // O(1)-scale synthetic channels keep finite differences well conditioned.
        let mut rng = stream_rng(seed, Stream::Fading, 1000);
        let h = (0..n_ues)
            .map(|_| {
                (0..n_aps)
                    .map(|_| (0..n_rx).map(|_| complex_gaussian(&mut rng)).collect())
                    .collect()
            })
            .collect();
        let ch = ChannelRealization { h, round_index: 0 };
        let p_hat = (0..n_ues).map(|_| rng.gen_range(0.1..0.8)).collect();
        (ch, PowerAllocation::from_amplitudes(p_hat).unwrap())
    }

    #[test]
    fn inputs_sum_identity() {
        let (ch, p) = random_instance(1, 3, 4, 2);
        let inputs = build_inputs(&ch, &p).unwrap();
        let mut sum = DVector::from_element(8, Complex64::new(0.0, 0.0));
        for uk in &inputs.u_per_ue {
            sum += uk;
        }
        assert!((&inputs.u - &sum).norm() < 1e-12 * inputs.u.norm());
    }

    #[test]
    fn inputs_zero_power() {
        let (ch, _) = random_instance(2, 2, 3, 2);
        let p = PowerAllocation::from_amplitudes(vec![0.0, 0.0]).unwrap();
        let inputs = build_inputs(&ch, &p).unwrap();
        assert_eq!(inputs.u.norm(), 0.0);
        for uk in &inputs.u_per_ue {
            assert_eq!(uk.norm(), 0.0);
        }
    }

    #[test]
    fn single_user_inputs_collapse() {
        let (ch, p) = random_instance(3, 1, 3, 2);
        let inputs = build_inputs(&ch, &p).unwrap();
        assert_eq!(inputs.u, inputs.u_per_ue[0]);
    }

    #[test]
    fn scalar_case_matches_hand_reduction() {
        // K = L = N_r = 1: v* = (A + C) u / ((A + C) |u|^2 + B q sigma^2).
        let h = Complex64::new(0.7, -0.4);
        let ch = ChannelRealization {
            h: vec![vec![vec![h]]],
            round_index: 0,
        };
        let p = PowerAllocation::from_amplitudes(vec![0.9]).unwrap();
        let coeffs = gap_coefficients(&GapHyperparams::default(), 1, 5);
        let (sigma2, q) = (0.3, 7);
        let inputs = build_inputs(&ch, &p).unwrap();
        let v = mop_beamformer(&inputs, &coeffs, sigma2, q).unwrap();
        let u = h * 0.9;
        let expect = (coeffs.a + coeffs.c) * u
            / Complex64::new(
                (coeffs.a + coeffs.c) * u.norm_sqr() + coeffs.b * q as f64 * sigma2,
                0.0,
            );
        assert!((v.stacked()[0] - expect).norm() < 1e-12);
    }

    #[test]
    fn mop_is_stationary_under_finite_differences() {
        let coeffs = gap_coefficients(&GapHyperparams::default(), 1, 5);
        let (sigma2, q) = (0.05, 6);
        for seed in 0..20 {
            let (ch, p) = random_instance(seed, 3, 3, 2);
            let inputs = build_inputs(&ch, &p).unwrap();
            let v = mop_beamformer(&inputs, &coeffs, sigma2, q).unwrap();
            let rel = fd_gradient_rel_norm(&inputs, &v, &coeffs, sigma2, q);
            assert!(rel < 1e-6, "seed {seed}: relative gradient {rel}");
        }
    }

    pub(crate) fn fd_gradient_rel_norm(
        inputs: &BeamformingInputs,
        v: &BeamformingVector,
        coeffs: &GapCoefficients,
        sigma2: f64,
        q: usize,
    ) -> f64 {
        let eval = |vec: &DVector<Complex64>| {
            let bv = BeamformingVector::new(vec.clone(), v.n_rx()).unwrap();
            phi_from_inputs(inputs, &bv, coeffs, sigma2, q)
        };
        let h = 1e-6;
        let dim = v.stacked().len();
        let mut grad_sq = 0.0;
        for i in 0..dim {
            for part in 0..2 {
                let delta = if part == 0 {
                    Complex64::new(h, 0.0)
                } else {
                    Complex64::new(0.0, h)
                };
                let mut plus = v.stacked().clone();
                let mut minus = v.stacked().clone();
                plus[i] += delta;
                minus[i] -= delta;
                let g = (eval(&plus) - eval(&minus)) / (2.0 * h);
                grad_sq += g * g;
            }
        }
        // Normalize by the gradient magnitude at the origin.
        let zero = DVector::from_element(dim, Complex64::new(0.0, 0.0));
        let mut ref_sq = 0.0;
        for i in 0..dim {
            for part in 0..2 {
                let delta = if part == 0 {
                    Complex64::new(h, 0.0)
                } else {
                    Complex64::new(0.0, h)
                };
                let mut plus = zero.clone();
                let mut minus = zero.clone();
                plus[i] += delta;
                minus[i] -= delta;
                let g = (eval(&plus) - eval(&minus)) / (2.0 * h);
                ref_sq += g * g;
            }
        }
        (grad_sq / ref_sq.max(1e-300)).sqrt()
    }

    #[test]
    fn mop_beats_random_perturbations() {
        let coeffs = gap_coefficients(&GapHyperparams::default(), 1, 5);
        let (sigma2, q) = (0.05, 6);
        let (ch, p) = random_instance(42, 3, 3, 2);
        let inputs = build_inputs(&ch, &p).unwrap();
        let v = mop_beamformer(&inputs, &coeffs, sigma2, q).unwrap();
        let base = phi_from_inputs(&inputs, &v, &coeffs, sigma2, q);
        let mut rng = stream_rng(77, Stream::Noise, 0);
        for _ in 0..100 {
            let perturbed = DVector::from_fn(v.stacked().len(), |i, _| {
                v.stacked()[i] + complex_gaussian(&mut rng) * 0.05
            });
            let bv = BeamformingVector::new(perturbed, v.n_rx()).unwrap();
            assert!(phi_from_inputs(&inputs, &bv, &coeffs, sigma2, q) >= base - 1e-12);
        }
    }

    #[test]
    fn mop_requires_positive_regularizer() {
        let (ch, p) = random_instance(5, 2, 2, 2);
        let inputs = build_inputs(&ch, &p).unwrap();
        let coeffs = gap_coefficients(&GapHyperparams::default(), 1, 5);
        // sigma2 = 0 makes the system rank-deficient (rank K+1 < dim).
        assert!(mop_beamformer(&inputs, &coeffs, 0.0, 6).is_err());
    }

    #[test]
    fn phi_two_forms_agree() {
        let coeffs = gap_coefficients(&GapHyperparams::default(), 1, 5);
        let (sigma2, q) = (0.2, 5);
        let noise = NoiseModel { sigma2 };
        for seed in 0..1000 {
            let (ch, p) = random_instance(seed, 3, 2, 2);
            let inputs = build_inputs(&ch, &p).unwrap();
            let mut rng = stream_rng(seed, Stream::Noise, 7);
            let v =
                BeamformingVector::new(DVector::from_fn(4, |_, _| complex_gaussian(&mut rng)), 2)
                    .unwrap();
            let via_m = phi(&ch, &v, &p, &coeffs, &noise, q).unwrap();
            let via_u = phi_from_inputs(&inputs, &v, &coeffs, sigma2, q);
            assert!(
                (via_m - via_u).abs() <= 1e-12 * via_m.abs().max(1.0),
                "seed {seed}: {via_m} vs {via_u}"
            );
        }
    }

    #[test]
    fn mrc_single_pair_is_matched_filter() {
        let topo = place_nodes(3, 100.0, 1, 1, 4).unwrap();
        let gains = large_scale_gains(&topo, &PathLossParams::default()).unwrap();
        let ch = sample_channel(&topo, &gains, 3, 0).unwrap();
        let p = PowerAllocation::from_powers(&[0.3]).unwrap();
        let inputs = build_inputs(&ch, &p).unwrap();
        let coeffs = gap_coefficients(&GapHyperparams::default(), 1, 5);
        let v = mrc_beamformer(&ch, &gains, &inputs, &coeffs, 1e-13, 10).unwrap();
        // Direction proportional to the single channel vector.
        let h0 = DVector::from_column_slice(&ch.h[0][0]);
        let cross = hermitian_dot(v.stacked(), &h0).norm();
        assert!((cross - v.stacked().norm() * h0.norm()).abs() < 1e-9 * cross.max(1e-30));
    }

    #[test]
    fn mrc_scaling_is_one_dimensional_optimum() {
        let topo = place_nodes(9, 500.0, 3, 4, 2).unwrap();
        let gains = large_scale_gains(&topo, &PathLossParams::default()).unwrap();
        let ch = sample_channel(&topo, &gains, 9, 2).unwrap();
        let p = PowerAllocation::from_powers(&[0.3; 3]).unwrap();
        let inputs = build_inputs(&ch, &p).unwrap();
        let coeffs = gap_coefficients(&GapHyperparams::default(), 1, 5);
        let (sigma2, q) = (1e-13, 10);
        let v = mrc_beamformer(&ch, &gains, &inputs, &coeffs, sigma2, q).unwrap();
        let base = phi_from_inputs(&inputs, &v, &coeffs, sigma2, q);
        let mut rng = stream_rng(10, Stream::Noise, 3);
        for _ in 0..100 {
            let c: f64 = rng.gen_range(0.5..2.0);
            let scaled = BeamformingVector::new(v.stacked().map(|z| z * c), v.n_rx()).unwrap();
            assert!(
                phi_from_inputs(&inputs, &scaled, &coeffs, sigma2, q) >= base - 1e-12 * base.abs()
            );
        }
    }

    #[test]
    fn mop_dominates_mrc_zero_and_random() {
        let topo = place_nodes(4, 500.0, 3, 6, 4).unwrap();
        let gains = large_scale_gains(&topo, &PathLossParams::default()).unwrap();
        let coeffs = gap_coefficients(&GapHyperparams::default(), 1, 5);
        let (sigma2, q) = (NoiseModel::from_dbm(-101.0).sigma2, 10);
        for round in 0..20 {
            let ch = sample_channel(&topo, &gains, 4, round).unwrap();
            let p = PowerAllocation::from_powers(&[0.3; 3]).unwrap();
            let inputs = build_inputs(&ch, &p).unwrap();
            let mop = mop_beamformer(&inputs, &coeffs, sigma2, q).unwrap();
            let mrc = mrc_beamformer(&ch, &gains, &inputs, &coeffs, sigma2, q).unwrap();
            let phi_mop = phi_from_inputs(&inputs, &mop, &coeffs, sigma2, q);
            let phi_mrc = phi_from_inputs(&inputs, &mrc, &coeffs, sigma2, q);
            let phi_zero =
                phi_from_inputs(&inputs, &BeamformingVector::zeros(6, 4), &coeffs, sigma2, q);
            assert!(phi_mop <= phi_mrc + 1e-15);
            assert!(phi_mop <= phi_zero);
            let mut rng = stream_rng(round, Stream::Noise, 50);
            let scale = mop.stacked().norm();
            let random = BeamformingVector::new(
                DVector::from_fn(24, |_, _| complex_gaussian(&mut rng) * scale),
                4,
            )
            .unwrap();
            assert!(phi_mop <= phi_from_inputs(&inputs, &random, &coeffs, sigma2, q));
        }
    }

    #[test]
    fn mrc_vanished_direction_falls_back_to_zero() {
        let ch = ChannelRealization {
            h: vec![vec![vec![Complex64::new(0.0, 0.0); 2]; 2]],
            round_index: 0,
        };
        let topo = place_nodes(1, 100.0, 1, 2, 2).unwrap();
        let gains = large_scale_gains(&topo, &PathLossParams::default()).unwrap();
        let p = PowerAllocation::from_powers(&[0.3]).unwrap();
        let inputs = build_inputs(&ch, &p).unwrap();
        let coeffs = gap_coefficients(&GapHyperparams::default(), 1, 5);
        let v = mrc_beamformer(&ch, &gains, &inputs, &coeffs, 0.1, 4).unwrap();
        assert_eq!(v.norm_squared(), 0.0);
    }

    #[test]
    fn stronger_noise_shrinks_the_combiner() {
        let (ch, p) = random_instance(31, 3, 3, 2);
        let inputs = build_inputs(&ch, &p).unwrap();
        let coeffs = gap_coefficients(&GapHyperparams::default(), 1, 5);
        let mut last = f64::INFINITY;
        for sigma2 in [1e-4, 1e-2, 1.0, 100.0] {
            let v = mop_beamformer(&inputs, &coeffs, sigma2, 6).unwrap();
            let norm = v.stacked().norm();
            assert!(norm < last, "norm should shrink as sigma^2 grows");
            last = norm;
        }
    }
}
