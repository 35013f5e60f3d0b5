//! Over-the-air uplink aggregation.
//!
//! All UEs transmit their model vectors simultaneously; each AP combines its
//! received signal with a beamformer `r_l` and the CPU sums the per-AP
//! outputs. The misalignment of user `k` at AP `l` is
//!
//! ```text
//! m[k][l] = r_l^H h[k][l] p_hat_k - 1/(L K)
//! ```
//!
//! and the received aggregate is `z = sum_k H_k p_hat_k w_k + noise`, where
//! `H_k = sum_l r_l^H h[k][l]` is the effective scalar channel of user `k`.
//! The per-round surrogate `phi` weights the squared bias term, the per-user
//! misalignment term and the noise penalty `gamma = q sigma^2 ||v||^2`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand_chacha::ChaCha20Rng;

use crate::channel::{complex_gaussian, ChannelRealization};
use crate::error::{Error, Result};

/// Stacked receive combiners across APs, `v = [r_1; ...; r_L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingVector {
    v: DVector<Complex64>,
    n_rx: usize,
}

impl BeamformingVector {
    pub fn new(v: DVector<Complex64>, n_rx: usize) -> Result<Self> {
        if n_rx == 0 || !v.len().is_multiple_of(n_rx) {
            return Err(Error::Dimension(format!(
                "combiner length {} is not a multiple of n_rx {n_rx}",
                v.len()
            )));
        }
        Ok(Self { v, n_rx })
    }

    pub fn zeros(n_aps: usize, n_rx: usize) -> Self {
        Self {
            v: DVector::zeros(n_aps * n_rx),
            n_rx,
        }
    }

    pub fn stacked(&self) -> &DVector<Complex64> {
        &self.v
    }

    pub fn n_aps(&self) -> usize {
        self.v.len() / self.n_rx
    }

    pub fn n_rx(&self) -> usize {
        self.n_rx
    }

    /// Per-AP combiner `r_l` as a view into the stack.
    pub fn ap(&self, l: usize) -> nalgebra::DVectorView<'_, Complex64> {
        self.v.rows(l * self.n_rx, self.n_rx)
    }

    pub fn norm_squared(&self) -> f64 {
        self.v.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Per-UE transmit powers; the amplitude `p_hat_k = sqrt(p_k)` is primary
/// so that `p_hat^2 == p` holds exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    p_hat: Vec<f64>,
}

impl PowerAllocation {
    pub fn from_amplitudes(p_hat: Vec<f64>) -> Result<Self> {
        if p_hat.iter().any(|&a| !(a >= 0.0) || !a.is_finite()) {
            return Err(Error::Config(
                "amplitudes must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { p_hat })
    }

    pub fn from_powers(p: &[f64]) -> Result<Self> {
        if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::Config(
                "powers must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            p_hat: p.iter().map(|x| x.sqrt()).collect(),
        })
    }

    pub fn n_ues(&self) -> usize {
        self.p_hat.len()
    }

    pub fn amplitude(&self, k: usize) -> f64 {
        self.p_hat[k]
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.p_hat
    }

    pub fn power(&self, k: usize) -> f64 {
        self.p_hat[k] * self.p_hat[k]
    }

    pub fn powers(&self) -> Vec<f64> {
        self.p_hat.iter().map(|a| a * a).collect()
    }

    pub fn within_budget(&self, budget: &PowerBudget) -> bool {
        self.p_hat
            .iter()
            .zip(&budget.p_max)
            .all(|(&a, &pmax)| a * a <= pmax * (1.0 + 1e-12))
    }
}

/// Per-UE instantaneous and long-term power budgets (post-transform, i.e.
/// the `P` values the optimizer sees). `from_raw` applies `P = q P_raw / G^2`
/// to budgets stated for the normalized-model constraint form.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerBudget {
    pub p_max: Vec<f64>,
    pub p_ave: Vec<f64>,
}

impl PowerBudget {
    pub fn new(p_ave: Vec<f64>, p_max: Vec<f64>) -> Result<Self> {
        if p_ave.len() != p_max.len() {
            return Err(Error::Dimension("budget vectors differ in length".into()));
        }
        for (&a, &m) in p_ave.iter().zip(&p_max) {
            if !(a > 0.0) || !(a <= m) {
                return Err(Error::Config(format!(
                    "need 0 < p_ave <= p_max, got p_ave {a}, p_max {m}"
                )));
            }
        }
        Ok(Self { p_max, p_ave })
    }

    pub fn uniform(p_ave: f64, p_max: f64, n_ues: usize) -> Result<Self> {
        Self::new(vec![p_ave; n_ues], vec![p_max; n_ues])
    }

    pub fn from_raw(
        raw_ave: f64,
        raw_max: f64,
        n_ues: usize,
        model_dim: usize,
        g: f64,
    ) -> Result<Self> {
        let scale = model_dim as f64 / (g * g);
        Self::uniform(raw_ave * scale, raw_max * scale, n_ues)
    }

    pub fn n_ues(&self) -> usize {
        self.p_ave.len()
    }
}

/// Receiver noise power per antenna (complex, watts).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub sigma2: f64,
}

impl NoiseModel {
    pub fn from_dbm(dbm: f64) -> Self {
        Self {
            sigma2: 10f64.powf((dbm - 30.0) / 10.0),
        }
    }

    pub fn noiseless() -> Self {
        Self { sigma2: 0.0 }
    }
}

/// Generators of the round-indexed gap weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapHyperparams {
    /// Model-norm bound G (sqrt of the second-moment bound).
    pub g: f64,
    /// Gradient-fluctuation amplitude S.
    pub s: f64,
    /// Gradient-descent convergence-rate constant mu.
    pub mu: f64,
    /// Local epochs Omega.
    pub omega: usize,
    /// Learning rate (fixed across rounds).
    pub eta: f64,
    /// Gradient variance bound N; carried for gap reporting only.
    pub grad_variance: f64,
    /// Gradient bound W; carried for gap reporting only.
    pub grad_bound: f64,
}

impl Default for GapHyperparams {
    fn default() -> Self {
        Self {
            g: 1.0,
            s: 1.0,
            mu: 0.0,
            omega: 1,
            eta: 0.05,
            grad_variance: 0.0,
            grad_bound: 0.0,
        }
    }
}

/// Round-`t` weights of the optimality-gap surrogate plus their generators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub m_t: f64,
    pub j_t: f64,
    pub hyper: GapHyperparams,
}

/// Computes `A_t`, `B_t`, `C_t` for round `t` of a `T`-round run (1-based):
/// `M_i = 1 - (Omega-1) mu eta`, `J_t = prod_{i=t..T} M_i / M_t`,
/// `A_t = J_t G^2 / (2 eta)`, `B_t = S^2 eta Omega + S`, `C_t = B_t G^2`.
pub fn gap_coefficients(hyper: &GapHyperparams, t: usize, rounds: usize) -> GapCoefficients {
    assert!(t >= 1 && t <= rounds, "round {t} outside 1..={rounds}");
    let m = 1.0 - (hyper.omega as f64 - 1.0) * hyper.mu * hyper.eta;
    // Fixed learning rate, so the tail product collapses to a power.
    let j_t = m.powi((rounds - t) as i32);
    let a = j_t * hyper.g * hyper.g / (2.0 * hyper.eta);
    let b = hyper.s * hyper.s * hyper.eta * hyper.omega as f64 + hyper.s;
    let c = b * hyper.g * hyper.g;
    GapCoefficients {
        a,
        b,
        c,
        m_t: m,
        j_t,
        hyper: *hyper,
    }
}

impl GapCoefficients {
    /// Overrides the weights with raw constants, keeping the generators.
    pub fn with_raw(mut self, a: f64, b: f64, c: f64) -> Self {
        self.a = a;
        self.b = b;
        self.c = c;
        self
    }
}

/// CPU-side view of one OTA aggregation.
#[derive(Debug, Clone)]
pub struct AggregationOutcome {
    /// Complex aggregate received at the CPU.
    pub z: DVector<Complex64>,
    /// Ideal (error-free) aggregate.
    pub w_bar: DVector<f64>,
    /// Realized error `z - w_bar`.
    pub epsilon: DVector<Complex64>,
    /// K x L misalignment residuals.
    pub residuals: DMatrix<Complex64>,
    /// Effective scalar channels `H_k`.
    pub effective_channel: Vec<Complex64>,
    /// Noise penalty `gamma = q sigma^2 ||v||^2`.
    pub gamma: f64,
}

impl AggregationOutcome {
    /// What the CPU adopts as the next global model.
    pub fn received_model(&self) -> DVector<f64> {
        self.z.map(|c| c.re)
    }

    pub fn error_norm_squared(&self) -> f64 {
        self.epsilon.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Misalignment residuals `m[k][l]` and effective channels `H_k`.
pub fn residuals(
    channels: &ChannelRealization,
    v: &BeamformingVector,
    p: &PowerAllocation,
) -> Result<(DMatrix<Complex64>, Vec<Complex64>)> {
    let (n_ues, n_aps, n_rx) = (channels.n_ues(), channels.n_aps(), channels.n_rx());
    if v.n_aps() != n_aps || v.n_rx() != n_rx || p.n_ues() != n_ues {
        return Err(Error::Dimension(format!(
            "combiner {}x{} / powers {} vs channels {}x{}x{}",
            v.n_aps(),
            v.n_rx(),
            p.n_ues(),
            n_ues,
            n_aps,
            n_rx
        )));
    }
    let target = 1.0 / (n_aps * n_ues) as f64;
    let mut m = DMatrix::zeros(n_ues, n_aps);
    let mut h_eff = vec![Complex64::new(0.0, 0.0); n_ues];
    for k in 0..n_ues {
        for l in 0..n_aps {
            let r = v.ap(l);
            let gain: Complex64 = r
                .iter()
                .zip(&channels.h[k][l])
                .map(|(ri, hi)| ri.conj() * hi)
                .sum();
            h_eff[k] += gain;
            m[(k, l)] = gain * p.amplitude(k) - target;
        }
    }
    Ok((m, h_eff))
}

/// Effective scalar channels `H_k = sum_l r_l^H h[k][l]` (power-independent).
pub fn effective_channel(
    channels: &ChannelRealization,
    v: &BeamformingVector,
) -> Result<Vec<Complex64>> {
    if v.n_aps() != channels.n_aps() || v.n_rx() != channels.n_rx() {
        return Err(Error::Dimension("combiner does not match channels".into()));
    }
    let mut h_eff = vec![Complex64::new(0.0, 0.0); channels.n_ues()];
    for (k, h_k) in h_eff.iter_mut().enumerate() {
        for l in 0..channels.n_aps() {
            let r = v.ap(l);
            *h_k += r
                .iter()
                .zip(&channels.h[k][l])
                .map(|(ri, hi)| ri.conj() * hi)
                .sum::<Complex64>();
        }
    }
    Ok(h_eff)
}

/// Runs one OTA aggregation of the UE models through the channel.
pub fn aggregate(
    models: &[DVector<f64>],
    channels: &ChannelRealization,
    v: &BeamformingVector,
    p: &PowerAllocation,
    noise: &NoiseModel,
    rng: &mut ChaCha20Rng,
) -> Result<AggregationOutcome> {
    let n_ues = channels.n_ues();
    if models.len() != n_ues {
        return Err(Error::Dimension(format!(
            "{} models for {} UEs",
            models.len(),
            n_ues
        )));
    }
    let dim = models
        .first()
        .ok_or_else(|| Error::Dimension("no models".into()))?
        .len();
    if models.iter().any(|w| w.len() != dim) {
        return Err(Error::Dimension("model dimensions differ".into()));
    }
    let (m, h_eff) = residuals(channels, v, p)?;

    let mut w_bar = DVector::<f64>::zeros(dim);
    for w in models {
        w_bar += w;
    }
    w_bar /= n_ues as f64;

    // Signal part: sum_k H_k p_hat_k w_k.
    let mut z = DVector::from_element(dim, Complex64::new(0.0, 0.0));
    for (k, w) in models.iter().enumerate() {
        let gain = h_eff[k] * p.amplitude(k);
        for j in 0..dim {
            z[j] += gain * w[j];
        }
    }
    // Noise part: per AP an N_r x q white block combined by r_l.
    let amp = (noise.sigma2).sqrt();
    for l in 0..channels.n_aps() {
        let r = v.ap(l);
        for j in 0..dim {
            let combined: Complex64 = r
                .iter()
                .map(|ri| ri.conj() * (complex_gaussian(rng) * amp))
                .sum();
            z[j] += combined;
        }
    }

    let epsilon = DVector::from_fn(dim, |j, _| z[j] - Complex64::new(w_bar[j], 0.0));
    let gamma = dim as f64 * noise.sigma2 * v.norm_squared();
    Ok(AggregationOutcome {
        z,
        w_bar,
        epsilon,
        residuals: m,
        effective_channel: h_eff,
        gamma,
    })
}

/// First- and second-moment error bounds for given residuals:
/// `bias <= G^2 |sum_{k,l} m|^2`, `mse <= G^2 sum_k |sum_l m[k][l]|^2 + gamma`.
pub fn error_bounds(m: &DMatrix<Complex64>, gamma: f64, g: f64) -> (f64, f64) {
    let total: Complex64 = m.iter().sum();
    let bias_bound = g * g * total.norm_sqr();
    let per_user: f64 = (0..m.nrows())
        .map(|k| m.row(k).iter().sum::<Complex64>().norm_sqr())
        .sum();
    let mse_bound = g * g * per_user + gamma;
    (bias_bound, mse_bound)
}

/// Per-round surrogate `phi = A |sum m|^2 + C sum_k |sum_l m[k][l]|^2 + B gamma`
/// evaluated from the residual form, with `gamma = q sigma^2 ||v||^2`.
pub fn phi(
    channels: &ChannelRealization,
    v: &BeamformingVector,
    p: &PowerAllocation,
    coeffs: &GapCoefficients,
    noise: &NoiseModel,
    model_dim: usize,
) -> Result<f64> {
    let (m, _) = residuals(channels, v, p)?;
    let gamma = model_dim as f64 * noise.sigma2 * v.norm_squared();
    Ok(phi_from_residuals(&m, gamma, coeffs))
}

pub(crate) fn phi_from_residuals(
    m: &DMatrix<Complex64>,
    gamma: f64,
    coeffs: &GapCoefficients,
) -> f64 {
    let total: Complex64 = m.iter().sum();
    let per_user: f64 = (0..m.nrows())
        .map(|k| m.row(k).iter().sum::<Complex64>().norm_sqr())
        .sum();
    coeffs.a * total.norm_sqr() + coeffs.c * per_user + coeffs.b * gamma
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{large_scale_gains, place_nodes, sample_channel, PathLossParams};
    use crate::rng::{stream_rng, Stream};
    use nalgebra::DVector;

    fn tiny_channels() -> ChannelRealization {
        // 1 UE, 1 AP, 1 antenna, unit channel.
        ChannelRealization {
            h: vec![vec![vec![Complex64::new(1.0, 0.0)]]],
            round_index: 0,
        }
    }

    #[test]
    fn residual_zero_combiner() {
        let topo = place_nodes(7, 500.0, 3, 6, 4).unwrap();
        let gains = large_scale_gains(&topo, &PathLossParams::default()).unwrap();
        let ch = sample_channel(&topo, &gains, 7, 1).unwrap();
        let v = BeamformingVector::zeros(6, 4);
        let p = PowerAllocation::from_powers(&[0.3, 0.3, 0.3]).unwrap();
        let (m, h) = residuals(&ch, &v, &p).unwrap();
        for e in m.iter() {
            assert!((e + Complex64::new(1.0 / 18.0, 0.0)).norm() < 1e-15);
        }
        for hk in h {
            assert_eq!(hk, Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn residual_scalar_identity() {
        let ch = tiny_channels();
        let v =
            BeamformingVector::new(DVector::from_element(1, Complex64::new(1.0, 0.0)), 1).unwrap();
        let p = PowerAllocation::from_amplitudes(vec![1.0]).unwrap();
        let (m, h) = residuals(&ch, &v, &p).unwrap();
        assert!(m[(0, 0)].norm() < 1e-15);
        assert!((h[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn perfect_alignment_gives_exact_aggregate() {
        let ch = tiny_channels();
        let v =
            BeamformingVector::new(DVector::from_element(1, Complex64::new(1.0, 0.0)), 1).unwrap();
        let p = PowerAllocation::from_amplitudes(vec![1.0]).unwrap();
        let w = DVector::from_column_slice(&[0.4, -1.2, 3.3]);
        let mut rng = stream_rng(0, Stream::Noise, 0);
        let out = aggregate(
            std::slice::from_ref(&w),
            &ch,
            &v,
            &p,
            &NoiseModel::noiseless(),
            &mut rng,
        )
        .unwrap();
        assert!(out.error_norm_squared() < 1e-24);
        assert_eq!(out.received_model(), w);
    }

    #[test]
    fn single_user_error_scales_with_residual_sum() {
        // K = 1, sigma = 0: epsilon = (sum_l m[0][l]) * w.
        let topo = place_nodes(3, 500.0, 1, 4, 2).unwrap();
        let gains = large_scale_gains(&topo, &PathLossParams::default()).unwrap();
        let ch = sample_channel(&topo, &gains, 3, 5).unwrap();
        let mut rng_v = stream_rng(1, Stream::Noise, 9);
        let v = BeamformingVector::new(
            DVector::from_fn(8, |_, _| complex_gaussian(&mut rng_v) * 1e5),
            2,
        )
        .unwrap();
        let p = PowerAllocation::from_powers(&[0.4]).unwrap();
        let w = DVector::from_column_slice(&[1.0, -2.0]);
        let mut rng = stream_rng(0, Stream::Noise, 0);
        let out = aggregate(
            std::slice::from_ref(&w),
            &ch,
            &v,
            &p,
            &NoiseModel::noiseless(),
            &mut rng,
        )
        .unwrap();
        let delta: Complex64 = out.residuals.row(0).iter().sum();
        for j in 0..2 {
            assert!((out.epsilon[j] - delta * w[j]).norm() < 1e-12 * w[j].abs().max(1.0));
        }
    }

    #[test]
    fn pure_noise_error_matches_gamma() {
        // w = 0: E||eps||^2 == gamma, checked over 10^4 draws.
        let topo = place_nodes(11, 500.0, 2, 3, 2).unwrap();
        let gains = large_scale_gains(&topo, &PathLossParams::default()).unwrap();
        let ch = sample_channel(&topo, &gains, 11, 0).unwrap();
        let mut rng_v = stream_rng(2, Stream::Noise, 1);
        let v = BeamformingVector::new(DVector::from_fn(6, |_, _| complex_gaussian(&mut rng_v)), 2)
            .unwrap();
        let p = PowerAllocation::from_powers(&[0.3, 0.3]).unwrap();
        let noise = NoiseModel { sigma2: 0.5 };
        let models = vec![DVector::zeros(4), DVector::zeros(4)];
        let n = 10_000;
        let mut rng = stream_rng(4, Stream::Noise, 0);
        let mut samples = Vec::with_capacity(n);
        let mut gamma = 0.0;
        for _ in 0..n {
            let out = aggregate(&models, &ch, &v, &p, &noise, &mut rng).unwrap();
            gamma = out.gamma;
            samples.push(out.error_norm_squared());
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!(
            (mean - gamma).abs() < 3.0 * se,
            "mean {mean} gamma {gamma} se {se}"
        );
    }

    #[test]
    fn mean_error_matches_residual_sum_for_equal_models() {
        // With every UE transmitting the same w, E[eps] = (sum_{k,l} m) * w.
        let topo = place_nodes(21, 500.0, 3, 2, 2).unwrap();
        let gains = large_scale_gains(&topo, &PathLossParams::default()).unwrap();
        let ch = sample_channel(&topo, &gains, 21, 4).unwrap();
        let mut rng_v = stream_rng(6, Stream::Noise, 2);
        let v = BeamformingVector::new(
            DVector::from_fn(4, |_, _| complex_gaussian(&mut rng_v) * 1e5),
            2,
        )
        .unwrap();
        let p = PowerAllocation::from_powers(&[0.3; 3]).unwrap();
        let noise = NoiseModel { sigma2: 0.3 };
        let w = DVector::from_column_slice(&[1.5, -0.7, 0.2]);
        let models = vec![w.clone(); 3];
        let n = 20_000;
        let mut rng = stream_rng(9, Stream::Noise, 3);
        let mut mean = DVector::from_element(3, Complex64::new(0.0, 0.0));
        let mut m_total = Complex64::new(0.0, 0.0);
        let mut gamma = 0.0;
        for _ in 0..n {
            let out = aggregate(&models, &ch, &v, &p, &noise, &mut rng).unwrap();
            mean += &out.epsilon;
            m_total = out.residuals.iter().sum();
            gamma = out.gamma;
        }
        mean /= Complex64::new(n as f64, 0.0);
        // Per-entry MC standard error of the complex noise.
        let se = (gamma / 3.0 / n as f64).sqrt();
        for j in 0..3 {
            let expect = m_total * w[j];
            assert!(
                (mean[j] - expect).norm() < 4.0 * se,
                "entry {j}: {} vs {} (se {se})",
                mean[j],
                expect
            );
        }
    }

    #[test]
    fn aggregate_rejects_mismatched_models() {
        let ch = tiny_channels();
        let v =
            BeamformingVector::new(DVector::from_element(1, Complex64::new(1.0, 0.0)), 1).unwrap();
        let p = PowerAllocation::from_amplitudes(vec![1.0]).unwrap();
        let mut rng = stream_rng(0, Stream::Noise, 0);
        // Wrong model count.
        let err = aggregate(
            &[DVector::zeros(2), DVector::zeros(2)],
            &ch,
            &v,
            &p,
            &NoiseModel::noiseless(),
            &mut rng,
        );
        assert!(err.is_err());
        // Inconsistent model dimensions.
        let err = aggregate(&[], &ch, &v, &p, &NoiseModel::noiseless(), &mut rng);
        assert!(err.is_err());
    }

    #[test]
    fn bounds_for_zero_residuals() {
        let m = DMatrix::from_element(3, 6, Complex64::new(0.0, 0.0));
        let (bias, mse) = error_bounds(&m, 0.7, 2.0);
        assert_eq!(bias, 0.0);
        assert_eq!(mse, 0.7);
    }

    #[test]
    fn mse_bound_dominates_gamma() {
        let mut rng = stream_rng(8, Stream::Noise, 2);
        for _ in 0..50 {
            let m = DMatrix::from_fn(3, 4, |_, _| complex_gaussian(&mut rng));
            let (_, mse) = error_bounds(&m, 0.25, 1.5);
            assert!(mse >= 0.25);
        }
    }

    #[test]
    fn phi_vanishes_under_perfect_alignment() {
        // Scalar case with r h p_hat = 1/(LK) = 1 and no noise.
        let ch = tiny_channels();
        let v =
            BeamformingVector::new(DVector::from_element(1, Complex64::new(1.0, 0.0)), 1).unwrap();
        let p = PowerAllocation::from_amplitudes(vec![1.0]).unwrap();
        let coeffs = gap_coefficients(&GapHyperparams::default(), 1, 10);
        let got = phi(&ch, &v, &p, &coeffs, &NoiseModel::noiseless(), 3).unwrap();
        assert!(got < 1e-28, "phi = {got}");
    }

    #[test]
    fn phi_zero_combiner_value() {
        // v = 0 makes every m = -1/(LK): phi = A + C/K + 0.
        let topo = place_nodes(5, 500.0, 3, 2, 2).unwrap();
        let gains = large_scale_gains(&topo, &PathLossParams::default()).unwrap();
        let ch = sample_channel(&topo, &gains, 5, 0).unwrap();
        let v = BeamformingVector::zeros(2, 2);
        let p = PowerAllocation::from_powers(&[0.3; 3]).unwrap();
        let coeffs = gap_coefficients(&GapHyperparams::default(), 1, 10);
        let noise = NoiseModel { sigma2: 0.1 };
        let got = phi(&ch, &v, &p, &coeffs, &noise, 4).unwrap();
        let expect = coeffs.a + coeffs.c / 3.0;
        assert!((got - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn gap_coefficients_flat_for_single_epoch() {
        let hyper = GapHyperparams::default();
        for t in [1, 5, 10] {
            let c = gap_coefficients(&hyper, t, 10);
            assert_eq!(c.m_t, 1.0);
            assert_eq!(c.j_t, 1.0);
            assert!((c.a - 10.0).abs() < 1e-12);
            assert!((c.b - 1.05).abs() < 1e-12);
            assert!((c.c - 1.05).abs() < 1e-12);
        }
    }

    #[test]
    fn gap_coefficient_a_scales_with_g_squared() {
        let mut hyper = GapHyperparams::default();
        let base = gap_coefficients(&hyper, 1, 5);
        hyper.g = 3.0;
        let scaled = gap_coefficients(&hyper, 1, 5);
        assert!((scaled.a - 9.0 * base.a).abs() < 1e-9);
        assert!((scaled.c - 9.0 * base.c).abs() < 1e-9);
        assert_eq!(scaled.b, base.b);
    }

    #[test]
    fn gap_coefficients_multi_epoch_tail_product() {
        let hyper = GapHyperparams {
            omega: 3,
            mu: 0.5,
            ..GapHyperparams::default()
        };
        // M = 1 - 2 * 0.5 * 0.05 = 0.95; J_t = M^(T-t).
        let c = gap_coefficients(&hyper, 2, 4);
        assert!((c.m_t - 0.95).abs() < 1e-12);
        assert!((c.j_t - 0.95f64.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn budget_validation() {
        assert!(PowerBudget::uniform(0.3, 0.5, 3).is_ok());
        assert!(PowerBudget::uniform(0.6, 0.5, 3).is_err());
        assert!(PowerBudget::uniform(0.0, 0.5, 3).is_err());
        let b = PowerBudget::from_raw(0.3, 0.5, 2, 10, 2.0).unwrap();
        assert!((b.p_ave[0] - 0.3 * 10.0 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn power_allocation_square_identity() {
        let p = PowerAllocation::from_amplitudes(vec![0.1, 0.5477]).unwrap();
        for k in 0..2 {
            assert_eq!(p.power(k), p.amplitude(k) * p.amplitude(k));
        }
        assert!(PowerAllocation::from_powers(&[-0.1]).is_err());
        let budget = PowerBudget::uniform(0.3, 0.5, 2).unwrap();
        assert!(p.within_budget(&budget));
        let over = PowerAllocation::from_powers(&[0.6, 0.1]).unwrap();
        assert!(!over.within_budget(&budget));
    }

    #[test]
    fn noise_model_dbm_conversion() {
        let n = NoiseModel::from_dbm(-101.0);
        assert!((n.sigma2 - 10f64.powf(-13.1)).abs() < 1e-20);
        assert!(n.sigma2 > 0.0);
    }
}
