//! Transmit-power control: the Lyapunov online controller and the Fixed,
//! channel-inversion and offline-Lagrangian baselines.
//!
//! The online controller keeps one virtual queue per UE,
//! `q[t] = max(q[t-1] + p - P_ave, 0)`, and each round minimizes the
//! drift-plus-penalty objective `xi + V phi` amplitude by amplitude. The
//! per-user stationarity condition is a depressed cubic
//! `p_hat^3 + a p_hat + b = 0` solved in closed form (Cardano radicals for
//! a nonnegative discriminant, the trigonometric three-root form otherwise);
//! the returned amplitude is the candidate minimizing the per-user objective
//! over the clamped roots and the box endpoints.

use num_complex::Complex64;

use crate::ota::{GapCoefficients, PowerAllocation, PowerBudget};

/// Per-UE accumulated energy debt in watt-rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualQueueState {
    pub q: Vec<f64>,
    pub round: u64,
}

impl VirtualQueueState {
    pub fn new(n_ues: usize) -> Self {
        Self {
            q: vec![0.0; n_ues],
            round: 0,
        }
    }
}

/// Lyapunov controller knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovConfig {
    /// Penalty factor V trading constraint adherence against phi.
    pub v: f64,
    /// Gauss-Seidel sweep cap per round.
    pub max_sweeps: usize,
    /// Convergence tolerance on amplitude change per sweep.
    pub tol: f64,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        Self {
            v: 10.0,
            max_sweeps: 100,
            tol: 1e-8,
        }
    }
}

/// Queue recursion `q' = max(q + p - P_ave, 0)` applied to every UE.
pub fn update_queue(
    state: &VirtualQueueState,
    p: &PowerAllocation,
    budget: &PowerBudget,
) -> VirtualQueueState {
    let q = state
        .q
        .iter()
        .zip(p.powers())
        .zip(&budget.p_ave)
        .map(|((&q, pk), &ave)| (q + pk - ave).max(0.0))
        .collect();
    VirtualQueueState {
        q,
        round: state.round + 1,
    }
}

/// Realized one-round Lyapunov drift `(q'^2 - q^2) / 2`.
pub fn lyapunov_drift(q_prev: f64, q_next: f64) -> f64 {
    0.5 * (q_next * q_next - q_prev * q_prev)
}

/// Upper bound on the drift from the queue recursion:
/// `(p - P_ave)^2 / 2 + q (p - P_ave)`.
pub fn drift_bound(q_prev: f64, p: f64, p_ave: f64) -> f64 {
    let x = p - p_ave;
    0.5 * x * x + q_prev * x
}

/// Depressed-cubic stationarity data for one UE's amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicCoefficients {
    pub a: f64,
    pub b: f64,
    /// `(b/2)^2 + (a/3)^3`.
    pub discriminant: f64,
    /// `(r, theta)` of the trigonometric case; present iff discriminant < 0.
    pub trig: Option<(f64, f64)>,
}

impl CubicCoefficients {
    pub fn new(a: f64, b: f64) -> Self {
        let discriminant = (b / 2.0) * (b / 2.0) + (a / 3.0).powi(3);
        let trig = if discriminant < 0.0 {
            let r = 2.0 * (-a / 3.0).sqrt();
            // cos(3 phi) = (-b/2) / (-a/3)^(3/2); clamp against roundoff.
            let cos3 = ((-b / 2.0) / (-a / 3.0).powf(1.5)).clamp(-1.0, 1.0);
            Some((r, cos3.acos()))
        } else {
            None
        };
        Self {
            a,
            b,
            discriminant,
            trig,
        }
    }

    /// All real roots of `x^3 + a x + b = 0`: one from the Cardano radicals
    /// for a positive discriminant, three from the trigonometric form for a
    /// negative one, and the simple/double pair on the boundary.
    pub fn real_roots(&self) -> Vec<f64> {
        if let Some((r, theta)) = self.trig {
            return (0..3)
                .map(|n| r * ((theta + 2.0 * std::f64::consts::PI * n as f64) / 3.0).cos())
                .collect();
        }
        if self.discriminant == 0.0 {
            if self.a == 0.0 {
                return vec![0.0]; // triple root
            }
            return vec![
                3.0 * self.b / self.a,
                -1.5 * self.b / self.a,
                -1.5 * self.b / self.a,
            ];
        }
        let s = -self.b / 2.0;
        let sqrt_d = self.discriminant.sqrt();
        // Pair the cube roots so the smaller term is computed from the
        // product identity t1 t2 = -(a/3)^3, avoiding cancellation when
        // |b/2| dominates sqrt(D).
        let t1 = if s >= 0.0 { s + sqrt_d } else { s - sqrt_d };
        let t2 = if t1 == 0.0 {
            0.0
        } else {
            -(self.a / 3.0).powi(3) / t1
        };
        vec![t1.cbrt() + t2.cbrt()]
    }

    /// Antiderivative of `2 (x^3 + a x + b)`: the per-user objective up to a
    /// constant, used to rank candidate amplitudes.
    fn objective_shape(&self, x: f64) -> f64 {
        0.5 * x.powi(4) + self.a * x * x + 2.0 * self.b * x
    }
}

/// Stationarity coefficients for UE `k` given the other users' amplitudes:
/// `a = q_k - P_ave_k + V (A + C) |H_k|^2`,
/// `b = V (A Re(H_k sum_{i!=k} p_hat_i conj(H_i)) - (C/K + A) Re(H_k))`.
pub fn cubic_coefficients(
    k: usize,
    p_hat: &[f64],
    h_eff: &[Complex64],
    coeffs: &GapCoefficients,
    cfg: &LyapunovConfig,
    queue: &VirtualQueueState,
    budget: &PowerBudget,
) -> CubicCoefficients {
    let n_ues = h_eff.len();
    let h_k = h_eff[k];
    let cross: Complex64 = (0..n_ues)
        .filter(|&i| i != k)
        .map(|i| h_eff[i].conj() * p_hat[i])
        .sum();
    let a = queue.q[k] - budget.p_ave[k] + cfg.v * (coeffs.a + coeffs.c) * h_k.norm_sqr();
    let b = cfg.v * (coeffs.a * (h_k * cross).re - (coeffs.c / n_ues as f64 + coeffs.a) * h_k.re);
    CubicCoefficients::new(a, b)
}

/// Picks the amplitude in `[0, sqrt(p_max)]` minimizing the per-user
/// objective among the clamped real roots and the box endpoints.
pub fn solve_power_cubic(c: &CubicCoefficients, p_max: f64) -> f64 {
    let hi = p_max.sqrt();
    let mut best = 0.0;
    let mut best_val = c.objective_shape(0.0);
    let mut consider = |x: f64| {
        let x = x.clamp(0.0, hi);
        let val = c.objective_shape(x);
        if val < best_val {
            best_val = val;
            best = x;
        }
    };
    for root in c.real_roots() {
        consider(root);
    }
    consider(hi);
    best
}

/// One round of the Lyapunov controller: Gauss-Seidel sweeps of closed-form
/// per-user updates until the amplitudes settle.
pub fn lofpc_round(
    h_eff: &[Complex64],
    queue: &VirtualQueueState,
    coeffs: &GapCoefficients,
    cfg: &LyapunovConfig,
    budget: &PowerBudget,
    p_init: &PowerAllocation,
) -> PowerAllocation {
    let mut p_hat = p_init.amplitudes().to_vec();
    for _ in 0..cfg.max_sweeps {
        let mut max_change = 0.0f64;
        for k in 0..h_eff.len() {
            let c = cubic_coefficients(k, &p_hat, h_eff, coeffs, cfg, queue, budget);
            let next = solve_power_cubic(&c, budget.p_max[k]);
            max_change = max_change.max((next - p_hat[k]).abs());
            p_hat[k] = next;
        }
        if max_change < cfg.tol {
            break;
        }
    }
    PowerAllocation::from_amplitudes(p_hat).expect("amplitudes stay in the box")
}

/// Queue term `xi = sum_k [ (p_k - P_ave)^2 / 2 + q_k (p_k - P_ave) ]`.
pub fn queue_penalty(p_hat: &[f64], queue: &VirtualQueueState, budget: &PowerBudget) -> f64 {
    p_hat
        .iter()
        .zip(&queue.q)
        .zip(&budget.p_ave)
        .map(|((&amp, &q), &ave)| {
            let over = amp * amp - ave;
            0.5 * over * over + q * over
        })
        .sum()
}

/// Drift-plus-penalty objective `xi + V * phi`, omitting the noise penalty
/// (constant in the amplitudes). Used by tests and sweep-descent checks.
pub fn drift_penalty_objective(
    p_hat: &[f64],
    h_eff: &[Complex64],
    queue: &VirtualQueueState,
    coeffs: &GapCoefficients,
    cfg: &LyapunovConfig,
    budget: &PowerBudget,
) -> f64 {
    let k = h_eff.len() as f64;
    let mut xi = 0.0;
    let mut total = Complex64::new(0.0, 0.0);
    let mut per_user = 0.0;
    for (i, (&amp, &h)) in p_hat.iter().zip(h_eff).enumerate() {
        let over = amp * amp - budget.p_ave[i];
        xi += 0.5 * over * over + queue.q[i] * over;
        let gain = h * amp;
        total += gain;
        per_user += (gain - Complex64::new(1.0 / k, 0.0)).norm_sqr();
    }
    let phi = coeffs.a * (total - Complex64::new(1.0, 0.0)).norm_sqr() + coeffs.c * per_user;
    xi + cfg.v * phi
}

/// Fixed strategy: transmit at the long-term budget every round.
pub fn fixed_power(budget: &PowerBudget) -> PowerAllocation {
    PowerAllocation::from_powers(&budget.p_ave).expect("budget powers are valid")
}

/// Channel-inversion strategy: `p_k = min((Re H_k / (K |H_k|^2))^2, P_max)`,
/// zero for a vanishing channel. Ignores the long-term budget.
pub fn ci_power(h_eff: &[Complex64], budget: &PowerBudget) -> PowerAllocation {
    let k = h_eff.len() as f64;
    let p: Vec<f64> = h_eff
        .iter()
        .zip(&budget.p_max)
        .map(|(h, &p_max)| {
            let denom = k * h.norm_sqr();
            if denom == 0.0 {
                0.0
            } else {
                (h.re / denom).powi(2).min(p_max)
            }
        })
        .collect();
    PowerAllocation::from_powers(&p).expect("powers are valid")
}

/// Dual-subgradient settings for the offline Lagrangian baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualConfig {
    /// Base step size; UE `k` at iteration `i` moves its multiplier by
    /// `step0 * scale_k * (mean_k - ave_k) / (ave_k * sqrt(i))`, where
    /// `scale_k` is the caller-supplied magnitude of the UE's dual variable.
    pub step0: f64,
    pub max_iters: usize,
    /// Tolerance on the worst per-UE mean-power violation (watts).
    pub tol: f64,
}

impl Default for DualConfig {
    fn default() -> Self {
        Self {
            step0: 0.2,
            max_iters: 300,
            tol: 1e-3,
        }
    }
}

/// Outcome of the dual-subgradient loop.
#[derive(Debug, Clone)]
pub struct DualSummary {
    pub lambda: Vec<f64>,
    pub iterations: usize,
    /// Worst per-UE violation of the mean-power budget at the returned tape.
    pub violation: f64,
    pub converged: bool,
}

/// One round's inner solve for the Lagrangian baseline: Gauss-Seidel with
/// the closed-form coordinate update
/// `p_hat_k = clamp(((A + C/K) Re H_k - A Re(H_k conj(R_k))) / (lambda_k + (A + C) |H_k|^2))`.
pub fn lgr_inner_round(
    h_eff: &[Complex64],
    lambda: &[f64],
    coeffs: &GapCoefficients,
    budget: &PowerBudget,
    p_init: &PowerAllocation,
    max_sweeps: usize,
    tol: f64,
) -> PowerAllocation {
    let n_ues = h_eff.len();
    let kf = n_ues as f64;
    let mut p_hat = p_init.amplitudes().to_vec();
    for _ in 0..max_sweeps {
        let mut max_change = 0.0f64;
        for k in 0..n_ues {
            let h_k = h_eff[k];
            let cross: Complex64 = (0..n_ues)
                .filter(|&i| i != k)
                .map(|i| h_eff[i].conj() * p_hat[i])
                .sum();
            let num = (coeffs.a + coeffs.c / kf) * h_k.re - coeffs.a * (h_k * cross).re;
            let den = lambda[k] + (coeffs.a + coeffs.c) * h_k.norm_sqr();
            let next = if den > 0.0 {
                (num / den).clamp(0.0, budget.p_max[k].sqrt())
            } else {
                0.0
            };
            max_change = max_change.max((next - p_hat[k]).abs());
            p_hat[k] = next;
        }
        if max_change < tol {
            break;
        }
    }
    PowerAllocation::from_amplitudes(p_hat).expect("amplitudes stay in the box")
}

/// Dual subgradient on the long-term power constraint. `solve_rounds` maps
/// the multiplier (and the previous tape as warm start) to a full per-round
/// allocation tape; this indirection lets the caller re-derive beamformers
/// inside each dual iteration. `step_scale` carries each UE's dual-variable
/// magnitude (the quadratic curvature `(A+C) |H_k|^2` of the inner update is
/// the natural choice). Multipliers climb from zero and the loop stops at
/// the first iterate whose budget violation is inside `tol`.
pub fn dual_subgradient<F>(
    mut solve_rounds: F,
    rounds: usize,
    budget: &PowerBudget,
    cfg: &DualConfig,
    step_scale: &[f64],
) -> (Vec<PowerAllocation>, DualSummary)
where
    F: FnMut(&[f64], &[PowerAllocation]) -> Vec<PowerAllocation>,
{
    let n_ues = budget.n_ues();
    assert_eq!(step_scale.len(), n_ues);
    let mut lambda = vec![0.0f64; n_ues];
    let mut tape: Vec<PowerAllocation> = vec![fixed_power(budget); rounds];
    let mut best: Option<(Vec<PowerAllocation>, Vec<f64>, f64)> = None;
    let mut iterations = 0;

    for iter in 1..=cfg.max_iters {
        iterations = iter;
        tape = solve_rounds(&lambda, &tape);
        debug_assert_eq!(tape.len(), rounds);
        let mean: Vec<f64> = (0..n_ues)
            .map(|k| tape.iter().map(|p| p.power(k)).sum::<f64>() / rounds as f64)
            .collect();
        let violation = mean
            .iter()
            .zip(&budget.p_ave)
            .map(|(&m, &ave)| m - ave)
            .fold(f64::NEG_INFINITY, f64::max)
            .max(0.0);
        if best.as_ref().is_none_or(|(_, _, v)| violation < *v) {
            best = Some((tape.clone(), lambda.clone(), violation));
        }
        if violation <= cfg.tol {
            return (
                tape,
                DualSummary {
                    lambda,
                    iterations,
                    violation,
                    converged: true,
                },
            );
        }
        let decay = (iter as f64).sqrt();
        for k in 0..n_ues {
            let step = cfg.step0 * step_scale[k] / (budget.p_ave[k] * decay);
            lambda[k] = (lambda[k] + step * (mean[k] - budget.p_ave[k])).max(0.0);
        }
    }
    let (best_tape, best_lambda, best_violation) = best.expect("at least one iterate");
    eprintln!(
        "warning: dual subgradient hit {} iterations with violation {:.3e}; returning best iterate",
        cfg.max_iters, best_violation
    );
    (
        best_tape,
        DualSummary {
            lambda: best_lambda,
            iterations,
            violation: best_violation,
            converged: false,
        },
    )
}

/// Offline Lagrangian power control against fixed per-round effective
/// channels (non-causal: the whole tape is visible to the optimizer).
pub fn lgr_power(
    h_eff_rounds: &[Vec<Complex64>],
    coeffs_rounds: &[GapCoefficients],
    budget: &PowerBudget,
    cfg: &DualConfig,
) -> (Vec<PowerAllocation>, DualSummary) {
    let rounds = h_eff_rounds.len();
    assert_eq!(coeffs_rounds.len(), rounds);
    let scale = dual_step_scale(h_eff_rounds, coeffs_rounds, budget.n_ues());
    dual_subgradient(
        |lambda, warm| {
            (0..rounds)
                .map(|t| {
                    lgr_inner_round(
                        &h_eff_rounds[t],
                        lambda,
                        &coeffs_rounds[t],
                        budget,
                        &warm[t],
                        100,
                        1e-10,
                    )
                })
                .collect()
        },
        rounds,
        budget,
        cfg,
        &scale,
    )
}

/// Natural per-UE dual step scale: the mean inner-update curvature
/// `(A_t + C_t) |H_k^t|^2` over the tape.
pub fn dual_step_scale(
    h_eff_rounds: &[Vec<Complex64>],
    coeffs_rounds: &[GapCoefficients],
    n_ues: usize,
) -> Vec<f64> {
    let rounds = h_eff_rounds.len().max(1);
    (0..n_ues)
        .map(|k| {
            let mean: f64 = h_eff_rounds
                .iter()
                .zip(coeffs_rounds)
                .map(|(h, c)| (c.a + c.c) * h[k].norm_sqr())
                .sum::<f64>()
                / rounds as f64;
            mean.max(1e-12)
        })
        .collect()
}
