//! The full training loop: per-round alternating optimization of the
//! combiner and the transmit powers inside federated ridge training over
//! the simulated uplink.
//!
//! Every round t (1-based): sample the round's channels, pick `(p, v)`
//! according to the strategy (the Lagrangian baseline reads a precomputed
//! non-causal tape; everything else is causal), let every UE take its local
//! steps, aggregate over the air, adopt the real part at the CPU, update
//! the virtual queues with the realized powers, and record metrics.

use nalgebra::DVector;

use crate::beamforming::{build_inputs, mop_beamformer, mrc_beamformer, BeamformingInputs};
use crate::channel::{
    large_scale_gains, place_nodes, sample_channel, ChannelRealization, LargeScaleGains,
    PathLossParams, Topology,
};
use crate::config::{BeamformerKind, PowerStrategyKind, SimulationConfig};
use crate::error::{Error, Result};
use crate::ota::{
    aggregate, effective_channel, error_bounds, gap_coefficients, phi, BeamformingVector,
    GapCoefficients, GapHyperparams, NoiseModel, PowerAllocation, PowerBudget,
};
use crate::power::{
    ci_power, dual_step_scale, dual_subgradient, fixed_power, lgr_inner_round, lofpc_round,
    queue_penalty, update_queue, DualConfig, LyapunovConfig, VirtualQueueState,
};
use crate::ridge::{
    generate_dataset, global_loss, local_update, optimal_loss, RidgeDataset, TaskHyperparams,
};
use crate::rng::{stream_rng, Stream};

/// Per-round alternation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlternationConfig {
    pub max_iters: usize,
    /// Relative change threshold on the concatenated `(p_hat, v)` iterate.
    pub tol: f64,
}

impl Default for AlternationConfig {
    fn default() -> Self {
        Self {
            max_iters: 20,
            tol: 1e-6,
        }
    }
}

/// Which combiner and power rule a run uses, plus their knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyConfig {
    pub beamformer: BeamformerKind,
    pub power: PowerStrategyKind,
    pub lyapunov: LyapunovConfig,
    pub alternation: AlternationConfig,
    pub dual: DualConfig,
}

impl StrategyConfig {
    pub fn from_config(cfg: &SimulationConfig) -> Self {
        Self {
            beamformer: cfg.strategy.beamformer,
            power: cfg.strategy.power,
            lyapunov: LyapunovConfig {
                v: cfg.lyapunov.v,
                max_sweeps: cfg.lyapunov.max_sweeps,
                tol: cfg.lyapunov.tol,
            },
            alternation: AlternationConfig {
                max_iters: cfg.alternation.max_iters,
                tol: cfg.alternation.tol,
            },
            dual: DualConfig {
                step0: cfg.dual.step0,
                max_iters: cfg.dual.max_iters,
                tol: cfg.dual.tol,
            },
        }
    }

    pub fn label(&self) -> String {
        format!("{}-{}", self.beamformer, self.power)
    }
}

/// Everything a run needs that is fixed across rounds.
#[derive(Debug, Clone)]
pub struct World {
    pub topology: Topology,
    pub gains: LargeScaleGains,
    pub datasets: Vec<RidgeDataset>,
    pub noise: NoiseModel,
    pub budget: PowerBudget,
    pub task: TaskHyperparams,
    pub gap: GapHyperparams,
    pub raw_gap_weights: Option<(f64, f64, f64)>,
    pub rounds: usize,
    pub seed: u64,
    pub perfect_channel: bool,
    /// Pooled-problem optimum and its loss.
    pub w_star: DVector<f64>,
    pub f_star: f64,
}

impl World {
    pub fn build(cfg: &SimulationConfig) -> Result<Self> {
        cfg.validate()?;
        let seed = cfg.run.seed;
        let topology = place_nodes(
            seed,
            cfg.topology.area_side_m,
            cfg.topology.ues,
            cfg.topology.aps,
            cfg.topology.antennas,
        )?;
        let path_loss = PathLossParams {
            carrier_hz: cfg.channel.carrier_hz,
            ref_distance_m: cfg.channel.ref_distance_m,
            exponent: cfg.channel.path_loss_exponent,
        };
        let gains = large_scale_gains(&topology, &path_loss)?;
        let task = TaskHyperparams {
            rho: cfg.task.regularization,
            eta: cfg.task.learning_rate,
            omega: cfg.task.local_epochs,
            model_dim: cfg.task.model_dim,
        };
        let datasets: Vec<RidgeDataset> = (0..cfg.topology.ues)
            .map(|k| generate_dataset(seed, k, cfg.task.samples_per_ue, task.model_dim))
            .collect::<Result<_>>()?;
        let (w_star, f_star) = optimal_loss(&datasets, task.rho)?;

        let g = if cfg.gap.model_norm_bound > 0.0 {
            cfg.gap.model_norm_bound
        } else {
            // The bound must hold over the whole trajectory, which runs from
            // the first local step toward the pooled optimum; twice the
            // larger of the two norms covers it with margin.
            let w0 = DVector::zeros(task.model_dim);
            let max_initial = datasets
                .iter()
                .map(|d| local_update(&w0, d, &task).norm())
                .fold(0.0f64, f64::max);
            2.0 * max_initial.max(w_star.norm())
        };
        if !(g > 0.0) {
            return Err(Error::Config(
                "model-norm bound resolved to zero; set gap.model_norm_bound".into(),
            ));
        }
        let gap = GapHyperparams {
            g,
            s: cfg.gap.grad_fluctuation,
            mu: cfg.gap.mu,
            omega: task.omega,
            eta: task.eta,
            grad_variance: cfg.gap.grad_variance,
            grad_bound: cfg.gap.grad_bound,
        };
        let budget = if cfg.budget.raw {
            PowerBudget::from_raw(
                cfg.budget.p_ave_w,
                cfg.budget.p_max_w,
                cfg.topology.ues,
                task.model_dim,
                g,
            )?
        } else {
            PowerBudget::uniform(cfg.budget.p_ave_w, cfg.budget.p_max_w, cfg.topology.ues)?
        };
        Ok(Self {
            topology,
            gains,
            datasets,
            noise: NoiseModel::from_dbm(cfg.channel.noise_dbm),
            budget,
            task,
            gap,
            raw_gap_weights: cfg.raw_gap_weights(),
            rounds: cfg.run.rounds,
            seed,
            perfect_channel: cfg.run.perfect_channel,
            w_star,
            f_star,
        })
    }

    pub fn n_ues(&self) -> usize {
        self.topology.n_ues()
    }

    /// Gap weights for round `t` (1-based), with raw overrides applied.
    pub fn coeffs(&self, t: usize) -> GapCoefficients {
        let c = gap_coefficients(&self.gap, t, self.rounds);
        match self.raw_gap_weights {
            Some((a, b, cc)) => c.with_raw(a, b, cc),
            None => c,
        }
    }

    pub fn channels_for_round(&self, t: usize) -> Result<ChannelRealization> {
        sample_channel(&self.topology, &self.gains, self.seed, t as u64)
    }
}

/// Everything recorded about one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub loss: f64,
    pub optimality_gap: f64,
    pub power: Vec<f64>,
    pub avg_power: Vec<f64>,
    pub queue: Vec<f64>,
    pub phi: f64,
    pub phi_initial: f64,
    pub drift_penalty_initial: f64,
    pub drift_penalty_final: f64,
    pub bias_bound: f64,
    pub mse_bound: f64,
    pub error_norm_squared: f64,
    pub alternation_iters: usize,
    /// Global model adopted by the CPU this round.
    pub model: Vec<f64>,
}

/// `(p, v)` with alternation diagnostics for one round.
#[derive(Debug, Clone)]
pub struct RoundDecision {
    pub power: PowerAllocation,
    pub combiner: BeamformingVector,
    pub iters: usize,
    pub phi_initial: f64,
    pub phi_final: f64,
    pub drift_penalty_initial: f64,
    pub drift_penalty_final: f64,
}

fn beamform(
    world: &World,
    kind: BeamformerKind,
    channels: &ChannelRealization,
    inputs: &BeamformingInputs,
    coeffs: &GapCoefficients,
) -> Result<BeamformingVector> {
    match kind {
        BeamformerKind::Mop => {
            mop_beamformer(inputs, coeffs, world.noise.sigma2, world.task.model_dim)
        }
        BeamformerKind::Mrc => mrc_beamformer(
            channels,
            &world.gains,
            inputs,
            coeffs,
            world.noise.sigma2,
            world.task.model_dim,
        ),
    }
}

fn rel_change_amplitudes(prev: &[f64], next: &[f64]) -> f64 {
    let scale = prev
        .iter()
        .chain(next.iter())
        .fold(0.0f64, |m, &x| m.max(x.abs()))
        .max(1e-12);
    prev.iter()
        .zip(next)
        .fold(0.0f64, |m, (&a, &b)| m.max((a - b).abs()))
        / scale
}

fn rel_change_combiner(prev: &BeamformingVector, next: &BeamformingVector) -> f64 {
    let scale = prev
        .stacked()
        .iter()
        .chain(next.stacked().iter())
        .fold(0.0f64, |m, z| m.max(z.norm()))
        .max(1e-300);
    prev.stacked()
        .iter()
        .zip(next.stacked().iter())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()))
        / scale
}

/// Runs Algorithm-1-style alternation for one round: combiner given powers,
/// then the strategy's power rule given the combiner, until the concatenated
/// `(p_hat, v)` iterate settles. The channel-inversion and fixed strategies
/// get one extra combiner pass so their published pair is self-consistent.
pub fn alternate_round(
    world: &World,
    strategy: &StrategyConfig,
    channels: &ChannelRealization,
    queue: &VirtualQueueState,
    coeffs: &GapCoefficients,
) -> Result<RoundDecision> {
    power_rule_round(world, strategy, channels, queue, coeffs, None)
}

/// Alternation with an optional Lagrangian multiplier replacing the queue
/// pressure (used inside the dual iterations of the offline baseline).
fn power_rule_round(
    world: &World,
    strategy: &StrategyConfig,
    channels: &ChannelRealization,
    queue: &VirtualQueueState,
    coeffs: &GapCoefficients,
    dual_state: Option<(&[f64], &PowerAllocation)>,
) -> Result<RoundDecision> {
    let budget = &world.budget;
    let q_dim = world.task.model_dim;
    let mut p = match dual_state {
        Some((_, warm)) => warm.clone(),
        None => fixed_power(budget),
    };
    let mut v_prev: Option<BeamformingVector> = None;
    let mut phi_initial = 0.0;
    let mut drift_initial = 0.0;
    let mut iters = 0;

    loop {
        iters += 1;
        let inputs = build_inputs(channels, &p)?;
        let v = beamform(world, strategy.beamformer, channels, &inputs, coeffs)?;
        if iters == 1 {
            phi_initial = phi(channels, &v, &p, coeffs, &world.noise, q_dim)?;
            drift_initial =
                queue_penalty(p.amplitudes(), queue, budget) + strategy.lyapunov.v * phi_initial;
        }
        let h_eff = effective_channel(channels, &v)?;
        let p_next = match dual_state {
            Some((lambda, _)) => lgr_inner_round(
                &h_eff,
                lambda,
                coeffs,
                budget,
                &p,
                strategy.lyapunov.max_sweeps,
                strategy.lyapunov.tol,
            ),
            None => match strategy.power {
                PowerStrategyKind::Lofpc => {
                    lofpc_round(&h_eff, queue, coeffs, &strategy.lyapunov, budget, &p)
                }
                PowerStrategyKind::Fixed => fixed_power(budget),
                PowerStrategyKind::Ci => ci_power(&h_eff, budget),
                PowerStrategyKind::Lgr => {
                    return Err(Error::Config(
                        "the Lagrangian strategy runs from a precomputed tape".into(),
                    ))
                }
            },
        };
        let change = match &v_prev {
            None => f64::INFINITY,
            Some(prev) => rel_change_amplitudes(p.amplitudes(), p_next.amplitudes())
                .max(rel_change_combiner(prev, &v)),
        };
        v_prev = Some(v);
        p = p_next;
        if change < strategy.alternation.tol || iters >= strategy.alternation.max_iters {
            break;
        }
    }
    let mut combiner = v_prev.expect("alternation ran at least once");

    // The published pair for Ci/Fixed re-derives the combiner from the final
    // powers; the online controller keeps the Algorithm-1 pairing.
    if dual_state.is_none()
        && matches!(
            strategy.power,
            PowerStrategyKind::Ci | PowerStrategyKind::Fixed
        )
    {
        let inputs = build_inputs(channels, &p)?;
        combiner = beamform(world, strategy.beamformer, channels, &inputs, coeffs)?;
    }

    let phi_final = phi(channels, &combiner, &p, coeffs, &world.noise, q_dim)?;
    let drift_final =
        queue_penalty(p.amplitudes(), queue, budget) + strategy.lyapunov.v * phi_final;
    Ok(RoundDecision {
        power: p,
        combiner,
        iters,
        phi_initial,
        phi_final,
        drift_penalty_initial: drift_initial,
        drift_penalty_final: drift_final,
    })
}

/// Offline tape for the Lagrangian baseline: dual subgradient over the full
/// horizon with the combiner re-derived inside every dual iteration.
pub fn build_lgr_tape(world: &World, strategy: &StrategyConfig) -> Result<Vec<RoundDecision>> {
    let rounds = world.rounds;
    let channels: Vec<ChannelRealization> = (1..=rounds)
        .map(|t| world.channels_for_round(t))
        .collect::<Result<_>>()?;
    let coeffs: Vec<GapCoefficients> = (1..=rounds).map(|t| world.coeffs(t)).collect();
    let zero_queue = VirtualQueueState::new(world.n_ues());

    // Fixed-power pre-pass to scale the dual steps.
    let p0 = fixed_power(&world.budget);
    let mut h0 = Vec::with_capacity(rounds);
    for t in 0..rounds {
        let inputs = build_inputs(&channels[t], &p0)?;
        let v = beamform(
            world,
            strategy.beamformer,
            &channels[t],
            &inputs,
            &coeffs[t],
        )?;
        h0.push(effective_channel(&channels[t], &v)?);
    }
    let scale = dual_step_scale(&h0, &coeffs, world.n_ues());

    let mut solver_error = None;
    let (tape, _summary) = dual_subgradient(
        |lambda, warm| {
            (0..rounds)
                .map(|t| {
                    match power_rule_round(
                        world,
                        strategy,
                        &channels[t],
                        &zero_queue,
                        &coeffs[t],
                        Some((lambda, &warm[t])),
                    ) {
                        Ok(decision) => decision.power,
                        Err(e) => {
                            solver_error.get_or_insert(e);
                            warm[t].clone()
                        }
                    }
                })
                .collect()
        },
        rounds,
        &world.budget,
        &strategy.dual,
        &scale,
    );
    if let Some(e) = solver_error {
        return Err(e);
    }

    // Pair each round's final powers with its consistent combiner.
    (0..rounds)
        .map(|t| {
            let inputs = build_inputs(&channels[t], &tape[t])?;
            let v = beamform(
                world,
                strategy.beamformer,
                &channels[t],
                &inputs,
                &coeffs[t],
            )?;
            let phi_final = phi(
                &channels[t],
                &v,
                &tape[t],
                &coeffs[t],
                &world.noise,
                world.task.model_dim,
            )?;
            Ok(RoundDecision {
                power: tape[t].clone(),
                combiner: v,
                iters: 0,
                phi_initial: phi_final,
                phi_final,
                drift_penalty_initial: phi_final,
                drift_penalty_final: phi_final,
            })
        })
        .collect()
}

/// Runs the full training loop and returns one record per round.
pub fn run_simulation(world: &World, strategy: &StrategyConfig) -> Result<Vec<RoundRecord>> {
    let rounds = world.rounds;
    let n_ues = world.n_ues();
    let lgr_tape = match strategy.power {
        PowerStrategyKind::Lgr => Some(build_lgr_tape(world, strategy)?),
        _ => None,
    };

    let mut w = DVector::<f64>::zeros(world.task.model_dim);
    let mut queue = VirtualQueueState::new(n_ues);
    let mut power_sums = vec![0.0f64; n_ues];
    let mut records = Vec::with_capacity(rounds);

    for t in 1..=rounds {
        let channels = world.channels_for_round(t)?;
        let coeffs = world.coeffs(t);
        let decision = match &lgr_tape {
            Some(tape) => tape[t - 1].clone(),
            None => alternate_round(world, strategy, &channels, &queue, &coeffs)?,
        };
        if !decision.power.within_budget(&world.budget) {
            return Err(Error::Config(format!(
                "round {t}: power allocation escaped the box budget"
            )));
        }

        let locals: Vec<DVector<f64>> = world
            .datasets
            .iter()
            .map(|d| local_update(&w, d, &world.task))
            .collect();
        let mut noise_rng = stream_rng(world.seed, Stream::Noise, t as u64);
        let outcome = aggregate(
            &locals,
            &channels,
            &decision.combiner,
            &decision.power,
            &world.noise,
            &mut noise_rng,
        )?;
        w = if world.perfect_channel {
            outcome.w_bar.clone()
        } else {
            outcome.received_model()
        };
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config(format!("round {t}: model diverged")));
        }
        queue = update_queue(&queue, &decision.power, &world.budget);

        let power: Vec<f64> = decision.power.powers();
        for (sum, &p) in power_sums.iter_mut().zip(&power) {
            *sum += p;
        }
        let avg_power: Vec<f64> = power_sums.iter().map(|s| s / t as f64).collect();
        let loss = global_loss(&w, &world.datasets, world.task.rho);
        let (bias_bound, mse_bound) = error_bounds(&outcome.residuals, outcome.gamma, world.gap.g);
        records.push(RoundRecord {
            round: t,
            loss,
            optimality_gap: loss - world.f_star,
            power,
            avg_power,
            queue: queue.q.clone(),
            phi: decision.phi_final,
            phi_initial: decision.phi_initial,
            drift_penalty_initial: decision.drift_penalty_initial,
            drift_penalty_final: decision.drift_penalty_final,
            bias_bound,
            mse_bound,
            error_norm_squared: outcome.error_norm_squared(),
            alternation_iters: decision.iters,
            model: w.iter().cloned().collect(),
        });
    }
    Ok(records)
}

/// First round from which every UE's running-average power stays at or
/// below `p_ave * (1 + slack)` for the rest of the run.
pub fn power_convergence_round(
    records: &[RoundRecord],
    budget: &PowerBudget,
    slack: f64,
) -> Option<usize> {
    let ok = |r: &RoundRecord| {
        r.avg_power
            .iter()
            .zip(&budget.p_ave)
            .all(|(&avg, &ave)| avg <= ave * (1.0 + slack))
    };
    let mut first = None;
    for r in records.iter().rev() {
        if ok(r) {
            first = Some(r.round);
        } else {
            break;
        }
    }
    first
}

/// One row of the V-sweep summary.
#[derive(Debug, Clone, PartialEq)]
pub struct VSweepSummary {
    pub v: f64,
    pub final_loss: f64,
    pub convergence_round: Option<usize>,
}

/// Re-runs the same world once per penalty value; the shared seed keeps the
/// channel, noise and data draws identical so V is the only variable.
pub fn sweep_v(
    world: &World,
    strategy: &StrategyConfig,
    v_values: &[f64],
) -> Result<Vec<VSweepSummary>> {
    if v_values.is_empty() {
        return Err(Error::Config("V sweep needs at least one value".into()));
    }
    v_values
        .iter()
        .map(|&v| {
            let mut s = strategy.clone();
            s.lyapunov.v = v;
            let records = run_simulation(world, &s)?;
            let final_loss = records.last().map(|r| r.loss).unwrap_or(f64::NAN);
            let convergence_round = power_convergence_round(&records, &world.budget, 0.05);
            Ok(VSweepSummary {
                v,
                final_loss,
                convergence_round,
            })
        })
        .collect()
}
