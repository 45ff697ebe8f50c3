//! The adaptation loop.
//!
//! Each iteration entangles a fresh environment copy with the register
//! through the XOR gate (in the agent's frame), measures the register and
//! feeds the outcome `m` back:
//!
//! * `m = 0`: the agent is left alone and the exploration range shrinks,
//!   `delta <- epsilon * delta`.
//! * `m != 0`: the agent is rotated inside `span{agent, frame |m>}` by
//!   angles drawn uniformly from `[-delta/2, delta/2]`, and the range grows,
//!   `delta <- min(delta / epsilon, delta_max)`.
//!
//! The agent is tracked as a frame `U` with agent state `U|0>`. A rotation
//! `u` in the logical basis updates the frame to `U u`, which is the same as
//! applying `U u U^dag` to the physical agent.
//!
//! The exploration range is stored as its logarithm so that long reward
//! streaks cannot underflow it to an absorbing zero.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::{
    apply_adjoint, born_probabilities, sample_outcome, StateVector, TwoLevelRotation, UnitaryMatrix,
};
use crate::rng::RngStream;

/// Default initial and maximal exploration range.
pub const DEFAULT_DELTA: f64 = 4.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    /// Reward ratio; the punishment ratio is its inverse.
    pub epsilon: f64,
    pub delta_init: f64,
    pub delta_max: f64,
}

impl RewardParams {
    pub fn new(epsilon: f64, delta_init: f64, delta_max: f64) -> Result<Self> {
        let p = Self { epsilon, delta_init, delta_max };
        p.validate()?;
        Ok(p)
    }

    /// `epsilon` with the default `4 pi` range.
    pub fn with_epsilon(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, DEFAULT_DELTA, DEFAULT_DELTA)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if !(self.delta_init > 0.0 && self.delta_init.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "delta_init must be positive, got {}",
                self.delta_init
            )));
        }
        if !(self.delta_max >= self.delta_init && self.delta_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "delta_max must be finite and at least delta_init, got {} < {}",
                self.delta_max, self.delta_init
            )));
        }
        Ok(())
    }

    pub fn reward_ratio(&self) -> f64 {
        self.epsilon
    }

    pub fn punishment_ratio(&self) -> f64 {
        1.0 / self.epsilon
    }
}

/// `epsilon * delta` on outcome 0, `min(delta / epsilon, delta_max)` otherwise.
pub fn reward_update(delta: f64, outcome: usize, params: &RewardParams) -> f64 {
    if outcome == 0 {
        params.epsilon * delta
    } else {
        (delta / params.epsilon).min(params.delta_max)
    }
}

/// [`reward_update`] on `ln(delta)`.
pub fn reward_update_log(log_delta: f64, outcome: usize, params: &RewardParams) -> f64 {
    let log_eps = params.epsilon.ln();
    if outcome == 0 {
        log_delta + log_eps
    } else {
        (log_delta - log_eps).min(params.delta_max.ln())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    frame: UnitaryMatrix,
    log_delta: f64,
    iteration: usize,
}

impl AgentState {
    /// Agent in `|0>` with the initial exploration range.
    pub fn fresh(dim: usize, params: &RewardParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            frame: UnitaryMatrix::identity(dim)?,
            log_delta: params.delta_init.ln(),
            iteration: 0,
        })
    }

    pub fn from_parts(frame: UnitaryMatrix, delta: f64, iteration: usize) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
        }
        Ok(Self { frame, log_delta: delta.ln(), iteration })
    }

    pub fn frame(&self) -> &UnitaryMatrix {
        &self.frame
    }

    pub fn delta(&self) -> f64 {
        self.log_delta.exp()
    }

    pub fn log_delta(&self) -> f64 {
        self.log_delta
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn dim(&self) -> usize {
        self.frame.dim()
    }

    /// The physical agent state, `frame |0>`.
    pub fn agent(&self) -> StateVector {
        self.frame.column_state(0).expect("frame has dimension >= 2")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// One-based iteration number.
    pub iteration: usize,
    pub outcome: usize,
    pub alpha: f64,
    pub beta: f64,
    pub delta_after: f64,
    pub log_delta_after: f64,
    pub fidelity_after: f64,
    /// Bloch angle equivalent to `fidelity_after`: `2 acos(sqrt(F))`.
    pub theta_equiv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub env_label: String,
    pub dim: usize,
    pub seed: u64,
    pub initial_fidelity: f64,
    pub initial_delta: f64,
    pub records: Vec<IterationRecord>,
}

impl TrialResult {
    /// Fidelity before iteration 1 followed by each post-iteration fidelity.
    pub fn fidelity_curve(&self) -> Vec<f64> {
        std::iter::once(self.initial_fidelity)
            .chain(self.records.iter().map(|r| r.fidelity_after))
            .collect()
    }

    pub fn delta_curve(&self) -> Vec<f64> {
        std::iter::once(self.initial_delta)
            .chain(self.records.iter().map(|r| r.delta_after))
            .collect()
    }

    pub fn log_delta_curve(&self) -> Vec<f64> {
        std::iter::once(self.initial_delta.ln())
            .chain(self.records.iter().map(|r| r.log_delta_after))
            .collect()
    }
}

/// Order in which the logical rotation joins the frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrameComposition {
    /// `frame * u`: the rotation acts in the agent's own frame.
    #[default]
    Right,
    /// `u * frame`: rotates in the fixed laboratory basis instead. Wrong for
    /// the protocol; kept so verification can show it catches the mistake.
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOptions {
    pub n_iters: usize,
    /// Environment copies available; the trial stops early when they run out.
    pub copy_budget: Option<usize>,
    pub composition: FrameComposition,
}

impl TrialOptions {
    pub fn new(n_iters: usize) -> Self {
        Self { n_iters, copy_budget: None, composition: FrameComposition::Right }
    }
}

fn check_step_inputs(agent: &AgentState, env: &StateVector, params: &RewardParams) -> Result<()> {
    if agent.dim() != env.dim() {
        return Err(Error::DimensionMismatch { expected: agent.dim(), found: env.dim() });
    }
    if agent.log_delta > params.delta_max.ln() + 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "delta {} exceeds delta_max {}",
            agent.delta(),
            params.delta_max
        )));
    }
    Ok(())
}

fn agent_fidelity(frame: &UnitaryMatrix, env: &StateVector) -> f64 {
    (0..frame.dim())
        .map(|r| frame.get(r, 0).conj() * env.amps()[r])
        .sum::<num_complex::Complex64>()
        .norm_sqr()
        .min(1.0)
}

/// One measurement-feedback iteration.
///
/// Consumes one uniform for the measurement and, only when `m != 0`, two
/// more for `xi_alpha` then `xi_beta`.
pub fn step(
    agent: &AgentState,
    env: &StateVector,
    params: &RewardParams,
    rng: &mut RngStream,
) -> Result<(AgentState, IterationRecord)> {
    step_composed(agent, env, params, rng, FrameComposition::Right)
}

fn step_composed(
    agent: &AgentState,
    env: &StateVector,
    params: &RewardParams,
    rng: &mut RngStream,
    composition: FrameComposition,
) -> Result<(AgentState, IterationRecord)> {
    check_step_inputs(agent, env, params)?;
    let probs = born_probabilities(&agent.frame, env)?;
    let outcome = sample_outcome(&probs, rng);
    let (xi_alpha, xi_beta) = if outcome == 0 {
        (0.0, 0.0)
    } else {
        let xa = rng.next_f64() - 0.5;
        let xb = rng.next_f64() - 0.5;
        (xa, xb)
    };
    apply_feedback(agent, env, params, outcome, xi_alpha, xi_beta, composition)
}

/// The feedback half of [`step`] for a given outcome and angle fractions
/// `xi_alpha, xi_beta` in `[-1/2, 1/2]`. The fractions are ignored when
/// `outcome == 0`.
pub fn step_with_outcome(
    agent: &AgentState,
    env: &StateVector,
    params: &RewardParams,
    outcome: usize,
    xi_alpha: f64,
    xi_beta: f64,
) -> Result<(AgentState, IterationRecord)> {
    check_step_inputs(agent, env, params)?;
    if outcome >= env.dim() {
        return Err(Error::IndexOutOfRange { index: outcome, dim: env.dim() });
    }
    apply_feedback(agent, env, params, outcome, xi_alpha, xi_beta, FrameComposition::Right)
}

fn apply_feedback(
    agent: &AgentState,
    env: &StateVector,
    params: &RewardParams,
    outcome: usize,
    xi_alpha: f64,
    xi_beta: f64,
    composition: FrameComposition,
) -> Result<(AgentState, IterationRecord)> {
    let delta = agent.delta();
    let (alpha, beta, frame) = if outcome == 0 {
        (0.0, 0.0, agent.frame.clone())
    } else {
        let alpha = xi_alpha * delta;
        let beta = xi_beta * delta;
        let rot = TwoLevelRotation::new(env.dim(), 0, outcome, alpha, beta)?;
        let frame = match composition {
            FrameComposition::Right => agent.frame.compose_two_level(&rot)?,
            FrameComposition::Left => agent.frame.precompose_two_level(&rot)?,
        };
        (alpha, beta, frame)
    };
    let log_delta = reward_update_log(agent.log_delta, outcome, params);
    let fidelity_after = agent_fidelity(&frame, env);
    let next = AgentState { frame, log_delta, iteration: agent.iteration + 1 };
    let record = IterationRecord {
        iteration: next.iteration,
        outcome,
        alpha,
        beta,
        delta_after: next.delta(),
        log_delta_after: log_delta,
        fidelity_after,
        theta_equiv: 2.0 * fidelity_after.sqrt().min(1.0).acos(),
    };
    Ok((next, record))
}

/// Runs `n_iters` iterations from `|0>` against identical copies of `env`.
pub fn run_trial(env: &StateVector, params: &RewardParams, n_iters: usize, seed: u64) -> Result<TrialResult> {
    run_trial_with(env, params, TrialOptions::new(n_iters), seed)
}

pub fn run_trial_with(
    env: &StateVector,
    params: &RewardParams,
    options: TrialOptions,
    seed: u64,
) -> Result<TrialResult> {
    params.validate()?;
    if options.n_iters == 0 {
        return Err(Error::InvalidParameter("a trial needs at least one iteration".into()));
    }
    let iterations = options.copy_budget.map_or(options.n_iters, |b| b.min(options.n_iters));
    let mut rng = RngStream::new(seed);
    let mut agent = AgentState::fresh(env.dim(), params)?;
    let initial_fidelity = apply_adjoint(agent.frame(), env)?.amps()[0].norm_sqr().min(1.0);
    let mut records = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let (next, record) = step_composed(&agent, env, params, &mut rng, options.composition)?;
        agent = next;
        records.push(record);
    }
    Ok(TrialResult {
        env_label: String::new(),
        dim: env.dim(),
        seed,
        initial_fidelity,
        initial_delta: params.delta_init,
        records,
    })
}
