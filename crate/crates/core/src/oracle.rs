//! Brute-force references for the reduced simulator.
//!
//! Nothing here is used by the production path. The tripartite simulator
//! keeps agent, register and environment as one `d^3` state vector, applies
//! the XOR gate as an explicit `d^2 x d^2` permutation, and rotates the
//! agent with physical generators exponentiated by a general matrix
//! exponential. Agreement with [`crate::protocol`] confirms that the
//! frame-change bookkeeping of the reduced simulator is right.

use std::time::Instant;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::protocol::{
    run_trial_with, FrameComposition, IterationRecord, RewardParams, TrialOptions, TrialResult,
};
use crate::qstate::{
    born_probabilities, sample_outcome, two_level_unitary, xor_gate_apply, ProbVector, StateVector,
    UnitaryMatrix,
};
use crate::rng::RngStream;

/// Largest dimension the tripartite simulator accepts (`d^3 = 512`).
pub const MAX_TRIPARTITE_DIM: usize = 8;

/// Plain dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![C64::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_unitary(u: &UnitaryMatrix) -> Self {
        Self { n: u.dim(), data: u.entries().to_vec() }
    }

    pub fn to_unitary(&self) -> Result<UnitaryMatrix> {
        UnitaryMatrix::from_row_major(self.n, self.data.clone())
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.n + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        self.data[r * self.n + c] = v;
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { n: self.n, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for c in 0..n {
                out.data[r * n + c] = (0..n).map(|k| self.data[r * n + k] * other.data[k * n + c]).sum();
            }
        }
        out
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        (0..self.n)
            .map(|r| (0..self.n).map(|c| self.data[r * self.n + c] * v[c]).sum())
            .collect()
    }

    pub fn adjoint(&self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for c in 0..n {
                out.data[c * n + r] = self.data[r * n + c].conj();
            }
        }
        out
    }

    /// Outer product `|a><b|`.
    pub fn outer(a: &[C64], b: &[C64]) -> Self {
        let n = a.len();
        let mut out = Self::zeros(n);
        for r in 0..n {
            for c in 0..n {
                out.data[r * n + c] = a[r] * b[c].conj();
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    fn norm_one(&self) -> f64 {
        (0..self.n)
            .map(|c| (0..self.n).map(|r| self.get(r, c).norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Matrix exponential by scaling and squaring of a Taylor series.
    pub fn expm(&self) -> Self {
        let norm = self.norm_one();
        let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
        let scaled = self.scale(C64::new(0.5f64.powi(squarings as i32), 0.0));
        let mut sum = Self::identity(self.n);
        let mut term = Self::identity(self.n);
        for k in 1..=30 {
            term = term.matmul(&scaled).scale(C64::new(1.0 / k as f64, 0.0));
            sum = sum.add(&term);
            if term.norm_one() < 1e-18 {
                break;
            }
        }
        for _ in 0..squarings {
            sum = sum.matmul(&sum);
        }
        sum
    }
}

/// The XOR gate on `(control, target)` as a `d^2 x d^2` permutation matrix,
/// basis index `control * d + target`.
pub fn xor_matrix(d: usize) -> Result<CMatrix> {
    let mut m = CMatrix::zeros(d * d);
    for j in 0..d {
        for k in 0..d {
            let (jj, t) = xor_gate_apply(j, k, d)?;
            m.set(jj * d + t, j * d + k, C64::new(1.0, 0.0));
        }
    }
    Ok(m)
}

/// Agent, register and environment as one vector, agent index slowest:
/// amplitude of `|a>|r>|e>` at `a d^2 + r d + e`.
#[derive(Debug, Clone, PartialEq)]
pub struct TripartiteState {
    dim: usize,
    amps: Vec<C64>,
}

impl TripartiteState {
    pub fn product(agent: &[C64], register: &[C64], env: &[C64]) -> Result<Self> {
        let d = agent.len();
        for len in [register.len(), env.len()] {
            if len != d {
                return Err(Error::DimensionMismatch { expected: d, found: len });
            }
        }
        let mut amps = Vec::with_capacity(d * d * d);
        for a in agent {
            for r in register {
                for e in env {
                    amps.push(a * r * e);
                }
            }
        }
        Ok(Self { dim: d, amps })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    #[inline]
    fn index(&self, a: usize, r: usize, e: usize) -> usize {
        (a * self.dim + r) * self.dim + e
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|x| x.norm_sqr()).sum()
    }

    /// Applies a `d^2 x d^2` gate to (environment as control, register as target).
    pub fn apply_env_register(&mut self, gate: &CMatrix) {
        let d = self.dim;
        for a in 0..d {
            let pair: Vec<C64> = (0..d * d)
                .map(|idx| {
                    let (e, r) = (idx / d, idx % d);
                    self.amps[self.index(a, r, e)]
                })
                .collect();
            let out = gate.matvec(&pair);
            for (idx, v) in out.into_iter().enumerate() {
                let (e, r) = (idx / d, idx % d);
                let i = self.index(a, r, e);
                self.amps[i] = v;
            }
        }
    }

    /// Register marginal.
    pub fn register_probabilities(&self) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|r| {
                (0..d)
                    .flat_map(|a| (0..d).map(move |e| (a, e)))
                    .map(|(a, e)| self.amps[self.index(a, r, e)].norm_sqr())
                    .sum()
            })
            .collect()
    }

    /// Projects the register onto `|m>` and renormalizes.
    pub fn collapse_register(&mut self, m: usize) -> Result<()> {
        let d = self.dim;
        for a in 0..d {
            for r in (0..d).filter(|&r| r != m) {
                for e in 0..d {
                    let i = self.index(a, r, e);
                    self.amps[i] = C64::new(0.0, 0.0);
                }
            }
        }
        let n2 = self.norm_sqr();
        if n2 == 0.0 {
            return Err(Error::InvalidParameter(format!("register outcome {m} has zero probability")));
        }
        let inv = 1.0 / n2.sqrt();
        for x in &mut self.amps {
            *x *= inv;
        }
        Ok(())
    }

    /// Reduced agent density matrix, tracing out register and environment.
    pub fn agent_density(&self) -> CMatrix {
        let d = self.dim;
        let mut rho = CMatrix::zeros(d);
        for a in 0..d {
            for b in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for r in 0..d {
                    for e in 0..d {
                        acc += self.amps[self.index(a, r, e)] * self.amps[self.index(b, r, e)].conj();
                    }
                }
                rho.set(a, b, acc);
            }
        }
        rho
    }
}

/// Pure state behind a rank-one density matrix, up to global phase.
fn dominant_pure_state(rho: &CMatrix) -> Result<StateVector> {
    let d = rho.size();
    let k = (0..d)
        .max_by(|&x, &y| rho.get(x, x).re.total_cmp(&rho.get(y, y).re))
        .unwrap_or(0);
    let scale = 1.0 / rho.get(k, k).re.sqrt();
    StateVector::normalized((0..d).map(|a| rho.get(a, k) * scale).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripartiteOutcome {
    pub outcome: usize,
    /// Agent after the measurement; equals `frame |0>` up to phase.
    pub post_agent: StateVector,
    pub probs: ProbVector,
}

/// One interaction and measurement with explicit gates on the full
/// three-party state `|frame 0>_A |0>_R (frame^dag env)_E`.
///
/// With `forced_outcome = None` the outcome is drawn from `rng` with the
/// same single uniform the reduced simulator would use.
pub fn tripartite_step(
    frame: &UnitaryMatrix,
    env: &StateVector,
    forced_outcome: Option<usize>,
    rng: &mut RngStream,
) -> Result<TripartiteOutcome> {
    let d = frame.dim();
    if env.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: env.dim() });
    }
    if d > MAX_TRIPARTITE_DIM {
        return Err(Error::InvalidParameter(format!(
            "tripartite oracle is limited to d <= {MAX_TRIPARTITE_DIM}, got {d}"
        )));
    }
    let f = CMatrix::from_unitary(frame);
    let mut ket0 = vec![C64::new(0.0, 0.0); d];
    ket0[0] = C64::new(1.0, 0.0);
    let agent = f.matvec(&ket0);
    let env_in_frame = f.adjoint().matvec(env.amps());

    let mut state = TripartiteState::product(&agent, &ket0, &env_in_frame)?;
    state.apply_env_register(&xor_matrix(d)?);

    let probs = ProbVector::new(state.register_probabilities())?;
    let outcome = match forced_outcome {
        Some(m) if m >= d => return Err(Error::IndexOutOfRange { index: m, dim: d }),
        Some(m) => m,
        None => sample_outcome(&probs, rng),
    };
    state.collapse_register(outcome)?;
    // The register is then discarded and a fresh |0>_R prepared; only the
    // agent carries over.
    let post_agent = dominant_pure_state(&state.agent_density())?;
    Ok(TripartiteOutcome { outcome, post_agent, probs })
}

/// Physical agent rotation `exp(-i Sz alpha) exp(-i Sx beta)` with
/// `Sz = (|a><a| - |b><b|)/2`, `Sx = (|a><b| + |b><a|)/2`.
pub fn physical_rotation(a: &[C64], b: &[C64], alpha: f64, beta: f64) -> CMatrix {
    let half = C64::new(0.5, 0.0);
    let sz = CMatrix::outer(a, a).add(&CMatrix::outer(b, b).scale(C64::new(-1.0, 0.0))).scale(half);
    let sx = CMatrix::outer(a, b).add(&CMatrix::outer(b, a)).scale(half);
    sz.scale(C64::new(0.0, -alpha)).expm().matmul(&sx.scale(C64::new(0.0, -beta)).expm())
}

/// A full trial driven by [`tripartite_step`], with the agent rotated in the
/// laboratory frame and the frame accumulated as `U <- U_A U`. Consumes the
/// random stream in the same order as [`crate::protocol::run_trial`].
pub fn tripartite_trial(
    env: &StateVector,
    params: &RewardParams,
    n_iters: usize,
    seed: u64,
) -> Result<TrialResult> {
    params.validate()?;
    let d = env.dim();
    let mut rng = RngStream::new(seed);
    let mut frame = CMatrix::identity(d);
    let mut delta = params.delta_init;
    let fid = |f: &CMatrix| -> f64 {
        (0..d).map(|r| f.get(r, 0).conj() * env.amps()[r]).sum::<C64>().norm_sqr()
    };
    let initial_fidelity = fid(&frame);
    let mut records = Vec::with_capacity(n_iters);
    for k in 0..n_iters {
        let step = tripartite_step(&frame.to_unitary()?, env, None, &mut rng)?;
        let m = step.outcome;
        let (mut alpha, mut beta) = (0.0, 0.0);
        if m == 0 {
            delta *= params.epsilon;
        } else {
            alpha = (rng.next_f64() - 0.5) * delta;
            beta = (rng.next_f64() - 0.5) * delta;
            let zero_bar: Vec<C64> = (0..d).map(|r| frame.get(r, 0)).collect();
            let m_bar: Vec<C64> = (0..d).map(|r| frame.get(r, m)).collect();
            frame = physical_rotation(&zero_bar, &m_bar, alpha, beta).matmul(&frame);
            delta = (delta / params.epsilon).min(params.delta_max);
        }
        let f = fid(&frame);
        records.push(IterationRecord {
            iteration: k + 1,
            outcome: m,
            alpha,
            beta,
            delta_after: delta,
            log_delta_after: delta.ln(),
            fidelity_after: f,
            theta_equiv: 2.0 * f.sqrt().min(1.0).acos(),
        });
    }
    Ok(TrialResult {
        env_label: String::new(),
        dim: d,
        seed,
        initial_fidelity,
        initial_delta: params.delta_init,
        records,
    })
}

/// Agent-environment fidelity after one `m != 0` update, where
/// `c0 = <0bar|E>` and `cm = <mbar|E>` in the agent's frame:
/// `|e^{i alpha/2} cos(beta/2) c0 + i e^{-i alpha/2} sin(beta/2) cm|^2`.
pub fn analytic_post_fidelity(c0: C64, cm: C64, alpha: f64, beta: f64) -> f64 {
    let (sb, cb) = (0.5 * beta).sin_cos();
    let a = C64::from_polar(cb, 0.5 * alpha) * c0;
    let b = C64::new(0.0, 1.0) * C64::from_polar(sb, -0.5 * alpha) * cm;
    (a + b).norm_sqr()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Expected fidelity after one iteration for a qubit environment at Bloch
/// angle `theta` (with `phi = 0`) and exploration range `delta`, averaging
/// over both the measurement outcome and the random angles.
pub fn expected_onestep_fidelity(theta: f64, delta: f64, samples: usize, seed: u64) -> Result<Estimate> {
    if samples < 10_000 {
        return Err(Error::InvalidParameter(format!("need at least 10^4 samples, got {samples}")));
    }
    let c0 = (0.5 * theta).cos();
    let c1 = (0.5 * theta).sin();
    let (p0, p1) = (c0 * c0, c1 * c1);
    let (c0, c1) = (C64::new(c0, 0.0), C64::new(c1, 0.0));
    let mut rng = RngStream::new(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let alpha = (rng.next_f64() - 0.5) * delta;
        let beta = (rng.next_f64() - 0.5) * delta;
        let x = p0 * p0 + p1 * analytic_post_fidelity(c0, c1, alpha, beta);
        sum += x;
        sum_sq += x * x;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    Ok(Estimate { mean, std_error: (var / (n - 1.0)).sqrt() })
}

/// Random unitary `exp(-i H)` for a random Hermitian `H`.
pub fn random_unitary(d: usize, rng: &mut RngStream) -> Result<UnitaryMatrix> {
    let mut h = CMatrix::zeros(d);
    for r in 0..d {
        h.set(r, r, C64::new(rng.uniform(-3.0, 3.0), 0.0));
        for c in (r + 1)..d {
            let v = C64::new(rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0));
            h.set(r, c, v);
            h.set(c, r, v.conj());
        }
    }
    h.scale(C64::new(0.0, -1.0)).expm().to_unitary()
}

pub fn random_state(d: usize, rng: &mut RngStream) -> Result<StateVector> {
    StateVector::normalized(
        (0..d).map(|_| C64::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0))).collect(),
    )
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Random cases per check.
    pub cases: usize,
    pub seed: u64,
    pub iterations: usize,
    /// Composition used by the reduced simulator under test.
    pub composition: FrameComposition,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { cases: 50, seed: 0x5EED, iterations: 40, composition: FrameComposition::Right }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: impl Into<String>, passed: bool, detail: String) -> Self {
        Self { name: name.into(), passed, detail }
    }
}

fn check_probabilities(d: usize, opts: &VerifyOptions) -> Result<CheckResult> {
    let mut rng = RngStream::new(opts.seed ^ (d as u64) << 32);
    let mut worst_prob: f64 = 0.0;
    let mut worst_agent: f64 = 0.0;
    for _ in 0..opts.cases {
        let frame = random_unitary(d, &mut rng)?;
        let env = random_state(d, &mut rng)?;
        let reduced = born_probabilities(&frame, &env)?;
        let agent = frame.column_state(0)?;
        for m in 0..d {
            let t = tripartite_step(&frame, &env, Some(m), &mut rng)?;
            for (a, b) in t.probs.probs().iter().zip(reduced.probs()) {
                worst_prob = worst_prob.max((a - b).abs());
            }
            let f = crate::qstate::fidelity(&t.post_agent, &agent)?;
            worst_agent = worst_agent.max((1.0 - f).abs());
        }
    }
    Ok(CheckResult::new(
        format!("born probabilities vs tripartite (d = {d})"),
        worst_prob < 1e-12 && worst_agent < 1e-12,
        format!("{} cases, max |dp| = {worst_prob:.2e}, max agent infidelity = {worst_agent:.2e}", opts.cases),
    ))
}

fn check_trials(d: usize, opts: &VerifyOptions) -> Result<CheckResult> {
    let mut rng = RngStream::new(opts.seed.wrapping_add(0x7121) ^ (d as u64) << 40);
    let mut mismatched_outcomes = 0usize;
    let mut worst_fid: f64 = 0.0;
    for case in 0..opts.cases {
        let env = random_state(d, &mut rng)?;
        let eps = [0.1, 0.3, 0.5, 0.7, 0.9][case % 5];
        let params = RewardParams::with_epsilon(eps)?;
        let seed = rng.next_u64();
        let mut options = TrialOptions::new(opts.iterations);
        options.composition = opts.composition;
        let reduced = run_trial_with(&env, &params, options, seed)?;
        let full = tripartite_trial(&env, &params, opts.iterations, seed)?;
        for (a, b) in reduced.records.iter().zip(&full.records) {
            if a.outcome != b.outcome {
                mismatched_outcomes += 1;
            }
            worst_fid = worst_fid.max((a.fidelity_after - b.fidelity_after).abs());
        }
    }
    Ok(CheckResult::new(
        format!("trial traces vs tripartite (d = {d})"),
        mismatched_outcomes == 0 && worst_fid < 1e-10,
        format!(
            "{} trials x {} iterations, outcome mismatches = {mismatched_outcomes}, max |dF| = {worst_fid:.2e}",
            opts.cases, opts.iterations
        ),
    ))
}

fn check_closed_form(opts: &VerifyOptions) -> Result<CheckResult> {
    use crate::protocol::{step_with_outcome, AgentState};
    let mut rng = RngStream::new(opts.seed ^ 0xC105ED);
    let mut worst: f64 = 0.0;
    for _ in 0..opts.cases {
        let d = 2 + (rng.next_u64() % 5) as usize;
        let env = random_state(d, &mut rng)?;
        let frame = random_unitary(d, &mut rng)?;
        let params = RewardParams::with_epsilon(0.5)?;
        let agent = AgentState::from_parts(frame.clone(), params.delta_init, 0)?;
        let m = 1 + (rng.next_u64() % (d as u64 - 1)) as usize;
        let (xa, xb) = (rng.next_f64() - 0.5, rng.next_f64() - 0.5);
        let (_, rec) = step_with_outcome(&agent, &env, &params, m, xa, xb)?;
        let in_frame = crate::qstate::apply_adjoint(&frame, &env)?;
        let expected = analytic_post_fidelity(in_frame.amps()[0], in_frame.amps()[m], rec.alpha, rec.beta);
        worst = worst.max((rec.fidelity_after - expected).abs());
    }
    Ok(CheckResult::new(
        "one-step fidelity vs closed form",
        worst < 1e-10,
        format!("{} cases, max |dF| = {worst:.2e}", opts.cases),
    ))
}

fn check_xor() -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    let mut clears_iff_equal = true;
    for d in 2..=MAX_TRIPARTITE_DIM {
        let x = xor_matrix(d)?;
        worst = worst.max(x.max_abs_diff(&x.adjoint()));
        worst = worst.max(x.matmul(&x).max_abs_diff(&CMatrix::identity(d * d)));
        for j in 0..d {
            for k in 0..d {
                let (_, t) = xor_gate_apply(j, k, d)?;
                clears_iff_equal &= (t == 0) == (j == k);
            }
        }
    }
    Ok(CheckResult::new(
        "xor gate hermitian, involutory, clears target iff j = k",
        worst == 0.0 && clears_iff_equal,
        format!("d = 2..={MAX_TRIPARTITE_DIM}, max deviation = {worst:.1e}"),
    ))
}

fn check_two_level(opts: &VerifyOptions) -> Result<CheckResult> {
    let mut rng = RngStream::new(opts.seed ^ 0x2_1E7E1);
    let mut worst: f64 = 0.0;
    for _ in 0..opts.cases {
        let d = 2 + (rng.next_u64() % 7) as usize;
        let i = (rng.next_u64() % d as u64) as usize;
        let j = (i + 1 + (rng.next_u64() % (d as u64 - 1)) as usize) % d;
        let (alpha, beta) = (rng.uniform(-7.0, 7.0), rng.uniform(-7.0, 7.0));
        let mut ei = vec![C64::new(0.0, 0.0); d];
        let mut ej = ei.clone();
        ei[i] = C64::new(1.0, 0.0);
        ej[j] = C64::new(1.0, 0.0);
        let reference = physical_rotation(&ei, &ej, alpha, beta);
        let built = CMatrix::from_unitary(&two_level_unitary(d, i, j, alpha, beta)?);
        worst = worst.max(built.max_abs_diff(&reference));
    }
    Ok(CheckResult::new(
        "two-level rotation vs matrix exponential",
        worst < 1e-10,
        format!("{} cases, max entry deviation = {worst:.2e}", opts.cases),
    ))
}

/// Runs every equivalence check. An `Err` from a check is reported as a failure.
pub fn run_verification(opts: &VerifyOptions) -> Vec<CheckResult> {
    let started = Instant::now();
    let mut out: Vec<CheckResult> = Vec::new();
    let mut push = |name: &str, r: Result<CheckResult>| {
        out.push(r.unwrap_or_else(|e| CheckResult::new(name, false, format!("error: {e}"))));
    };
    push("xor", check_xor());
    push("two-level", check_two_level(opts));
    for d in [2, 3] {
        push("probabilities", check_probabilities(d, opts));
    }
    push("closed form", check_closed_form(opts));
    for d in [2, 3] {
        push("trials", check_trials(d, opts));
    }
    let elapsed = started.elapsed().as_secs_f64();
    out.push(CheckResult::new(
        "suite runtime under 5 s",
        elapsed < 5.0,
        format!("{elapsed:.2} s"),
    ));
    out
}
