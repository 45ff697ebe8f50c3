//! Environment-state families: Haar-random qubits, random qudits, truncated
//! coherent and cat states, and two-level `(|0> + |n>)/sqrt(2)` states.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::StateVector;
use crate::rng::RngStream;

/// Default Fock-space cutoff for coherent and cat states.
pub const DEFAULT_CUTOFF: usize = 10;
/// Largest pre-renormalization tail mass accepted for a truncated state.
pub const MAX_TRUNCATION_TAIL: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvFamily {
    HaarQubit,
    RandomQudit,
    Coherent,
    Cat,
    ZeroN,
}

impl EnvFamily {
    pub const ALL: [EnvFamily; 5] = [
        EnvFamily::HaarQubit,
        EnvFamily::RandomQudit,
        EnvFamily::Coherent,
        EnvFamily::Cat,
        EnvFamily::ZeroN,
    ];

    /// Name used in result files.
    pub fn as_str(self) -> &'static str {
        match self {
            EnvFamily::HaarQubit => "haar_qubit",
            EnvFamily::RandomQudit => "random_qudit",
            EnvFamily::Coherent => "coherent",
            EnvFamily::Cat => "cat",
            EnvFamily::ZeroN => "zero_n",
        }
    }

    /// Name used on the command line.
    pub fn cli_name(self) -> &'static str {
        match self {
            EnvFamily::HaarQubit => "haar-qubit",
            EnvFamily::RandomQudit => "random-qudit",
            EnvFamily::Coherent => "coherent",
            EnvFamily::Cat => "cat",
            EnvFamily::ZeroN => "zero-n",
        }
    }

    pub fn is_fock(self) -> bool {
        matches!(self, EnvFamily::Coherent | EnvFamily::Cat)
    }
}

impl fmt::Display for EnvFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvFamily {
    type Err = Error;

    /// Accepts both the file (`zero_n`) and command-line (`zero-n`) spellings.
    fn from_str(s: &str) -> Result<Self> {
        let normalized = s.trim().to_ascii_lowercase().replace('-', "_");
        EnvFamily::ALL
            .into_iter()
            .find(|f| f.as_str() == normalized)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown environment family {s:?}")))
    }
}

/// Which environment to draw for each trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub family: EnvFamily,
    pub dim: usize,
    /// Excited level of `zero_n`; ignored otherwise.
    pub n: usize,
    /// Fock cutoff of `coherent`/`cat`; ignored otherwise.
    pub cutoff: usize,
    /// Fixed displacement for `coherent`/`cat`. `None` draws `a + ib` with
    /// `a, b` uniform on `[0, 1)` per trial.
    pub alpha: Option<C64>,
}

impl EnvSpec {
    pub fn haar_qubit() -> Self {
        Self { family: EnvFamily::HaarQubit, dim: 2, n: 0, cutoff: 0, alpha: None }
    }

    pub fn random_qudit(dim: usize) -> Self {
        Self { family: EnvFamily::RandomQudit, dim, n: 0, cutoff: 0, alpha: None }
    }

    pub fn coherent(cutoff: usize) -> Self {
        Self { family: EnvFamily::Coherent, dim: cutoff + 1, n: 0, cutoff, alpha: None }
    }

    pub fn cat(cutoff: usize) -> Self {
        Self { family: EnvFamily::Cat, dim: cutoff + 1, n: 0, cutoff, alpha: None }
    }

    pub fn zero_n(n: usize, dim: usize) -> Self {
        Self { family: EnvFamily::ZeroN, dim, n, cutoff: 0, alpha: None }
    }

    pub fn with_alpha(mut self, alpha: C64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.dim < 2 {
            return Err(Error::InvalidDimension(self.dim));
        }
        match self.family {
            EnvFamily::HaarQubit if self.dim != 2 => bad(format!("haar_qubit needs dim 2, got {}", self.dim)),
            EnvFamily::ZeroN if self.n == 0 || self.n >= self.dim => {
                bad(format!("zero_n needs 0 < n < dim, got n = {} with dim = {}", self.n, self.dim))
            }
            EnvFamily::Coherent | EnvFamily::Cat if self.cutoff < 1 => {
                bad(format!("{} needs cutoff >= 1", self.family))
            }
            EnvFamily::Coherent | EnvFamily::Cat if self.dim != self.cutoff + 1 => bad(format!(
                "{} needs dim = cutoff + 1 = {}, got {}",
                self.family,
                self.cutoff + 1,
                self.dim
            )),
            EnvFamily::Cat if self.alpha.is_some_and(|a| a.norm() == 0.0) => {
                bad("cat needs |alpha| > 0".into())
            }
            _ if self.alpha.is_some_and(|a| !a.re.is_finite() || !a.im.is_finite()) => {
                bad("alpha must be finite".into())
            }
            _ => Ok(()),
        }
    }

    /// Draws one environment state.
    pub fn sample(&self, rng: &mut RngStream) -> Result<StateVector> {
        self.validate()?;
        match self.family {
            EnvFamily::HaarQubit => Ok(haar_qubit(rng)),
            EnvFamily::RandomQudit => random_qudit(self.dim, rng),
            EnvFamily::ZeroN => zero_n(self.n, self.dim),
            EnvFamily::Coherent | EnvFamily::Cat => {
                let alpha = self.alpha.unwrap_or_else(|| sample_alpha(rng));
                let t = if self.family == EnvFamily::Coherent {
                    coherent(alpha, self.cutoff)?
                } else {
                    cat(alpha, self.cutoff)?
                };
                if t.tail_mass > MAX_TRUNCATION_TAIL {
                    return Err(Error::Environment(format!(
                        "alpha = {alpha}: truncation at n = {} discards {:.4} of the norm",
                        self.cutoff, t.tail_mass
                    )));
                }
                Ok(t.state)
            }
        }
    }
}

/// Uniform point on the Bloch sphere: `cos(theta)` uniform on `[-1, 1]`,
/// `phi` uniform on `[0, 2 pi)`. Consumes two draws in that order.
pub fn haar_qubit(rng: &mut RngStream) -> StateVector {
    let cos_theta = 1.0 - 2.0 * rng.next_f64();
    let phi = 2.0 * PI * rng.next_f64();
    haar_qubit_from(cos_theta, phi)
}

/// `cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>` given `cos(theta)`.
pub fn haar_qubit_from(cos_theta: f64, phi: f64) -> StateVector {
    let cos_half = (0.5 * (1.0 + cos_theta)).max(0.0).sqrt();
    let sin_half = (0.5 * (1.0 - cos_theta)).max(0.0).sqrt();
    StateVector::normalized(vec![C64::new(cos_half, 0.0), C64::from_polar(sin_half, phi)])
        .expect("two finite amplitudes with unit norm")
}

/// `sum_k c_k |k>` with `c_k = a_k + i b_k`, `a_k, b_k` uniform on `[0, 1)`,
/// drawn in the order `a_0, b_0, a_1, b_1, ...`, then normalized.
pub fn random_qudit(d: usize, rng: &mut RngStream) -> Result<StateVector> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    for _attempt in 0..2 {
        let amps: Vec<C64> = (0..d)
            .map(|_| {
                let a = rng.next_f64();
                let b = rng.next_f64();
                C64::new(a, b)
            })
            .collect();
        if amps.iter().any(|c| c.norm_sqr() > 0.0) {
            return StateVector::normalized(amps);
        }
    }
    Err(Error::Environment("random qudit draw was all zeros twice".into()))
}

/// `alpha = a + ib` with `a, b` uniform on `[0, 1)`.
pub fn sample_alpha(rng: &mut RngStream) -> C64 {
    let a = rng.next_f64();
    let b = rng.next_f64();
    C64::new(a, b)
}

/// A truncated Fock-space state and what the truncation cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Truncated {
    /// Renormalized state on levels `0..=cutoff`.
    pub state: StateVector,
    /// `1 - sum_{n <= cutoff} |<n|psi>|^2` before renormalization.
    pub tail_mass: f64,
    /// `|<cutoff|psi>|^2` before renormalization, the weight of the last kept level.
    pub edge_weight: f64,
}

/// `e^{-|alpha|^2/2} alpha^n / sqrt(n!)` for `n = 0..=cutoff`.
pub fn coherent_amplitudes(alpha: C64, cutoff: usize) -> Vec<C64> {
    let mut amps = Vec::with_capacity(cutoff + 1);
    let mut a = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    amps.push(a);
    for n in 1..=cutoff {
        a = a * alpha / (n as f64).sqrt();
        amps.push(a);
    }
    amps
}

/// Coherent state `|alpha>` truncated to `0..=cutoff` and renormalized.
pub fn coherent(alpha: C64, cutoff: usize) -> Result<Truncated> {
    if cutoff < 1 {
        return Err(Error::InvalidParameter("cutoff must be at least 1".into()));
    }
    if !alpha.re.is_finite() || !alpha.im.is_finite() {
        return Err(Error::InvalidParameter("alpha must be finite".into()));
    }
    let amps = coherent_amplitudes(alpha, cutoff);
    let kept: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    let edge_weight = amps[cutoff].norm_sqr();
    Ok(Truncated {
        state: StateVector::normalized(amps)?,
        tail_mass: (1.0 - kept).max(0.0),
        edge_weight,
    })
}

/// Cat state `(|alpha> + |-alpha>)/sqrt(N)` on `0..=cutoff`. `N` is taken
/// from the truncated vector itself. Odd levels are exactly zero.
pub fn cat(alpha: C64, cutoff: usize) -> Result<Truncated> {
    if alpha.norm() == 0.0 {
        return Err(Error::InvalidParameter("cat state needs |alpha| > 0".into()));
    }
    if cutoff < 1 {
        return Err(Error::InvalidParameter("cutoff must be at least 1".into()));
    }
    if !alpha.re.is_finite() || !alpha.im.is_finite() {
        return Err(Error::InvalidParameter("alpha must be finite".into()));
    }
    let amps = cat_amplitudes(alpha, cutoff);
    // Squared norm of the untruncated |alpha> + |-alpha>.
    let full_norm = 2.0 * (1.0 + (-2.0 * alpha.norm_sqr()).exp());
    let kept: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    let edge_weight = amps[cutoff].norm_sqr() / full_norm;
    Ok(Truncated {
        state: StateVector::normalized(amps)?,
        tail_mass: (1.0 - kept / full_norm).max(0.0),
        edge_weight,
    })
}

/// Unnormalized `|alpha> + |-alpha>` truncated to `0..=cutoff`.
pub fn cat_amplitudes(alpha: C64, cutoff: usize) -> Vec<C64> {
    coherent_amplitudes(alpha, cutoff)
        .into_iter()
        .enumerate()
        .map(|(n, a)| if n % 2 == 0 { a * 2.0 } else { C64::new(0.0, 0.0) })
        .collect()
}

/// `(|0> + |n>)/sqrt(2)` in dimension `d`.
pub fn zero_n(n: usize, d: usize) -> Result<StateVector> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if n == 0 || n >= d {
        return Err(Error::IndexOutOfRange { index: n, dim: d });
    }
    let mut amps = vec![C64::new(0.0, 0.0); d];
    amps[0] = C64::new(FRAC_1_SQRT_2, 0.0);
    amps[n] = C64::new(FRAC_1_SQRT_2, 0.0);
    StateVector::new(amps)
}
