//! Pinned configurations of the published learning-curve experiments.

use std::fmt;
use std::str::FromStr;

use crate::envstates::{EnvSpec, DEFAULT_CUTOFF};
use crate::error::{Error, Result};
use crate::harness::ExperimentConfig;

/// Trials per epsilon in every published ensemble.
pub const PUBLISHED_TRIALS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Figure {
    /// Haar-random qubits, 100 iterations.
    Fig3,
    /// Random `d = 11` qudits, 400 iterations.
    Fig4,
    /// Coherent states with `alpha = a + ib`, `a, b` in `[0, 1)`, 100 iterations.
    Fig5,
    /// Cat states, same `alpha` ensemble, 100 iterations.
    Fig6a,
    /// `(|0> + |10>)/sqrt(2)` in `d = 11`, 100 iterations.
    Fig6b,
}

impl Figure {
    pub const ALL: [Figure; 5] = [Figure::Fig3, Figure::Fig4, Figure::Fig5, Figure::Fig6a, Figure::Fig6b];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig6a => "fig6a",
            Figure::Fig6b => "fig6b",
        }
    }

    pub fn iterations(self) -> usize {
        match self {
            Figure::Fig4 => 400,
            _ => 100,
        }
    }

    pub fn env_spec(self) -> EnvSpec {
        match self {
            Figure::Fig3 => EnvSpec::haar_qubit(),
            Figure::Fig4 => EnvSpec::random_qudit(11),
            Figure::Fig5 => EnvSpec::coherent(DEFAULT_CUTOFF),
            Figure::Fig6a => EnvSpec::cat(DEFAULT_CUTOFF),
            Figure::Fig6b => EnvSpec::zero_n(10, 11),
        }
    }

    /// The published configuration; `trials` overrides the ensemble size.
    pub fn config(self, master_seed: u64, trials: Option<usize>) -> ExperimentConfig {
        ExperimentConfig::new(
            self.name(),
            self.env_spec(),
            trials.unwrap_or(PUBLISHED_TRIALS),
            self.iterations(),
            master_seed,
        )
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Figure::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown figure {s:?}")))
    }
}
