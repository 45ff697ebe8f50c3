//! Simulation of measurement-based adaptation of an agent qudit towards an
//! unknown environment state, plus the ensemble harness that reproduces the
//! mean-fidelity learning curves.
//!
//! * [`qstate`]: state vectors, unitaries, Born-rule sampling and gates.
//! * [`protocol`]: the measurement/reward/rotation loop for one trial.
//! * [`envstates`]: environment families (Haar qubits, random qudits,
//!   coherent, cat and `|0> + |n>` states).
//! * [`harness`]: seeded ensembles over epsilon grids and result files.
//! * [`figures`]: the pinned experiment configurations.
//! * [`oracle`]: brute-force references used for verification.

pub mod envstates;
pub mod figures;
pub mod harness;
pub mod error;
pub mod oracle;
pub mod protocol;
pub mod qstate;
pub mod rng;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
