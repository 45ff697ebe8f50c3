//! Prints the mean learning curve of a small Haar-qubit ensemble.
//!
//! cargo run --release -p qadapt --example qubit_curve

use qadapt::envstates::EnvSpec;
use qadapt::harness::ExperimentConfig;

fn main() -> qadapt::Result<()> {
    let mut config = ExperimentConfig::new("qubit", EnvSpec::haar_qubit(), 500, 60, 42);
    config.epsilons = vec![0.1, 0.7];
    let result = qadapt::harness::run_ensemble(&config)?;
    println!("{:>5} {:>10} {:>10}", "iter", "eps=0.1", "eps=0.7");
    for k in (0..=config.n_iters).step_by(5) {
        println!("{k:>5} {:>10.4} {:>10.4}", result.row(0, k).mean_fidelity, result.row(1, k).mean_fidelity);
    }
    Ok(())
}
