//! `qadapt`: run learning-curve ensembles, reproduce the published figures,
//! and check the reduced simulator against the tripartite one.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use qadapt::envstates::{EnvFamily, EnvSpec, DEFAULT_CUTOFF};
use qadapt::figures::Figure;
use qadapt::harness::{
    run_ensemble, run_ensemble_with_trials, write_results, write_trials, AggregateResult, ExperimentConfig,
    OutputFormat, TrialCurve, DEFAULT_EPSILONS,
};
use qadapt::oracle::{run_verification, VerifyOptions};
use qadapt::protocol::FrameComposition;
use qadapt::C64;

#[derive(Parser, Debug)]
#[command(name = "qadapt", version, about = "Measurement-based quantum state adaptation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a custom ensemble.
    Run(RunArgs),
    /// Re-run one of the published experiments with its pinned parameters.
    Reproduce(ReproduceArgs),
    /// Check the reduced simulator against the full tripartite model.
    Verify(VerifyArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum EnvArg {
    HaarQubit,
    RandomQudit,
    Coherent,
    Cat,
    ZeroN,
}

impl From<EnvArg> for EnvFamily {
    fn from(e: EnvArg) -> Self {
        match e {
            EnvArg::HaarQubit => EnvFamily::HaarQubit,
            EnvArg::RandomQudit => EnvFamily::RandomQudit,
            EnvArg::Coherent => EnvFamily::Coherent,
            EnvArg::Cat => EnvFamily::Cat,
            EnvArg::ZeroN => EnvFamily::ZeroN,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum FigureArg {
    Fig3,
    Fig4,
    Fig5,
    Fig6a,
    Fig6b,
}

impl From<FigureArg> for Figure {
    fn from(f: FigureArg) -> Self {
        match f {
            FigureArg::Fig3 => Figure::Fig3,
            FigureArg::Fig4 => Figure::Fig4,
            FigureArg::Fig5 => Figure::Fig5,
            FigureArg::Fig6a => Figure::Fig6a,
            FigureArg::Fig6b => Figure::Fig6b,
        }
    }
}

/// Protocol and ensemble flags shared by `run` and `reproduce`.
#[derive(Args, Debug)]
struct EnsembleArgs {
    /// Reward ratio; repeat for several values. Default: 0.1 0.3 0.5 0.7 0.9.
    #[arg(long = "epsilon", value_name = "EPS")]
    epsilons: Vec<f64>,
    /// Trials per epsilon.
    #[arg(long, default_value_t = 2000)]
    trials: usize,
    /// Initial exploration range.
    #[arg(long, default_value_t = 4.0 * PI)]
    delta_init: f64,
    /// Upper clamp on the exploration range.
    #[arg(long, default_value_t = 4.0 * PI)]
    delta_max: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads; 0 uses every core.
    #[arg(long, env = "QRL_THREADS", default_value_t = 0)]
    threads: usize,
    /// Also write every trial's curve to `<stem>.trials.csv`.
    #[arg(long)]
    dump_trials: bool,
    /// Replace existing output files.
    #[arg(long)]
    force: bool,
}

impl EnsembleArgs {
    fn apply(&self, config: &mut ExperimentConfig) {
        config.epsilons = if self.epsilons.is_empty() { DEFAULT_EPSILONS.to_vec() } else { self.epsilons.clone() };
        config.n_trials = self.trials;
        config.delta_init = self.delta_init;
        config.delta_max = self.delta_max;
        config.master_seed = self.seed;
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long, value_enum)]
    env: EnvArg,
    /// Hilbert-space dimension.
    #[arg(long)]
    dim: Option<usize>,
    /// Excited level for zero-n.
    #[arg(long)]
    n: Option<usize>,
    /// Fock cutoff for coherent and cat (default 10).
    #[arg(long)]
    cutoff: Option<usize>,
    /// Fix Re(alpha) instead of drawing it per trial.
    #[arg(long, allow_hyphen_values = true)]
    alpha_re: Option<f64>,
    /// Fix Im(alpha) instead of drawing it per trial.
    #[arg(long, allow_hyphen_values = true)]
    alpha_im: Option<f64>,
    #[arg(long, default_value_t = 100)]
    iterations: usize,
    /// Output file; defaults to `<env>.<format>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format; inferred from the `--out` extension when omitted.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[command(flatten)]
    ensemble: EnsembleArgs,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    #[arg(value_enum)]
    figure: FigureArg,
    /// Override the pinned iteration count.
    #[arg(long)]
    iterations: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[command(flatten)]
    ensemble: EnsembleArgs,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Random cases per check.
    #[arg(long, default_value_t = 50)]
    seeds: usize,
    #[arg(long, default_value_t = 0x5EED)]
    seed: u64,
    /// Iterations per full-trial comparison.
    #[arg(long, default_value_t = 40)]
    iterations: usize,
    /// Compose rotations on the wrong side of the frame.
    #[arg(long, hide = true)]
    inject_frame_bug: bool,
}

/// Exits 2 with the usage text of `sub`.
fn usage_error(sub: &str, msg: impl std::fmt::Display) -> ! {
    let mut cmd = Cli::command();
    let sub = cmd.find_subcommand_mut(sub).expect("known subcommand").clone();
    let name = format!("qadapt {}", sub.get_name());
    sub.bin_name(name).error(ErrorKind::ArgumentConflict, msg).exit()
}

fn env_spec(args: &RunArgs) -> Result<EnvSpec, String> {
    let family = EnvFamily::from(args.env);
    if args.n.is_some() && family != EnvFamily::ZeroN {
        return Err("--n is only valid with --env zero-n".into());
    }
    let has_alpha = args.alpha_re.is_some() || args.alpha_im.is_some();
    if !family.is_fock() && (args.cutoff.is_some() || has_alpha) {
        return Err("--cutoff and --alpha-* are only valid with --env coherent or cat".into());
    }
    let spec = match family {
        EnvFamily::HaarQubit => match args.dim {
            None | Some(2) => EnvSpec::haar_qubit(),
            Some(d) => return Err(format!("haar-qubit is two-dimensional, got --dim {d}")),
        },
        EnvFamily::RandomQudit => {
            EnvSpec::random_qudit(args.dim.ok_or("random-qudit needs --dim")?)
        }
        EnvFamily::ZeroN => {
            let n = args.n.ok_or("zero-n needs --n")?;
            EnvSpec::zero_n(n, args.dim.unwrap_or(n + 1))
        }
        EnvFamily::Coherent | EnvFamily::Cat => {
            let cutoff = args.cutoff.unwrap_or(DEFAULT_CUTOFF);
            if let Some(d) = args.dim {
                if d != cutoff + 1 {
                    return Err(format!("--dim {d} must equal cutoff + 1 = {} (set --cutoff to change it)", cutoff + 1));
                }
            }
            let base = if family == EnvFamily::Coherent { EnvSpec::coherent(cutoff) } else { EnvSpec::cat(cutoff) };
            if has_alpha {
                base.with_alpha(C64::new(args.alpha_re.unwrap_or(0.0), args.alpha_im.unwrap_or(0.0)))
            } else {
                base
            }
        }
    };
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}

fn refuse_existing(paths: &[PathBuf], force: bool) -> Result<(), String> {
    if force {
        return Ok(());
    }
    match paths.iter().find(|p| p.exists()) {
        Some(p) => Err(format!("{} exists; pass --force to overwrite", p.display())),
        None => Ok(()),
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn execute(config: &ExperimentConfig, threads: usize, dump: bool) -> Result<(AggregateResult, Vec<TrialCurve>), String> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
    pool.install(|| if dump { run_ensemble_with_trials(config) } else { run_ensemble(config).map(|r| (r, Vec::new())) })
        .map_err(|e| e.to_string())
}

fn summarize(result: &AggregateResult) {
    let last = result.config.n_iters;
    let (e, f) = result.best_at(last);
    eprintln!(
        "{}: {} trials x {} epsilons, best mean fidelity at iteration {last}: {f:.4} (epsilon = {})",
        result.config.label,
        result.config.n_trials,
        result.config.epsilons.len(),
        result.config.epsilons[e]
    );
}

fn cmd_run(args: RunArgs) -> ExitCode {
    let spec = env_spec(&args).unwrap_or_else(|msg| usage_error("run", msg));
    let family = EnvFamily::from(args.env);
    let mut config = ExperimentConfig::new(family.as_str(), spec, args.ensemble.trials, args.iterations, 0);
    args.ensemble.apply(&mut config);
    if let Err(e) = config.validate() {
        usage_error("run", e);
    }
    let format = match (args.format, &args.out) {
        (Some(f), _) => OutputFormat::from(f),
        (None, Some(p)) => OutputFormat::from_path(p).unwrap_or(OutputFormat::Csv),
        (None, None) => OutputFormat::Csv,
    };
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from(format!("{}.{}", family.as_str(), format.extension())));
    let meta = with_suffix(&out, ".meta.json");
    let trials = with_suffix(&out, ".trials.csv");
    let mut targets = vec![out.clone()];
    if format == OutputFormat::Csv {
        targets.push(meta.clone());
    }
    if args.ensemble.dump_trials {
        targets.push(trials.clone());
    }
    if let Err(msg) = refuse_existing(&targets, args.ensemble.force) {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    let (result, curves) = match execute(&config, args.ensemble.threads, args.ensemble.dump_trials) {
        Ok(r) => r,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    let written = (|| -> qadapt::Result<()> {
        write_results(&result, &out, format)?;
        if format == OutputFormat::Csv {
            let text = serde_json::json!({
                "config": result.config,
                "metadata": result.metadata,
            });
            fs::write(&meta, serde_json::to_string_pretty(&text).expect("serializable"))
                .map_err(|source| qadapt::Error::Io { path: meta.clone(), source })?;
        }
        if args.ensemble.dump_trials {
            write_trials(&result.config, &curves, &trials)?;
        }
        Ok(())
    })();
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    summarize(&result);
    ExitCode::SUCCESS
}

fn cmd_reproduce(args: ReproduceArgs) -> ExitCode {
    let figure = Figure::from(args.figure);
    let mut config = figure.config(args.ensemble.seed, None);
    args.ensemble.apply(&mut config);
    if let Some(n) = args.iterations {
        config.n_iters = n;
    }
    if let Err(e) = config.validate() {
        usage_error("reproduce", e);
    }
    let csv = args.out.join(format!("{figure}.csv"));
    let json = args.out.join(format!("{figure}.json"));
    let trials = args.out.join(format!("{figure}.trials.csv"));
    let mut targets = vec![csv.clone(), json.clone()];
    if args.ensemble.dump_trials {
        targets.push(trials.clone());
    }
    if let Err(msg) = refuse_existing(&targets, args.ensemble.force) {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    if let Err(e) = fs::create_dir_all(&args.out) {
        eprintln!("error: {}: {e}", args.out.display());
        return ExitCode::from(1);
    }
    let (result, curves) = match execute(&config, args.ensemble.threads, args.ensemble.dump_trials) {
        Ok(r) => r,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    let written = write_results(&result, &csv, OutputFormat::Csv)
        .and_then(|_| write_results(&result, &json, OutputFormat::Json))
        .and_then(|_| if args.ensemble.dump_trials { write_trials(&result.config, &curves, &trials) } else { Ok(()) });
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    summarize(&result);
    ExitCode::SUCCESS
}

fn cmd_verify(args: VerifyArgs) -> ExitCode {
    if args.seeds == 0 || args.iterations == 0 {
        usage_error("verify", "--seeds and --iterations must be at least 1");
    }
    let opts = VerifyOptions {
        cases: args.seeds,
        seed: args.seed,
        iterations: args.iterations,
        composition: if args.inject_frame_bug { FrameComposition::Left } else { FrameComposition::Right },
    };
    let checks = run_verification(&opts);
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in &checks {
        println!("{:<width$}  {}  {}", c.name, if c.passed { "PASS" } else { "FAIL" }, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed == 0 {
        println!("all {} checks passed", checks.len());
        ExitCode::SUCCESS
    } else {
        println!("{failed} of {} checks failed", checks.len());
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(a) => cmd_run(a),
        Command::Reproduce(a) => cmd_reproduce(a),
        Command::Verify(a) => cmd_verify(a),
    }
}
