//! Seeded ensembles over epsilon grids, per-iteration aggregation, and the
//! CSV/JSON result formats.
//!
//! Trial `t` of epsilon index `e` owns the stream seeded with
//! [`derive_trial_seed`]`(master_seed, e, t)`. Its environment is drawn from
//! fork 0 of that stream and the protocol runs on fork 1. Trials run in
//! parallel but are reduced in index order, so every emitted number is
//! independent of the thread count.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envstates::{EnvFamily, EnvSpec};
use crate::error::{Error, Result};
use crate::protocol::{run_trial, RewardParams, DEFAULT_DELTA};
use crate::rng::{mix64, RngStream};

pub const DEFAULT_EPSILONS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

/// Exact header of the aggregate CSV.
pub const CSV_HEADER: [&str; 11] = [
    "experiment",
    "env_family",
    "dim",
    "epsilon",
    "iteration",
    "mean_fidelity",
    "std_fidelity",
    "mean_delta",
    "mean_log_delta",
    "n_trials",
    "master_seed",
];

const ENV_FORK: u64 = 0;
const PROTOCOL_FORK: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub env_spec: EnvSpec,
    pub epsilons: Vec<f64>,
    pub n_trials: usize,
    pub n_iters: usize,
    pub delta_init: f64,
    pub delta_max: f64,
    pub master_seed: u64,
    pub label: String,
}

impl ExperimentConfig {
    /// Default epsilon grid and `4 pi` exploration range.
    pub fn new(label: impl Into<String>, env_spec: EnvSpec, n_trials: usize, n_iters: usize, master_seed: u64) -> Self {
        Self {
            env_spec,
            epsilons: DEFAULT_EPSILONS.to_vec(),
            n_trials,
            n_iters,
            delta_init: DEFAULT_DELTA,
            delta_max: DEFAULT_DELTA,
            master_seed,
            label: label.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if self.n_trials == 0 {
            return bad("n_trials must be at least 1");
        }
        if self.n_trials > u32::MAX as usize {
            return bad("n_trials must fit in 32 bits");
        }
        if self.n_iters == 0 {
            return bad("n_iters must be at least 1");
        }
        if self.epsilons.is_empty() {
            return bad("at least one epsilon is required");
        }
        for &eps in &self.epsilons {
            RewardParams::new(eps, self.delta_init, self.delta_max)?;
        }
        self.env_spec.validate()
    }

    pub fn params(&self, epsilon_index: usize) -> Result<RewardParams> {
        RewardParams::new(self.epsilons[epsilon_index], self.delta_init, self.delta_max)
    }
}

/// Seed of trial `trial_index` under `epsilon_index`: `mix64(mix64(master) ^ key)`
/// with `key = epsilon_index << 32 | trial_index`. Both mixing steps are
/// bijections, so seeds are distinct for distinct index pairs below `2^32`.
pub fn derive_trial_seed(master_seed: u64, epsilon_index: usize, trial_index: usize) -> u64 {
    debug_assert!(epsilon_index <= u32::MAX as usize && trial_index <= u32::MAX as usize);
    let key = ((epsilon_index as u64) << 32) | (trial_index as u64 & 0xFFFF_FFFF);
    mix64(mix64(master_seed) ^ key)
}

/// One row of the aggregate series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub experiment: String,
    pub env_family: String,
    pub dim: usize,
    pub epsilon: f64,
    pub iteration: usize,
    pub mean_fidelity: f64,
    pub std_fidelity: f64,
    pub mean_delta: f64,
    pub mean_log_delta: f64,
    pub n_trials: usize,
    pub master_seed: u64,
}

impl SeriesRow {
    /// Same row with every float rounded to 12 significant digits.
    fn rounded(&self) -> Self {
        Self {
            epsilon: round_sig12(self.epsilon),
            mean_fidelity: round_sig12(self.mean_fidelity),
            std_fidelity: round_sig12(self.std_fidelity),
            mean_delta: round_sig12(self.mean_delta),
            mean_log_delta: round_sig12(self.mean_log_delta),
            ..self.clone()
        }
    }

    /// Largest absolute difference over the numeric columns, or infinity if a
    /// key column differs.
    pub fn max_abs_diff(&self, other: &SeriesRow) -> f64 {
        if self.experiment != other.experiment
            || self.env_family != other.env_family
            || self.dim != other.dim
            || self.iteration != other.iteration
            || self.n_trials != other.n_trials
            || self.master_seed != other.master_seed
        {
            return f64::INFINITY;
        }
        [
            (self.epsilon, other.epsilon),
            (self.mean_fidelity, other.mean_fidelity),
            (self.std_fidelity, other.std_fidelity),
            (self.mean_delta, other.mean_delta),
            (self.mean_log_delta, other.mean_log_delta),
        ]
        .iter()
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub generator: String,
    pub version: String,
    pub seed_scheme: String,
    pub notes: Vec<String>,
    /// `trial_seeds[e][t]` for epsilon index `e`, trial `t`.
    pub trial_seeds: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateResult {
    pub config: ExperimentConfig,
    pub metadata: Metadata,
    /// Rows ordered by epsilon index, then iteration `0..=n_iters`.
    pub series: Vec<SeriesRow>,
    /// `median_fidelity[e][k]`; not written to the CSV.
    pub median_fidelity: Vec<Vec<f64>>,
}

impl AggregateResult {
    pub fn row(&self, epsilon_index: usize, iteration: usize) -> &SeriesRow {
        &self.series[epsilon_index * (self.config.n_iters + 1) + iteration]
    }

    pub fn rows_for(&self, epsilon_index: usize) -> &[SeriesRow] {
        let len = self.config.n_iters + 1;
        &self.series[epsilon_index * len..(epsilon_index + 1) * len]
    }

    /// `(epsilon index, mean fidelity)` of the best epsilon at `iteration`.
    pub fn best_at(&self, iteration: usize) -> (usize, f64) {
        (0..self.config.epsilons.len())
            .map(|e| (e, self.row(e, iteration).mean_fidelity))
            .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
    }

    pub fn epsilon_index(&self, epsilon: f64) -> Option<usize> {
        self.config.epsilons.iter().position(|&e| (e - epsilon).abs() < 1e-12)
    }
}

/// Per-iteration curves of a single trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialCurve {
    pub epsilon_index: usize,
    pub trial: usize,
    pub seed: u64,
    /// Outcome of iteration `k` at index `k - 1`.
    pub outcomes: Vec<usize>,
    /// Fidelity at iterations `0..=n_iters`.
    pub fidelity: Vec<f64>,
    pub delta: Vec<f64>,
    pub log_delta: Vec<f64>,
}

fn run_one(config: &ExperimentConfig, epsilon_index: usize, trial: usize) -> Result<TrialCurve> {
    let seed = derive_trial_seed(config.master_seed, epsilon_index, trial);
    let root = RngStream::new(seed);
    let wrap = |e: Error| Error::Trial { epsilon_index, trial, source: Box::new(e) };
    let env = config.env_spec.sample(&mut root.fork(ENV_FORK)).map_err(wrap)?;
    let params = config.params(epsilon_index)?;
    let result = run_trial(&env, &params, config.n_iters, root.fork_seed(PROTOCOL_FORK)).map_err(wrap)?;
    Ok(TrialCurve {
        epsilon_index,
        trial,
        seed,
        outcomes: result.records.iter().map(|r| r.outcome).collect(),
        fidelity: result.fidelity_curve(),
        delta: result.delta_curve(),
        log_delta: result.log_delta_curve(),
    })
}

fn reduce(config: &ExperimentConfig, epsilon_index: usize, curves: &[TrialCurve]) -> (Vec<SeriesRow>, Vec<f64>) {
    let n = curves.len() as f64;
    let mut rows = Vec::with_capacity(config.n_iters + 1);
    let mut medians = Vec::with_capacity(config.n_iters + 1);
    let mut column = Vec::with_capacity(curves.len());
    for k in 0..=config.n_iters {
        column.clear();
        column.extend(curves.iter().map(|c| c.fidelity[k]));
        let mean = column.iter().sum::<f64>() / n;
        let var = column.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / n;
        let mean_delta = curves.iter().map(|c| c.delta[k]).sum::<f64>() / n;
        let mean_log_delta = curves.iter().map(|c| c.log_delta[k]).sum::<f64>() / n;
        column.sort_by(f64::total_cmp);
        let mid = column.len() / 2;
        let median = if column.len() % 2 == 1 { column[mid] } else { 0.5 * (column[mid - 1] + column[mid]) };
        medians.push(median);
        rows.push(SeriesRow {
            experiment: config.label.clone(),
            env_family: config.env_spec.family.as_str().to_string(),
            dim: config.env_spec.dim,
            epsilon: config.epsilons[epsilon_index],
            iteration: k,
            mean_fidelity: mean.clamp(0.0, 1.0),
            std_fidelity: var.sqrt(),
            mean_delta,
            mean_log_delta,
            n_trials: curves.len(),
            master_seed: config.master_seed,
        });
    }
    (rows, medians)
}

fn notes_for(config: &ExperimentConfig) -> Vec<String> {
    let mut notes = vec![
        "fidelity at iteration 0 is the pre-protocol baseline".to_string(),
        "std_fidelity is the population standard deviation over trials".to_string(),
        "mean_log_delta is the mean of ln(delta); exp of it is the geometric mean".to_string(),
    ];
    match config.env_spec.family {
        EnvFamily::HaarQubit => notes.push("qubit environments are Haar-uniform on the Bloch sphere".into()),
        EnvFamily::Cat if config.env_spec.alpha.is_none() => notes.push(
            "cat-state alpha drawn as a + ib with a, b uniform on [0, 1), mirroring the coherent-state ensemble (assumed)"
                .into(),
        ),
        EnvFamily::Coherent | EnvFamily::Cat => notes.push(format!(
            "Fock space truncated at n = {} and renormalized",
            config.env_spec.cutoff
        )),
        _ => {}
    }
    notes
}

fn run_internal(config: &ExperimentConfig, keep_trials: bool) -> Result<(AggregateResult, Vec<TrialCurve>)> {
    config.validate()?;
    let mut series = Vec::with_capacity(config.epsilons.len() * (config.n_iters + 1));
    let mut medians = Vec::with_capacity(config.epsilons.len());
    let mut seeds = Vec::with_capacity(config.epsilons.len());
    let mut kept = Vec::new();
    for e in 0..config.epsilons.len() {
        let curves = (0..config.n_trials)
            .into_par_iter()
            .map(|t| run_one(config, e, t))
            .collect::<Result<Vec<_>>>()?;
        let (rows, med) = reduce(config, e, &curves);
        series.extend(rows);
        medians.push(med);
        seeds.push(curves.iter().map(|c| c.seed).collect());
        if keep_trials {
            kept.extend(curves);
        }
    }
    let metadata = Metadata {
        generator: "qadapt".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed_scheme: "trial seed = mix64(mix64(master_seed) ^ (epsilon_index << 32 | trial)); \
                      environment from fork 0, protocol from fork 1 (SplitMix64 streams)"
            .into(),
        notes: notes_for(config),
        trial_seeds: seeds,
    };
    Ok((
        AggregateResult { config: config.clone(), metadata, series, median_fidelity: medians },
        kept,
    ))
}

pub fn run_ensemble(config: &ExperimentConfig) -> Result<AggregateResult> {
    Ok(run_internal(config, false)?.0)
}

/// [`run_ensemble`], also returning every trial's curves.
pub fn run_ensemble_with_trials(config: &ExperimentConfig) -> Result<(AggregateResult, Vec<TrialCurve>)> {
    run_internal(config, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        path.extension().and_then(|e| e.to_str()).and_then(|e| e.parse().ok())
    }

    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::InvalidParameter(format!("unknown format {other:?}"))),
        }
    }
}

/// Rounds to 12 significant decimal digits.
pub fn round_sig12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Formats `x` with at most 12 significant digits, in positional notation
/// where that stays short and exponent notation otherwise.
pub fn format_number(x: f64) -> String {
    let r = round_sig12(x);
    if r == 0.0 {
        "0".to_string()
    } else if r.is_finite() && (1e-5..1e15).contains(&r.abs()) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

/// Aggregate rows as CSV text.
pub fn to_csv(result: &AggregateResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(|e| Error::Parse(e.to_string()))?;
    for row in &result.series {
        w.write_record([
            row.experiment.clone(),
            row.env_family.clone(),
            row.dim.to_string(),
            format_number(row.epsilon),
            row.iteration.to_string(),
            format_number(row.mean_fidelity),
            format_number(row.std_fidelity),
            format_number(row.mean_delta),
            format_number(row.mean_log_delta),
            row.n_trials.to_string(),
            row.master_seed.to_string(),
        ])
        .map_err(|e| Error::Parse(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

/// What a JSON results file holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub config: ExperimentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<Metadata>,
    pub series: Vec<SeriesRow>,
}

pub fn to_json(result: &AggregateResult) -> Result<String> {
    let mut config = result.config.clone();
    config.epsilons = config.epsilons.iter().map(|&e| round_sig12(e)).collect();
    let file = ResultsFile {
        config,
        metadata: Some(result.metadata.clone()),
        series: result.series.iter().map(SeriesRow::rounded).collect(),
    };
    serde_json::to_string_pretty(&file).map_err(|e| Error::Parse(e.to_string()))
}

/// Writes the aggregate in `format`. Existing files are replaced.
pub fn write_results(result: &AggregateResult, path: &Path, format: OutputFormat) -> Result<()> {
    result.config.validate()?;
    if result.series.len() != result.config.epsilons.len() * (result.config.n_iters + 1) {
        return Err(Error::InvalidParameter("series length does not match the configuration".into()));
    }
    let text = match format {
        OutputFormat::Csv => to_csv(result)?,
        OutputFormat::Json => to_json(result)?,
    };
    let mut f = BufWriter::new(File::create(path).map_err(io_err(path))?);
    f.write_all(text.as_bytes()).map_err(io_err(path))?;
    f.flush().map_err(io_err(path))
}

/// Parses an aggregate CSV, requiring the exact header.
pub fn parse_csv(text: &str) -> Result<Vec<SeriesRow>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| Error::Parse(e.to_string()))?;
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Parse(format!(
            "unexpected header {:?}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.deserialize::<SeriesRow>().enumerate() {
        rows.push(rec.map_err(|e| Error::Parse(format!("row {}: {e}", i + 2)))?);
    }
    Ok(rows)
}

pub fn parse_json(text: &str) -> Result<ResultsFile> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

/// Reads back the series of a results file written by [`write_results`].
pub fn read_results(path: &Path, format: OutputFormat) -> Result<Vec<SeriesRow>> {
    let mut text = String::new();
    File::open(path).and_then(|mut f| f.read_to_string(&mut text)).map_err(io_err(path))?;
    match format {
        OutputFormat::Csv => parse_csv(&text),
        OutputFormat::Json => Ok(parse_json(&text)?.series),
    }
}

/// Header of the per-trial dump.
pub const TRIAL_CSV_HEADER: [&str; 9] =
    ["experiment", "epsilon", "trial", "seed", "iteration", "outcome", "fidelity", "delta", "log_delta"];

/// Writes one row per (trial, iteration).
pub fn write_trials(config: &ExperimentConfig, trials: &[TrialCurve], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let csv_err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(TRIAL_CSV_HEADER).map_err(csv_err)?;
    for t in trials {
        for k in 0..t.fidelity.len() {
            let outcome = if k == 0 { String::new() } else { t.outcomes[k - 1].to_string() };
            w.write_record([
                config.label.clone(),
                format_number(config.epsilons[t.epsilon_index]),
                t.trial.to_string(),
                t.seed.to_string(),
                k.to_string(),
                outcome,
                format_number(t.fidelity[k]),
                format_number(t.delta[k]),
                format_number(t.log_delta[k]),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(io_err(path))
}
