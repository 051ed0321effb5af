//! The `probrep` command line.
//!
//! Each command is a pure function of its parsed arguments and input files
//! that returns the bytes of every artifact it produces. Every artifact embeds
//! a [`RunManifest`]; `replay` parses the manifest, runs the command again and
//! compares bytes.
//!
//! Exit codes: 0 success, 1 input or validation error, 2 numerical or
//! certification failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::Path;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::born::{
    classicality_report, povm_to_cond, random_rank1_reference, state_to_prob,
    urgleichung_general, urgleichung_sic, ReferenceMeasurement,
};
use crate::correlations::{
    chsh_value, correlation_table, joint_table, no_signalling_check, phi_plus, singlet,
    spin32_embedding, steering_ensembles, CorrelationTable, MeasurementFamily, QubitAxis,
    SteeringReport, CANONICAL_CHSH_AZIMUTHS,
};
use crate::error::Error;
use crate::frequency::{
    binomial_interval_prob, data_table_sim, sample_outcomes, DataTable, OutcomeCounts,
    SamplingMode,
};
use crate::json::{
    matrix_to_rows, parse_povm, parse_reference, parse_state, FiducialFile, MatrixRows,
    StateFile,
};
use crate::operator::{
    born_probabilities, derive_seed, random_density, random_povm, HilbertDim, Ket, Povm,
    ProbVector,
};
use crate::wh::{known_fiducial, sic_search_with, SearchOptions, DEFAULT_CERTIFY_TOL};

/// Version of the artifact layout.
pub const ARTIFACT_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

const CSV_MANIFEST_PREFIX: &str = "# manifest: ";
const STDOUT: &str = "-";

/// Restarts used when a command needs a SIC outside the registry.
const SIC_RESTARTS: usize = 100;

const RHO_STREAM: u64 = 0x52484f;
const POVM_STREAM: u64 = 0x504f564d;

/// Entry-wise bound, in binomial standard errors, for simulated tables.
const SIGMA_BOUND: f64 = 5.0;

/// Marginal agreement required by `steer`.
const MARGINAL_TOL: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(name = "probrep", version, about = "Probability-only quantum mechanics experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search for a Weyl-Heisenberg SIC fiducial.
    SicSearch(SicSearchArgs),
    /// Compare the probability-only rule with the Born rule on random inputs.
    BornCheck(BornCheckArgs),
    /// Quantum prediction against the law of total probability.
    ClassicalGap(ClassicalGapArgs),
    /// Two-qubit correlation table, CHSH value and optional sampling.
    Bell(BellArgs),
    /// Conditioned ensembles of the second system for two bases on the first.
    Steer(SteerArgs),
    /// Sample outcome counts from a probability vector.
    Simulate(SimulateArgs),
    /// Exact binomial probability of an interval.
    Interval(IntervalArgs),
    /// Re-run the command recorded in an artifact and compare bytes.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SicSearchArgs {
    #[arg(long)]
    pub dim: usize,
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long, default_value_t = DEFAULT_CERTIFY_TOL)]
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceKind {
    Sic,
    Random,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BornCheckArgs {
    #[arg(long)]
    pub dim: usize,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ReferenceKind::Sic)]
    pub reference: ReferenceKind,
    /// Report file; stdout when absent.
    #[arg(long)]
    pub report: Option<String>,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ClassicalGapArgs {
    /// Ket or operator JSON file.
    #[arg(long)]
    pub state: String,
    /// POVM JSON file.
    #[arg(long)]
    pub povm: String,
    /// `sic` or a reference JSON file.
    #[arg(long, default_value = "sic")]
    pub reference: String,
    /// Seed for the SIC search when the dimension is not in the registry.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BellArgs {
    /// `phi+`, `singlet` or a two-qubit ket file.
    #[arg(long, default_value = "singlet")]
    pub state: String,
    /// Axes `A1,A2,...,B1,B2,...` (even count, split in half) or `A.../B...`.
    /// An axis is `x`, `y`, `z` or an equatorial angle such as `0.3`, `pi/4`, `3pi/4`.
    #[arg(long, default_value = "0,pi/2,pi/4,3pi/4")]
    pub angles: String,
    #[arg(long)]
    pub chsh: bool,
    /// Also evaluate the table on one spin-3/2 system.
    #[arg(long)]
    pub spin32: bool,
    /// Trials per setting pair to sample.
    #[arg(long)]
    pub simulate: Option<u64>,
    #[arg(long, value_parser = parse_mode, default_value = "blocked")]
    pub mode: SamplingMode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON summary; stdout when absent.
    #[arg(long)]
    pub out: Option<String>,
    /// CSV of `p(x,y|a,b)`.
    #[arg(long)]
    pub table: Option<String>,
    /// CSV of simulated counts.
    #[arg(long)]
    pub counts: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SteerArgs {
    /// `phi+`, `singlet` or a ket file.
    #[arg(long, default_value = "phi+")]
    pub state: String,
    /// `x`, `y`, `z`, an angle, or a POVM file of rank-one projectors.
    #[arg(long, default_value = "z")]
    pub basis_a: String,
    #[arg(long, default_value = "x")]
    pub basis_b: String,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// JSON array of probabilities or `{"probs": [...]}`.
    #[arg(long)]
    pub probs: String,
    #[arg(long, default_value_t = 100)]
    pub n: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct IntervalArgs {
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub lo: u64,
    #[arg(long)]
    pub hi: u64,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// An artifact written by any other command.
    pub file: String,
    /// Write every regenerated artifact into this directory.
    #[arg(long)]
    pub out_dir: Option<String>,
}

fn parse_mode(s: &str) -> std::result::Result<SamplingMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Command name, parameters, seeds, input digests and output paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub artifact_version: u32,
    pub tool_version: String,
    pub params: Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

/// Failure of a command, split by exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Input(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NoConvergence { .. }
            | Error::IllConditionedReference { .. }
            | Error::SingularNormalizer { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// One file produced by a command; `path == "-"` means stdout.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub path: String,
    pub bytes: Vec<u8>,
}

/// Artifacts of a successful run, plus a non-zero status for results that
/// were produced but failed a numerical check.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub artifacts: Vec<Artifact>,
    pub status: i32,
    pub message: Option<String>,
}

/// Reads input files and records their digests.
#[derive(Default)]
struct Inputs {
    records: Vec<InputRecord>,
}

impl Inputs {
    fn read(&mut self, path: &str) -> CliResult<String> {
        let bytes = fs::read(path).map_err(|e| CliError::Input(format!("{path}: {e}")))?;
        self.records.push(InputRecord {
            path: path.to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        String::from_utf8(bytes).map_err(|e| CliError::Input(format!("{path}: {e}")))
    }
}

fn with_path(path: &str) -> impl Fn(Error) -> CliError + '_ {
    move |e| match CliError::from(e) {
        CliError::Input(m) => CliError::Input(format!("{path}: {m}")),
        other => other,
    }
}

fn out_path(p: &Option<String>) -> String {
    p.clone().unwrap_or_else(|| STDOUT.to_string())
}

fn manifest<P: Serialize>(
    command: &str,
    params: &P,
    seeds: Vec<u64>,
    inputs: &Inputs,
    outputs: Vec<String>,
) -> RunManifest {
    RunManifest {
        command: command.to_string(),
        artifact_version: ARTIFACT_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        params: serde_json::to_value(params).expect("arguments serialize"),
        seeds,
        inputs: inputs.records.clone(),
        outputs,
    }
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    manifest: &'a RunManifest,
    #[serde(flatten)]
    body: T,
}

fn json_artifact<T: Serialize>(path: String, m: &RunManifest, body: T) -> Artifact {
    let mut bytes = serde_json::to_vec_pretty(&Document { manifest: m, body })
        .expect("artifact serializes");
    bytes.push(b'\n');
    Artifact { path, bytes }
}

fn csv_artifact(
    path: String,
    m: &RunManifest,
    write: impl FnOnce(&mut Vec<u8>) -> crate::error::Result<()>,
) -> CliResult<Artifact> {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(CSV_MANIFEST_PREFIX.as_bytes());
    bytes.extend_from_slice(&serde_json::to_vec(m).expect("manifest serializes"));
    bytes.push(b'\n');
    write(&mut bytes)?;
    Ok(Artifact { path, bytes })
}

fn ok(artifacts: Vec<Artifact>) -> CliResult<RunOutput> {
    Ok(RunOutput {
        artifacts,
        status: EXIT_OK,
        message: None,
    })
}

fn dim(d: usize) -> CliResult<HilbertDim> {
    Ok(HilbertDim::new(d)?)
}

/// A certified SIC reference: the registry fiducial when there is one,
/// otherwise a search from `seed`.
fn sic_reference(dim: HilbertDim, seed: u64) -> CliResult<ReferenceMeasurement> {
    let fiducial = match known_fiducial(dim) {
        Some(k) => k,
        None => {
            let c = sic_search_with(dim, seed, SIC_RESTARTS, &SearchOptions::default())?;
            if !c.certify(DEFAULT_CERTIFY_TOL).passed {
                return Err(CliError::Numerical(format!(
                    "no certified SIC in dimension {dim}: max deviation {:.3e}",
                    c.max_sic_deviation
                )));
            }
            c.vector
        }
    };
    ReferenceMeasurement::sic(&fiducial, DEFAULT_CERTIFY_TOL)
        .map_err(|e| CliError::Numerical(e.to_string()))
}

pub fn cmd_sic_search(args: &SicSearchArgs) -> CliResult<RunOutput> {
    let d = dim(args.dim)?;
    if !(args.tol > 0.0) {
        return Err(CliError::Input(format!("tolerance must be positive, got {}", args.tol)));
    }
    let opts = SearchOptions {
        certify_tol: args.tol,
        ..SearchOptions::default()
    };
    let candidate = sic_search_with(d, args.seed, args.restarts, &opts)?;
    let file = FiducialFile::from_candidate(&candidate, args.tol);
    let path = out_path(&args.out);
    let m = manifest("sic-search", args, vec![args.seed], &Inputs::default(), vec![path.clone()]);
    let certified = file.certified;
    let deviation = file.max_sic_deviation;
    let artifacts = vec![json_artifact(path, &m, file)];
    if certified {
        ok(artifacts)
    } else {
        Ok(RunOutput {
            artifacts,
            status: EXIT_NUMERICAL,
            message: Some(format!(
                "search converged but max SIC deviation {deviation:.3e} >= {:.1e}",
                args.tol
            )),
        })
    }
}

#[derive(Serialize)]
struct BornCheckReport {
    dim: usize,
    trials: usize,
    reference: ReferenceKind,
    reference_condition_number: f64,
    max_deviation: f64,
    max_deviation_sic_form: Option<f64>,
    max_sic_form_vs_general: Option<f64>,
    tolerance: f64,
    passed: bool,
}

struct TrialDeviation {
    general: f64,
    sic: f64,
    sic_vs_general: f64,
}

fn max_diff(a: &ProbVector, b: &ProbVector) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn born_trial(
    reference: &ReferenceMeasurement,
    seed: u64,
    t: u64,
) -> crate::error::Result<TrialDeviation> {
    let d = reference.dim();
    let n = d.get();
    let rank = 1 + (t as usize % n);
    let outcomes = 2 + (t as usize % (n * n - 1));
    let rho = random_density(d, rank, derive_seed(seed, RHO_STREAM, t))?;
    let povm = random_povm(d, outcomes, derive_seed(seed, POVM_STREAM, t))?;
    let born = born_probabilities(&rho, &povm)?;
    let p = state_to_prob(reference, &rho)?;
    let r = povm_to_cond(reference, &povm)?;
    let general = urgleichung_general(reference, &p, &r)?;
    let (sic, sic_vs_general) = if reference.is_sic_certified() {
        let q = urgleichung_sic(d, &p, &r)?;
        (max_diff(&q, &born), max_diff(&q, &general))
    } else {
        (0.0, 0.0)
    };
    Ok(TrialDeviation {
        general: max_diff(&general, &born),
        sic,
        sic_vs_general,
    })
}

pub fn cmd_born_check(args: &BornCheckArgs) -> CliResult<RunOutput> {
    let d = dim(args.dim)?;
    if args.trials == 0 {
        return Err(CliError::Input("need at least one trial".into()));
    }
    let reference = match args.reference {
        ReferenceKind::Sic => sic_reference(d, args.seed)?,
        ReferenceKind::Random => random_rank1_reference(d, args.seed)?,
    };
    let deviations: Vec<TrialDeviation> = (0..args.trials as u64)
        .into_par_iter()
        .map(|t| born_trial(&reference, args.seed, t))
        .collect::<crate::error::Result<_>>()?;
    let fold = |f: fn(&TrialDeviation) -> f64| deviations.iter().map(f).fold(0.0, f64::max);
    let max_deviation = fold(|t| t.general);
    let sic = reference.is_sic_certified();
    let max_sic = fold(|t| t.sic);
    let passed = max_deviation < args.tol && (!sic || max_sic < args.tol);
    let report = BornCheckReport {
        dim: d.get(),
        trials: args.trials,
        reference: args.reference,
        reference_condition_number: reference.condition_number(),
        max_deviation,
        max_deviation_sic_form: sic.then_some(max_sic),
        max_sic_form_vs_general: sic.then(|| fold(|t| t.sic_vs_general)),
        tolerance: args.tol,
        passed,
    };
    let path = out_path(&args.report);
    let m = manifest("born-check", args, vec![args.seed], &Inputs::default(), vec![path.clone()]);
    Ok(RunOutput {
        artifacts: vec![json_artifact(path, &m, report)],
        status: if passed { EXIT_OK } else { EXIT_NUMERICAL },
        message: (!passed).then(|| format!("max deviation {max_deviation:.3e} >= {:.1e}", args.tol)),
    })
}

#[derive(Serialize)]
struct GapBody {
    gap: f64,
    q_quantum: Vec<f64>,
    q_classical: Vec<f64>,
    reference: String,
    reference_sic_certified: bool,
}

pub fn cmd_classical_gap(args: &ClassicalGapArgs) -> CliResult<RunOutput> {
    let mut inputs = Inputs::default();
    let state_text = inputs.read(&args.state)?;
    let rho = parse_state(&state_text).map_err(with_path(&args.state))?.density();
    let povm_text = inputs.read(&args.povm)?;
    let povm = parse_povm(&povm_text).map_err(with_path(&args.povm))?;
    let (reference, seeds) = if args.reference == "sic" {
        (sic_reference(rho.dim(), args.seed)?, vec![args.seed])
    } else {
        let text = inputs.read(&args.reference)?;
        (parse_reference(&text).map_err(with_path(&args.reference))?, vec![])
    };
    let report = classicality_report(&reference, &rho, &povm)?;
    let body = GapBody {
        gap: report.gap,
        q_quantum: report.q_quantum.into_inner(),
        q_classical: report.q_classical.into_inner(),
        reference: args.reference.clone(),
        reference_sic_certified: reference.is_sic_certified(),
    };
    let path = out_path(&args.out);
    let m = manifest("classical-gap", args, seeds, &inputs, vec![path.clone()]);
    ok(vec![json_artifact(path, &m, body)])
}

/// `x`, `y`, `z`, a number, or `[k]pi[/m]`.
pub fn parse_axis(s: &str) -> CliResult<QubitAxis> {
    let t = s.trim().to_ascii_lowercase();
    if let Some((coef, rest)) = t.split_once("pi") {
        let k = match coef {
            "" | "+" => 1.0,
            "-" => -1.0,
            c => c.parse::<f64>().map_err(|_| CliError::Input(format!("bad angle `{s}`")))?,
        };
        let m = match rest {
            "" => 1.0,
            r => r
                .strip_prefix('/')
                .and_then(|v| v.parse::<f64>().ok())
                .filter(|v| *v != 0.0)
                .ok_or_else(|| CliError::Input(format!("bad angle `{s}`")))?,
        };
        return Ok(QubitAxis::Equatorial(k * std::f64::consts::PI / m));
    }
    Ok(t.parse::<QubitAxis>()?)
}

fn axis_family(items: &[&str]) -> CliResult<MeasurementFamily> {
    if items.is_empty() {
        return Err(CliError::Input("each side needs at least one setting".into()));
    }
    let axes = items.iter().map(|s| parse_axis(s)).collect::<CliResult<Vec<_>>>()?;
    let povms = axes.iter().map(|a| a.povm()).collect();
    Ok(MeasurementFamily::new(
        items.iter().map(|s| s.trim().to_string()).collect(),
        povms,
    )?)
}

fn split_list(s: &str) -> Vec<&str> {
    s.split(',').filter(|p| !p.trim().is_empty()).collect()
}

fn parse_angles(text: &str) -> CliResult<(MeasurementFamily, MeasurementFamily)> {
    let (a, b) = match split_sides(text) {
        Some((a, b)) => (split_list(a), split_list(b)),
        None => halves(split_list(text))?,
    };
    Ok((axis_family(&a)?, axis_family(&b)?))
}

/// Splits `A.../B...` at the first `/` that is not part of an angle like `pi/4`.
fn split_sides(text: &str) -> Option<(&str, &str)> {
    text.char_indices()
        .filter(|(_, c)| *c == '/')
        .map(|(i, _)| i)
        .find(|&i| !text[..i].ends_with("pi"))
        .map(|i| (&text[..i], &text[i + 1..]))
}

fn halves(items: Vec<&str>) -> CliResult<(Vec<&str>, Vec<&str>)> {
    if items.is_empty() || items.len() % 2 != 0 {
        return Err(CliError::Input(format!(
            "--angles needs an even number of axes, got {}",
            items.len()
        )));
    }
    let (a, b) = items.split_at(items.len() / 2);
    Ok((a.to_vec(), b.to_vec()))
}

fn named_or_file_ket(name: &str, inputs: &mut Inputs) -> CliResult<Ket> {
    match name {
        "phi+" => Ok(phi_plus()),
        "singlet" => Ok(singlet()),
        path => {
            let text = inputs.read(path)?;
            match parse_state(&text).map_err(with_path(path))? {
                StateFile::Pure(k) => Ok(k),
                StateFile::Mixed(_) => Err(CliError::Input(format!(
                    "{path}: this command needs a ket file"
                ))),
            }
        }
    }
}

#[derive(Serialize)]
struct SimulationSummary {
    n_per_setting: u64,
    mode: SamplingMode,
    seed: u64,
    data: DataTable,
    empirical_chsh: Option<f64>,
    max_abs_deviation: f64,
    max_sigma: f64,
    within_binomial_bounds: bool,
}

#[derive(Serialize)]
struct BellBody {
    state: String,
    table: CorrelationTable,
    no_signalling: f64,
    chsh: Option<f64>,
    spin32_max_deviation: Option<f64>,
    simulation: Option<SimulationSummary>,
}

fn simulation_summary(
    table: &CorrelationTable,
    data: DataTable,
    chsh: bool,
) -> CliResult<SimulationSummary> {
    let empirical = data.empirical_table()?;
    let mut max_abs_deviation = 0.0f64;
    let mut max_sigma = 0.0f64;
    let mut within = true;
    for ((a, b, _, _, p), (_, _, _, _, f)) in table.entries().zip(empirical.entries()) {
        let n = data.counts[a][b].n_trials as f64;
        let sigma = (p * (1.0 - p) / n).sqrt();
        let dev = (f - p).abs();
        max_abs_deviation = max_abs_deviation.max(dev);
        if sigma > 0.0 {
            max_sigma = max_sigma.max(dev / sigma);
        }
        within &= dev <= SIGMA_BOUND * sigma + 1e-12;
    }
    Ok(SimulationSummary {
        n_per_setting: data.n_per_setting,
        mode: data.sampling_mode,
        seed: data.seed,
        empirical_chsh: if chsh { Some(chsh_value(&empirical)?) } else { None },
        data,
        max_abs_deviation,
        max_sigma,
        within_binomial_bounds: within,
    })
}

pub fn cmd_bell(args: &BellArgs) -> CliResult<RunOutput> {
    let mut inputs = Inputs::default();
    let psi = named_or_file_ket(&args.state, &mut inputs)?;
    let (fam_a, fam_b) = parse_angles(&args.angles)?;
    let table = correlation_table(&psi, &fam_a, &fam_b)?;
    let chsh = if args.chsh { Some(chsh_value(&table)?) } else { None };
    let spin32_max_deviation = if args.spin32 {
        let joint = spin32_embedding(&fam_a, &fam_b)?;
        let single = joint_table(&psi, &joint)?;
        Some(
            table
                .entries()
                .zip(single.entries())
                .map(|(p, q)| (p.4 - q.4).abs())
                .fold(0.0, f64::max),
        )
    } else {
        None
    };
    let (simulation, data) = match args.simulate {
        Some(n) => {
            let data = data_table_sim(&table, n, args.seed, args.mode)?;
            (Some(simulation_summary(&table, data.clone(), args.chsh)?), Some(data))
        }
        None => (None, None),
    };
    if args.counts.is_some() && data.is_none() {
        return Err(CliError::Input("--counts requires --simulate".into()));
    }

    let path = out_path(&args.out);
    let mut outputs = vec![path.clone()];
    outputs.extend(args.table.iter().cloned());
    outputs.extend(args.counts.iter().cloned());
    let seeds = if args.simulate.is_some() { vec![args.seed] } else { vec![] };
    let m = manifest("bell", args, seeds, &inputs, outputs);

    let mut artifacts = Vec::new();
    if let Some(p) = &args.table {
        artifacts.push(csv_artifact(p.clone(), &m, |w| table.write_csv(w))?);
    }
    if let (Some(p), Some(d)) = (&args.counts, &data) {
        artifacts.push(csv_artifact(p.clone(), &m, |w| d.write_csv(w))?);
    }
    let within = simulation.as_ref().is_none_or(|s| s.within_binomial_bounds);
    let body = BellBody {
        state: args.state.clone(),
        no_signalling: no_signalling_check(&table),
        table,
        chsh,
        spin32_max_deviation,
        simulation,
    };
    artifacts.insert(0, json_artifact(path, &m, body));
    Ok(RunOutput {
        artifacts,
        status: if within { EXIT_OK } else { EXIT_NUMERICAL },
        message: (!within).then(|| "simulated table outside the binomial bounds".to_string()),
    })
}

#[derive(Serialize)]
struct MemberOut {
    outcome: usize,
    probability: f64,
    state: MatrixRows,
}

#[derive(Serialize)]
struct SteerBody {
    state: String,
    basis_a: String,
    basis_b: String,
    ensembles: [Vec<MemberOut>; 2],
    marginals: [MatrixRows; 2],
    marginal_gap: f64,
    marginals_agree: bool,
    cross_fidelities: Vec<Vec<f64>>,
    overlap: f64,
    steered: bool,
}

fn steering_basis(arg: &str, inputs: &mut Inputs) -> CliResult<Povm> {
    match parse_axis(arg) {
        Ok(axis) => Ok(axis.povm()),
        Err(_) if Path::new(arg).exists() => {
            let text = inputs.read(arg)?;
            parse_povm(&text).map_err(with_path(arg))
        }
        Err(e) => Err(CliError::Input(format!(
            "{}; not an axis or an existing POVM file",
            e.message()
        ))),
    }
}

fn steer_body(args: &SteerArgs, report: SteeringReport) -> SteerBody {
    let members = |v: &[crate::correlations::EnsembleMember]| {
        v.iter()
            .map(|m| MemberOut {
                outcome: m.outcome,
                probability: m.probability,
                state: matrix_to_rows(m.state.matrix()),
            })
            .collect()
    };
    let marginal_gap = report.marginal_gap();
    SteerBody {
        state: args.state.clone(),
        basis_a: args.basis_a.clone(),
        basis_b: args.basis_b.clone(),
        ensembles: [members(&report.ensembles[0]), members(&report.ensembles[1])],
        marginals: [
            matrix_to_rows(report.marginals[0].matrix()),
            matrix_to_rows(report.marginals[1].matrix()),
        ],
        marginal_gap,
        marginals_agree: marginal_gap < MARGINAL_TOL,
        cross_fidelities: report.cross_fidelities,
        overlap: report.overlap,
        steered: report.steered,
    }
}

pub fn cmd_steer(args: &SteerArgs) -> CliResult<RunOutput> {
    let mut inputs = Inputs::default();
    let psi = named_or_file_ket(&args.state, &mut inputs)?;
    let basis_1 = steering_basis(&args.basis_a, &mut inputs)?;
    let basis_2 = steering_basis(&args.basis_b, &mut inputs)?;
    let report = steering_ensembles(&psi, &basis_1, &basis_2)?;
    let body = steer_body(args, report);
    let agree = body.marginals_agree;
    let path = out_path(&args.out);
    let m = manifest("steer", args, vec![], &inputs, vec![path.clone()]);
    Ok(RunOutput {
        artifacts: vec![json_artifact(path, &m, body)],
        status: if agree { EXIT_OK } else { EXIT_NUMERICAL },
        message: (!agree).then(|| "marginals of the two ensembles differ".to_string()),
    })
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ProbsFile {
    Bare(Vec<f64>),
    Wrapped { probs: Vec<f64> },
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<RunOutput> {
    let mut inputs = Inputs::default();
    let text = inputs.read(&args.probs)?;
    let values = match serde_json::from_str::<ProbsFile>(&text) {
        Ok(ProbsFile::Bare(v)) | Ok(ProbsFile::Wrapped { probs: v }) => v,
        Err(e) => {
            return Err(CliError::Input(format!(
                "{}: expected a JSON array of probabilities or {{\"probs\": [...]}}: {e}",
                args.probs
            )))
        }
    };
    let q = ProbVector::new(values).map_err(with_path(&args.probs))?;
    let counts: OutcomeCounts = sample_outcomes(&q, args.n, args.seed)?;
    let path = out_path(&args.out);
    let m = manifest("simulate", args, vec![args.seed], &inputs, vec![path.clone()]);
    ok(vec![json_artifact(path, &m, counts)])
}

#[derive(Serialize)]
struct IntervalBody {
    n: u64,
    p: f64,
    lo: u64,
    hi: u64,
    probability: f64,
}

pub fn cmd_interval(args: &IntervalArgs) -> CliResult<RunOutput> {
    let probability = binomial_interval_prob(args.n, args.p, args.lo, args.hi)?;
    let path = out_path(&args.out);
    let m = manifest("interval", args, vec![], &Inputs::default(), vec![path.clone()]);
    let body = IntervalBody {
        n: args.n,
        p: args.p,
        lo: args.lo,
        hi: args.hi,
        probability,
    };
    ok(vec![json_artifact(path, &m, body)])
}

/// Extracts the manifest from a JSON artifact or a CSV artifact's first line.
pub fn read_manifest(text: &str) -> CliResult<RunManifest> {
    let parsed = if let Some(rest) = text.strip_prefix(CSV_MANIFEST_PREFIX) {
        let line = rest.lines().next().unwrap_or("");
        serde_json::from_str::<RunManifest>(line)
    } else {
        #[derive(Deserialize)]
        struct WithManifest {
            manifest: RunManifest,
        }
        serde_json::from_str::<WithManifest>(text).map(|w| w.manifest)
    };
    parsed.map_err(|e| CliError::Input(format!("no readable manifest: {e}")))
}

fn params<T: for<'de> Deserialize<'de>>(m: &RunManifest) -> CliResult<T> {
    serde_json::from_value(m.params.clone())
        .map_err(|e| CliError::Input(format!("manifest parameters: {e}")))
}

/// Re-runs the command recorded in `m`.
pub fn execute_manifest(m: &RunManifest) -> CliResult<RunOutput> {
    if m.artifact_version != ARTIFACT_VERSION {
        return Err(CliError::Input(format!(
            "artifact version {} is not supported",
            m.artifact_version
        )));
    }
    for input in &m.inputs {
        let bytes = fs::read(&input.path)
            .map_err(|e| CliError::Input(format!("{}: {e}", input.path)))?;
        if hex::encode(Sha256::digest(&bytes)) != input.sha256 {
            return Err(CliError::Input(format!("{} changed since the run", input.path)));
        }
    }
    match m.command.as_str() {
        "sic-search" => cmd_sic_search(&params(m)?),
        "born-check" => cmd_born_check(&params(m)?),
        "classical-gap" => cmd_classical_gap(&params(m)?),
        "bell" => cmd_bell(&params(m)?),
        "steer" => cmd_steer(&params(m)?),
        "simulate" => cmd_simulate(&params(m)?),
        "interval" => cmd_interval(&params(m)?),
        other => Err(CliError::Input(format!("unknown command `{other}` in manifest"))),
    }
}

fn file_name(path: &str) -> &str {
    Path::new(path)
        .file_name()
        .and_then(|s| s.to_str())
        .unwrap_or(path)
}

pub fn cmd_replay(args: &ReplayArgs) -> CliResult<RunOutput> {
    let original = fs::read(&args.file).map_err(|e| CliError::Input(format!("{}: {e}", args.file)))?;
    let text = String::from_utf8_lossy(&original);
    let m = read_manifest(&text)?;
    let rerun = execute_manifest(&m)?;
    let target = file_name(&args.file);
    let regenerated = rerun
        .artifacts
        .iter()
        .find(|a| file_name(&a.path) == target)
        .or_else(|| rerun.artifacts.iter().find(|a| a.path == STDOUT))
        .ok_or_else(|| CliError::Input(format!("{} is not among the recorded outputs", args.file)))?;
    let identical = regenerated.bytes == original;
    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{dir}: {e}")))?;
        for a in &rerun.artifacts {
            let name = if a.path == STDOUT { "stdout" } else { file_name(&a.path) };
            let dest = Path::new(dir).join(name);
            fs::write(&dest, &a.bytes)
                .map_err(|e| CliError::Input(format!("{}: {e}", dest.display())))?;
        }
    }
    let line = format!(
        "{}: {}\n",
        args.file,
        if identical { "identical" } else { "differs" }
    );
    Ok(RunOutput {
        artifacts: vec![Artifact {
            path: STDOUT.to_string(),
            bytes: line.into_bytes(),
        }],
        status: if identical { EXIT_OK } else { EXIT_NUMERICAL },
        message: None,
    })
}

pub fn dispatch(command: &Command) -> CliResult<RunOutput> {
    match command {
        Command::SicSearch(a) => cmd_sic_search(a),
        Command::BornCheck(a) => cmd_born_check(a),
        Command::ClassicalGap(a) => cmd_classical_gap(a),
        Command::Bell(a) => cmd_bell(a),
        Command::Steer(a) => cmd_steer(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Interval(a) => cmd_interval(a),
        Command::Replay(a) => cmd_replay(a),
    }
}

fn write_artifacts(artifacts: &[Artifact]) -> CliResult<()> {
    for a in artifacts {
        if a.path == STDOUT {
            let mut out = std::io::stdout().lock();
            out.write_all(&a.bytes)
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Input(format!("stdout: {e}")))?;
        } else {
            fs::write(&a.path, &a.bytes).map_err(|e| CliError::Input(format!("{}: {e}", a.path)))?;
        }
    }
    Ok(())
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let result = dispatch(&cli.command).and_then(|out| {
        write_artifacts(&out.artifacts)?;
        Ok(out)
    });
    match result {
        Ok(out) => {
            if let Some(msg) = out.message {
                eprintln!("probrep: {msg}");
            }
            out.status
        }
        Err(e) => {
            eprintln!("probrep: {}", e.message());
            e.exit_code()
        }
    }
}

/// The canonical CHSH axes in `--angles` syntax.
pub fn canonical_angles() -> String {
    CANONICAL_CHSH_AZIMUTHS
        .iter()
        .map(|a| a.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_syntax() {
        use std::f64::consts::PI;
        assert_eq!(parse_axis("pi/4").unwrap(), QubitAxis::Equatorial(PI / 4.0));
        assert_eq!(parse_axis("3pi/4").unwrap(), QubitAxis::Equatorial(3.0 * PI / 4.0));
        assert_eq!(parse_axis("-pi").unwrap(), QubitAxis::Equatorial(-PI));
        assert_eq!(parse_axis("0.5").unwrap(), QubitAxis::Equatorial(0.5));
        assert_eq!(parse_axis("x").unwrap(), QubitAxis::X);
        assert!(parse_axis("pi/0").is_err());
        assert!(parse_axis("q").is_err());
    }

    #[test]
    fn angle_lists() {
        let (a, b) = parse_angles("0,pi/2,pi/4,3pi/4").unwrap();
        assert_eq!(a.labels(), ["0", "pi/2"]);
        assert_eq!(b.labels(), ["pi/4", "3pi/4"]);
        let (a, b) = parse_angles("z,x/z").unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(b.len(), 1);
        let (a, b) = parse_angles("pi/4/z").unwrap();
        assert_eq!(a.labels(), ["pi/4"]);
        assert_eq!(b.labels(), ["z"]);
        assert!(parse_angles("z,x,y").is_err());
        let (a, b) = parse_angles(&canonical_angles()).unwrap();
        assert_eq!((a.len(), b.len()), (2, 2));
    }

    #[test]
    fn error_classes() {
        assert_eq!(CliError::from(Error::NoConvergence { best_gradient_norm: 1.0 }).exit_code(), 2);
        assert_eq!(
            CliError::from(Error::DimensionOutOfRange { dim: 1, min: 2, max: 8 }).exit_code(),
            1
        );
    }

    #[test]
    fn interval_artifact_embeds_manifest() {
        let args = IntervalArgs {
            n: 100,
            p: 0.5,
            lo: 30,
            hi: 70,
            out: None,
        };
        let out = cmd_interval(&args).unwrap();
        let text = String::from_utf8(out.artifacts[0].bytes.clone()).unwrap();
        let m = read_manifest(&text).unwrap();
        assert_eq!(m.command, "interval");
        assert_eq!(execute_manifest(&m).unwrap(), out);
    }
}
