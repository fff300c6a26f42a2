//! `sdr`: estimation, simulation and axiom checks for shortfall deviation risk.
//!
//! Exit status is 0 on success, 1 on any usage, input or validation error
//! (one line on stderr), and 2 when a gating axiom records failures.

mod input;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use sdr_core::axioms::{
    check_coherence, check_deviation, check_duality, check_ordering_and_parameters, AxiomReport,
    CheckConfig, DEFAULT_TOLERANCE,
};
use sdr_core::experiments::{
    alpha_beta_surface_with, measure_curves_with, rolling_measures, run_replication, CurvePoint,
    ReplicationSpec, DEFAULT_ALPHAS, DEFAULT_SAMPLE_SIZE, DEFAULT_WINDOW, DESK_REPLICATES,
    FULL_REPLICATES,
};
use sdr_core::measures::TailSize;
use sdr_core::rng::DEFAULT_SEED;
use sdr_core::simulation::{iid_sample, Innovation, DEFAULT_BURN_IN};
use sdr_core::table::Tabular;
use sdr_core::{
    simulate_path, EstimatorMode, ReturnSeries, RiskConfig, RiskError, Scenario, SdScale,
    SortedSample,
};

use input::{read_series, InputError, InputSeries, SeriesKind};

const CURVE_ALPHAS: [f64; 8] = [0.001, 0.005, 0.01, 0.025, 0.05, 0.1, 0.25, 0.5];
const PARAMETER_BETAS: [f64; 8] = [0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 1e6];
const PARAMETER_SAMPLE: usize = 100_000;

#[derive(Debug, Parser)]
#[command(
    name = "sdr",
    version,
    about = "Shortfall deviation risk: estimation, simulation and axiom checks"
)]
struct Cli {
    /// Worker threads for the parallel sections [default: all cores]
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// VaR, ES, SD and SDR of a return or price series
    Measure(MeasureArgs),
    /// Measures over a trailing window at every date
    Roll(RollArgs),
    /// One AR(1)-GARCH(1,1) path of a named scenario
    Simulate(SimulateArgs),
    /// Monte Carlo summary of the measures over simulated paths
    Replicate(ReplicateArgs),
    /// Measures as functions of alpha
    Curves(CurvesArgs),
    /// SDR over an alpha x beta grid
    Surface(SurfaceArgs),
    /// Randomized checks of the coherence and deviation axioms
    Axioms(AxiomsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output format
    #[arg(long)]
    format: Option<Format>,
    /// Write to this file instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
    /// Emit VaR, ES and SDR as signed returns (negated loss magnitudes)
    #[arg(long)]
    signed: bool,
}

#[derive(Debug, Args)]
struct InputArgs {
    /// CSV file with one value per row, optionally preceded by a date column
    #[arg(long)]
    input: Option<PathBuf>,
    /// Whether the file holds prices (converted to log returns) or returns
    #[arg(long, value_enum, default_value_t = SeriesKind::Returns)]
    kind: SeriesKind,
}

#[derive(Debug, Args)]
struct ShapeArgs {
    /// Penalty exponent on (1 - alpha)
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Power of the lower partial moment
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Divisor of the SD moment: sample (N) or tail (N * alpha)
    #[arg(long, default_value_t = SdScale::Sample)]
    sd_scale: SdScale,
}

#[derive(Debug, Args)]
struct MeasureArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Significance level, repeatable or comma separated
    #[arg(long = "alpha", value_delimiter = ',', default_values_t = DEFAULT_ALPHAS)]
    alphas: Vec<f64>,
    #[command(flatten)]
    shape: ShapeArgs,
    /// Estimator: coherent or literal
    #[arg(long, default_value_t = EstimatorMode::Coherent)]
    mode: EstimatorMode,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct RollArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Observations per estimation window
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    window: usize,
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    #[command(flatten)]
    shape: ShapeArgs,
    #[arg(long, default_value_t = EstimatorMode::Coherent)]
    mode: EstimatorMode,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// normal-low, normal-high, student-low or student-high
    #[arg(long)]
    scenario: Scenario,
    /// Path length after burn-in
    #[arg(long, default_value_t = DEFAULT_SAMPLE_SIZE)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    burn_in: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct ReplicateArgs {
    /// normal-low, normal-high, student-low or student-high
    #[arg(long)]
    scenario: Scenario,
    /// Number of simulated paths [default: 500]
    #[arg(long, conflicts_with = "full")]
    replicates: Option<usize>,
    /// Use 10,000 replicates
    #[arg(long)]
    full: bool,
    /// Observations per path
    #[arg(long, default_value_t = DEFAULT_SAMPLE_SIZE)]
    n: usize,
    #[arg(long = "alpha", value_delimiter = ',', default_values_t = DEFAULT_ALPHAS)]
    alphas: Vec<f64>,
    #[command(flatten)]
    shape: ShapeArgs,
    #[arg(long, default_value_t = EstimatorMode::Literal)]
    mode: EstimatorMode,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    burn_in: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum IidLaw {
    Normal,
    Student,
}

/// Either an input file or an i.i.d. sample drawn from `--seed`.
#[derive(Debug, Args)]
struct SampleArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Draw an i.i.d. sample instead of reading a file
    #[arg(long, conflicts_with = "input")]
    iid: Option<IidLaw>,
    /// Degrees of freedom of the Student-t sample
    #[arg(long, default_value_t = 6.0)]
    dof: f64,
    /// Size of the i.i.d. sample
    #[arg(long, default_value_t = 1_000_000)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Debug, Args)]
struct CurvesArgs {
    #[command(flatten)]
    sample: SampleArgs,
    /// Alpha grid, comma separated
    #[arg(long, value_delimiter = ',', default_values_t = CURVE_ALPHAS)]
    alphas: Vec<f64>,
    #[command(flatten)]
    shape: ShapeArgs,
    #[arg(long, default_value_t = EstimatorMode::Coherent)]
    mode: EstimatorMode,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct SurfaceArgs {
    #[command(flatten)]
    sample: SampleArgs,
    /// Alpha grid, comma separated [default: 0.01 to 0.50 by 0.01]
    #[arg(long, value_delimiter = ',')]
    alphas: Vec<f64>,
    /// Beta grid, comma separated [default: 0 to 20 by 1]
    #[arg(long, value_delimiter = ',')]
    betas: Vec<f64>,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = SdScale::Sample)]
    sd_scale: SdScale,
    #[arg(long, default_value_t = EstimatorMode::Coherent)]
    mode: EstimatorMode,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    All,
    Coherence,
    Deviation,
    Duality,
    Parameters,
}

#[derive(Debug, Args)]
struct AxiomsArgs {
    #[arg(long, value_enum, default_value_t = Suite::All)]
    suite: Suite,
    /// Randomized trials per axiom
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Violations are failures above tolerance * scale
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("--{flag}: {source}")]
    Flag {
        flag: &'static str,
        source: RiskError,
    },
    #[error("--{flag}: {message}")]
    FlagMessage { flag: &'static str, message: String },
    #[error(transparent)]
    Input(#[from] InputError),
    #[error(transparent)]
    Risk(RiskError),
    #[error("cannot write output: {0}")]
    Io(#[from] io::Error),
    #[error("cannot encode JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<RiskError> for CliError {
    /// Attributes parameter errors to the flag that sets the parameter.
    fn from(e: RiskError) -> Self {
        let flag = match &e {
            RiskError::InvalidParameter { name, .. } => match *name {
                "alpha" => Some("alpha"),
                "beta" => Some("beta"),
                "p" => Some("p"),
                "dof" => Some("dof"),
                "replicates" => Some("replicates"),
                "trials" => Some("trials"),
                "tolerance" => Some("tolerance"),
                _ => None,
            },
            RiskError::InsufficientTail { .. } => Some("alpha"),
            RiskError::UnknownScenario { .. } => Some("scenario"),
            _ => None,
        };
        match flag {
            Some(flag) => CliError::Flag { flag, source: e },
            None => CliError::Risk(e),
        }
    }
}

/// Normal completion, or a report whose gating checks failed.
enum Outcome {
    Done,
    AxiomFailures,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let line = text
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments");
            eprintln!("{}", line.trim());
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::AxiomFailures) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let Some(threads) = cli.threads else {
        return dispatch(cli.command);
    };
    if threads == 0 {
        return Err(CliError::FlagMessage {
            flag: "threads",
            message: "must be at least 1".into(),
        });
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::FlagMessage {
            flag: "threads",
            message: e.to_string(),
        })?;
    pool.install(|| dispatch(cli.command))
}

fn dispatch(command: Command) -> Result<Outcome, CliError> {
    match command {
        Command::Measure(a) => measure(a),
        Command::Roll(a) => roll(a),
        Command::Simulate(a) => simulate(a),
        Command::Replicate(a) => replicate(a),
        Command::Curves(a) => curves(a),
        Command::Surface(a) => surface(a),
        Command::Axioms(a) => axioms(a),
    }
    .map(|failed| {
        if failed {
            Outcome::AxiomFailures
        } else {
            Outcome::Done
        }
    })
}

fn config(alpha: f64, shape: &ShapeArgs, mode: EstimatorMode) -> Result<RiskConfig, CliError> {
    Ok(RiskConfig::new(alpha, shape.beta, shape.p, mode)?.with_sd_scale(shape.sd_scale))
}

fn load(input: &InputArgs) -> Result<InputSeries, CliError> {
    let path = input
        .input
        .as_deref()
        .ok_or_else(|| CliError::Usage("--input is required".into()))?;
    Ok(read_series(path, input.kind)?)
}

/// Writes `json` or the CSV produced by `csv`, preceded by `comments` as
/// `# key=value` lines.
fn emit<J: Serialize>(
    out: &OutputArgs,
    default: Format,
    comments: &[(&str, String)],
    json: &J,
    csv: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> Result<(), CliError> {
    let mut sink: Box<dyn Write> = match &out.output {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    match out.format.unwrap_or(default) {
        Format::Json => {
            serde_json::to_writer_pretty(&mut sink, json)?;
            writeln!(sink)?;
        }
        Format::Csv => {
            for (key, value) in comments {
                writeln!(sink, "# {key}={value}")?;
            }
            csv(&mut sink)?;
        }
    }
    sink.flush()?;
    Ok(())
}

fn path_string(path: Option<&Path>) -> String {
    path.map(|p| p.display().to_string()).unwrap_or_default()
}

fn measure(a: MeasureArgs) -> Result<bool, CliError> {
    let configs = a
        .alphas
        .iter()
        .map(|&alpha| config(alpha, &a.shape, a.mode))
        .collect::<Result<Vec<_>, _>>()?;
    let data = load(&a.input)?;
    let sample = SortedSample::new(&data.series);
    let mut reports = configs
        .iter()
        .map(|c| sample.report(c))
        .collect::<Result<Vec<_>, _>>()?;
    if a.out.signed {
        reports = reports.into_iter().map(|r| r.signed()).collect();
    }
    let json = json!({
        "input": path_string(a.input.input.as_deref()),
        "kind": a.input.kind.to_string(),
        "n": data.series.len(),
        "sd_scale": a.shape.sd_scale,
        "signed": a.out.signed,
        "reports": reports,
    });
    emit(&a.out, Format::Json, &[], &json, |w| reports.write_csv(w))?;
    Ok(false)
}

fn roll(a: RollArgs) -> Result<bool, CliError> {
    let config = config(a.alpha, &a.shape, a.mode)?;
    if a.window == 0 {
        return Err(CliError::FlagMessage {
            flag: "window",
            message: "must be at least 1".into(),
        });
    }
    if TailSize::new(a.window, a.alpha).is_err() {
        return Err(CliError::FlagMessage {
            flag: "window",
            message: format!(
                "window * alpha = {} must be at least 1",
                a.window as f64 * a.alpha
            ),
        });
    }
    let data = load(&a.input)?;
    if data.series.len() <= a.window {
        return Err(CliError::FlagMessage {
            flag: "window",
            message: format!(
                "series has {} observations; at least window + 1 = {} are needed",
                data.series.len(),
                a.window + 1
            ),
        });
    }
    let mut result = rolling_measures(&data.series, a.window, &config)?;
    if let Some(labels) = &data.labels {
        result = result.with_labels(labels)?;
    }
    if a.out.signed {
        result = result.signed();
    }
    let json = json!({
        "input": path_string(a.input.input.as_deref()),
        "kind": a.input.kind.to_string(),
        "sd_scale": a.shape.sd_scale,
        "signed": a.out.signed,
        "result": result,
    });
    emit(&a.out, Format::Csv, &[], &json, |w| result.write_csv(w))?;
    Ok(false)
}

fn simulate(a: SimulateArgs) -> Result<bool, CliError> {
    if a.n == 0 {
        return Err(CliError::FlagMessage {
            flag: "n",
            message: "must be at least 1".into(),
        });
    }
    let params = a.scenario.params();
    let path = simulate_path(&params, a.n, a.burn_in, a.seed)?;
    let json = json!({
        "scenario": a.scenario.name(),
        "seed": a.seed,
        "n": a.n,
        "burn_in": a.burn_in,
        "params": params,
        "returns": path.values(),
    });
    let comments = [
        ("seed", a.seed.to_string()),
        ("scenario", a.scenario.name().to_string()),
    ];
    emit(&a.out, Format::Csv, &comments, &json, |w| path.write_csv(w))?;
    Ok(false)
}

fn replicate(a: ReplicateArgs) -> Result<bool, CliError> {
    let replicates = match (a.full, a.replicates) {
        (true, _) => FULL_REPLICATES,
        (false, Some(r)) => r,
        (false, None) => DESK_REPLICATES,
    };
    let spec = ReplicationSpec {
        scenario: a.scenario,
        replicates,
        sample_size: a.n,
        alphas: a.alphas.clone(),
        beta: a.shape.beta,
        p: a.shape.p,
        mode: a.mode,
        sd_scale: a.shape.sd_scale,
        burn_in: a.burn_in,
        seed: a.seed,
    };
    spec.validate()?;
    let mut table = run_replication(&spec)?;
    if a.out.signed {
        table = table.signed();
    }
    let json = json!({
        "sd_scale": a.shape.sd_scale,
        "burn_in": a.burn_in,
        "signed": a.out.signed,
        "summary": table,
    });
    let comments = [
        ("seed", a.seed.to_string()),
        ("scenario", a.scenario.name().to_string()),
        ("replicates", replicates.to_string()),
        ("sample_size", a.n.to_string()),
        ("mode", a.mode.to_string()),
        ("degenerate_tails", table.degenerate_tails.to_string()),
    ];
    emit(&a.out, Format::Json, &comments, &json, |w| {
        table.write_csv(w)
    })?;
    Ok(false)
}

/// The series to analyse and a description of where it came from.
fn sample(a: &SampleArgs) -> Result<(ReturnSeries, String, Option<u64>), CliError> {
    match (a.iid, &a.input.input) {
        (Some(law), _) => {
            if a.n == 0 {
                return Err(CliError::FlagMessage {
                    flag: "n",
                    message: "must be at least 1".into(),
                });
            }
            let (innovation, name) = match law {
                IidLaw::Normal => (Innovation::Normal, "iid normal".to_string()),
                IidLaw::Student => (
                    Innovation::Student { dof: a.dof },
                    format!("iid student dof={}", a.dof),
                ),
            };
            let series = iid_sample(innovation, a.n, a.seed)?;
            Ok((series, name, Some(a.seed)))
        }
        (None, Some(path)) => {
            let data = read_series(path, a.input.kind)?;
            Ok((data.series, path.display().to_string(), None))
        }
        (None, None) => Err(CliError::Usage(
            "one of --input or --iid is required".into(),
        )),
    }
}

fn seed_comment(seed: Option<u64>) -> Vec<(&'static str, String)> {
    seed.map(|s| vec![("seed", s.to_string())])
        .unwrap_or_default()
}

fn curves(a: CurvesArgs) -> Result<bool, CliError> {
    let base = config(0.5, &a.shape, a.mode)?;
    for &alpha in &a.alphas {
        base.with_alpha(alpha)?;
    }
    let (series, source, seed) = sample(&a.sample)?;
    let mut points = measure_curves_with(&series, &a.alphas, &base)?;
    if a.out.signed {
        points = points.into_iter().map(CurvePoint::signed).collect();
    }
    let json = json!({
        "source": source,
        "seed": seed,
        "n": series.len(),
        "beta": a.shape.beta,
        "p": a.shape.p,
        "mode": a.mode,
        "sd_scale": a.shape.sd_scale,
        "signed": a.out.signed,
        "points": points,
    });
    emit(&a.out, Format::Csv, &seed_comment(seed), &json, |w| {
        points.write_csv(w)
    })?;
    Ok(false)
}

fn surface(a: SurfaceArgs) -> Result<bool, CliError> {
    let alphas = if a.alphas.is_empty() {
        (1..=50).map(|i| i as f64 / 100.0).collect()
    } else {
        a.alphas.clone()
    };
    let betas = if a.betas.is_empty() {
        (0..=20).map(f64::from).collect()
    } else {
        a.betas.clone()
    };
    let base = RiskConfig::new(0.5, 0.0, a.p, a.mode)?.with_sd_scale(a.sd_scale);
    for &alpha in &alphas {
        base.with_alpha(alpha)?;
    }
    for &beta in &betas {
        base.with_beta(beta)?;
    }
    let (series, source, seed) = sample(&a.sample)?;
    let mut grid = alpha_beta_surface_with(&series, &alphas, &betas, &base)?;
    if a.out.signed {
        grid = grid.signed();
    }
    let (alpha, beta, sdr) = grid.argmax();
    let json = json!({
        "source": source,
        "seed": seed,
        "n": series.len(),
        "mode": a.mode,
        "sd_scale": a.sd_scale,
        "signed": a.out.signed,
        "argmax": { "alpha": alpha, "beta": beta, "sdr": sdr },
        "grid": grid,
    });
    emit(&a.out, Format::Csv, &seed_comment(seed), &json, |w| {
        grid.write_csv(w)
    })?;
    Ok(false)
}

/// Ordering and parameter checks on an i.i.d. normal sample and a
/// student-low path.
fn parameter_suites(seed: u64) -> Result<Vec<AxiomReport>, CliError> {
    let normal = iid_sample(Innovation::Normal, PARAMETER_SAMPLE, seed)?;
    let params = Scenario::StudentLow.params();
    let path = simulate_path(&params, PARAMETER_SAMPLE, DEFAULT_BURN_IN, seed)?;
    [
        ("parameters-normal", normal),
        ("parameters-student-low", path),
    ]
    .into_iter()
    .map(|(name, series)| {
        let mut report =
            check_ordering_and_parameters(&series, &CURVE_ALPHAS, &PARAMETER_BETAS, 2.0)?;
        report.suite = name.to_string();
        Ok(report)
    })
    .collect()
}

fn axioms(a: AxiomsArgs) -> Result<bool, CliError> {
    let cfg = CheckConfig {
        tolerance: a.tolerance,
        trials: a.trials,
        seed: a.seed,
        ..CheckConfig::default()
    };
    cfg.validate()?;
    let wanted = |s: Suite| a.suite == Suite::All || a.suite == s;
    let mut reports = Vec::new();
    if wanted(Suite::Coherence) {
        reports.push(check_coherence(&cfg)?);
    }
    if wanted(Suite::Deviation) {
        reports.push(check_deviation(&cfg)?);
    }
    if wanted(Suite::Duality) {
        reports.push(check_duality(&cfg)?);
    }
    if wanted(Suite::Parameters) {
        reports.extend(parameter_suites(a.seed)?);
    }
    let passed = reports.iter().all(AxiomReport::passed);
    let json = json!({
        "seed": a.seed,
        "trials": a.trials,
        "tolerance": a.tolerance,
        "passed": passed,
        "suites": reports,
    });
    emit(
        &a.out,
        Format::Json,
        &seed_comment(Some(a.seed)),
        &json,
        |w| reports.write_csv(w),
    )?;
    for report in &reports {
        for e in report.entries.iter().filter(|e| e.gating && e.failures > 0) {
            eprintln!(
                "axiom failure: {}/{}: {} of {} trials, max violation {:e}",
                report.suite, e.name, e.failures, e.trials, e.max_violation
            );
        }
    }
    Ok(!passed)
}
