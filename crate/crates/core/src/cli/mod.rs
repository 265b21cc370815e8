//! Command-line front end: predict, simulate, compare, sweep and validate-sampler.

mod config;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use crate::error::{Error, Result};
use crate::haarsim::{
    mc_moment, validate_sampler, EnsembleKind, Group, McEstimate, Sampler, SamplerDiagnostics,
    RESIDUAL_TOL,
};
use crate::predictions::{c_even_odd, predict, Method, MomentRequest, Quantity};
use crate::splinefourier::TestFunctionSpec;

pub use config::{
    Format, Output, RunConfig, Tolerances, DEFAULT_QUAD_TOL, DEFAULT_SAMPLES, DEFAULT_SEED,
    DEFAULT_Z_THRESHOLD,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_THRESHOLD: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "orthomoments", version, about = "Centered moments of orthogonal-group eigenvalue statistics")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form and contour predictions for each configured quantity.
    Predict(PredictArgs),
    /// Monte Carlo estimates at each ensemble rank.
    Simulate(McArgs),
    /// Monte Carlo estimates joined with predictions, with z-scores.
    Compare(McArgs),
    /// Predictions over a grid of support radii.
    Sweep(SweepArgs),
    /// Residual and marginal diagnostics of a sampler.
    ValidateSampler(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Comma-separated ranks, e.g. 20,40,80.
    #[arg(long = "ensemble-N", value_delimiter = ',')]
    pub ensemble_n: Option<Vec<usize>>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub z_threshold: Option<f64>,
    #[arg(long, value_parser = parse_sampler)]
    pub sampler: Option<Sampler>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Parameter to vary; only `sigma` is supported.
    #[arg(long)]
    pub vary: String,
    /// Inclusive grid `start:stop:step`.
    #[arg(long)]
    pub grid: String,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, value_parser = parse_group)]
    pub kind: Group,
    #[arg(long = "N")]
    pub n: usize,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, value_parser = parse_sampler, default_value = "matrix")]
    pub sampler: Sampler,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn parse_sampler(s: &str) -> std::result::Result<Sampler, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown sampler {s:?}; expected matrix or tridiagonal"))
}

fn parse_group(s: &str) -> std::result::Result<Group, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Rendered output plus whether an acceptance threshold was breached.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub text: String,
    pub breach: bool,
    pub out: Option<PathBuf>,
}

/// Exit status for a failed run.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Accuracy { .. }
        | Error::UnsupportedIntegrand(_)
        | Error::OutOfTruncation(_)
        | Error::SamplerFailure(_)
        | Error::EstimateInvalid { .. } => EXIT_NUMERICAL,
        Error::InvalidParameter(_)
        | Error::SizeLimit { .. }
        | Error::IncompleteInput(_)
        | Error::SupportCondition(_)
        | Error::InvalidRequest(_)
        | Error::UnsupportedRange(_)
        | Error::Config(_) => EXIT_CONFIG,
    }
}

/// Parses the process arguments, runs, writes output and maps the result to an exit status.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot set thread count: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let outcome = match run(&cli.command).and_then(|o| emit(&o).map(|_| o)) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    if outcome.breach {
        eprintln!("acceptance threshold breached");
        ExitCode::from(EXIT_THRESHOLD)
    } else {
        ExitCode::from(EXIT_OK)
    }
}

fn emit(o: &Outcome) -> Result<()> {
    match &o.out {
        Some(path) => std::fs::write(path, &o.text)
            .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(o.text.as_bytes())
            .map_err(|e| Error::Config(format!("cannot write output: {e}"))),
    }
}

pub fn run(cmd: &Command) -> Result<Outcome> {
    match cmd {
        Command::Predict(a) => {
            let mut cfg = RunConfig::load(&a.config)?;
            apply_output(&mut cfg, &a.output);
            run_predict(&cfg)
        }
        Command::Simulate(a) => {
            let cfg = mc_config(a)?;
            run_simulate(&cfg)
        }
        Command::Compare(a) => {
            let cfg = mc_config(a)?;
            run_compare(&cfg)
        }
        Command::Sweep(a) => {
            let mut cfg = RunConfig::load(&a.config)?;
            apply_output(&mut cfg, &a.output);
            if a.vary != "sigma" {
                return Err(Error::Config(format!(
                    "cannot vary {:?}; only sigma is supported",
                    a.vary
                )));
            }
            run_sweep(&cfg, &parse_grid(&a.grid)?)
        }
        Command::ValidateSampler(a) => {
            let kind = EnsembleKind::new(a.kind, a.n)?;
            run_validate(kind, a.samples, a.seed, a.sampler, a.output.format.unwrap_or_default())
                .map(|o| Outcome {
                    out: a.output.out.clone(),
                    ..o
                })
        }
    }
}

fn apply_output(cfg: &mut RunConfig, o: &OutputArgs) {
    if let Some(p) = &o.out {
        cfg.output.path = Some(p.clone());
    }
    if let Some(f) = o.format {
        cfg.output.format = f;
    }
}

fn mc_config(a: &McArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&a.config)?;
    apply_output(&mut cfg, &a.output);
    if let Some(v) = &a.ensemble_n {
        cfg.ensemble_n = v.clone();
    }
    if let Some(v) = a.samples {
        cfg.samples = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.z_threshold {
        cfg.tolerances.z_threshold = v;
    }
    if let Some(v) = a.sampler {
        cfg.sampler = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Inclusive grid `start:stop:step`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("grid must be start:stop:step with step > 0, got {s:?}"));
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let [a, b, step] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0) || !(b >= a) || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    let count = ((b - a) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| a + i as f64 * step).collect())
}

/// The ensemble whose finite-`N` average converges to the quantity.
pub fn ensemble_for(q: Quantity) -> Result<Group> {
    match q {
        Quantity::C | Quantity::GaussianLimit => Ok(Group::OFull),
        Quantity::CEven => Ok(Group::SoEven),
        Quantity::COdd => Ok(Group::OMinus),
        other => Err(Error::Config(format!(
            "{} has no Monte Carlo counterpart; use C, C_even, C_odd or gaussian_limit",
            other.name()
        ))),
    }
}

fn csv_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_csv(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Config(format!("csv output: {e}"));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv output: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn to_json(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("output serializes");
    s.push('\n');
    s
}

/// One line of `predict` output.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct PredictionRecord {
    pub quantity: Quantity,
    pub n: usize,
    pub phis: Vec<TestFunctionSpec>,
    pub value: f64,
    pub method: Method,
    pub accuracy: f64,
    pub request_hash: String,
    pub config_hash: String,
}

pub fn predictions(cfg: &RunConfig) -> Result<Vec<PredictionRecord>> {
    let req = cfg.request()?;
    let specs = cfg.specs()?;
    let opts = cfg.prediction_options();
    let hash = cfg.config_hash();
    cfg.quantities
        .iter()
        .map(|&q| {
            let r = predict(q, &req, &opts)?;
            Ok(PredictionRecord {
                quantity: q,
                n: req.n(),
                phis: specs.clone(),
                value: r.value,
                method: r.method,
                accuracy: r.accuracy,
                request_hash: r.provenance.request_hash,
                config_hash: hash.clone(),
            })
        })
        .collect()
}

pub fn run_predict(cfg: &RunConfig) -> Result<Outcome> {
    let records = predictions(cfg)?;
    let text = match cfg.output.format {
        Format::Json => to_json(&records),
        Format::Csv => write_csv(
            &["quantity", "n", "value", "method", "accuracy", "config_hash"],
            &records
                .iter()
                .map(|r| {
                    vec![
                        r.quantity.name().to_string(),
                        r.n.to_string(),
                        csv_float(r.value),
                        method_name(r.method),
                        csv_float(r.accuracy),
                        r.config_hash.clone(),
                    ]
                })
                .collect::<Vec<_>>(),
        )?,
    };
    Ok(Outcome {
        text,
        breach: false,
        out: cfg.output.path.clone(),
    })
}

fn method_name(m: Method) -> String {
    serde_json::to_value(m)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct SimulationRow {
    pub quantity: Quantity,
    pub ensemble: Group,
    #[serde(rename = "N")]
    pub ensemble_n: usize,
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    pub failures: usize,
    pub seed: u64,
}

pub fn simulations(cfg: &RunConfig, req: &MomentRequest) -> Result<Vec<SimulationRow>> {
    let mut rows = Vec::new();
    for &q in &cfg.quantities {
        let group = ensemble_for(q)?;
        for &n in &cfg.ensemble_n {
            let kind = EnsembleKind::new(group, n)?;
            let seed = cfg.run_seed(q, n);
            let est: McEstimate = mc_moment(kind, req, cfg.samples, seed, cfg.sampler)?;
            rows.push(SimulationRow {
                quantity: q,
                ensemble: group,
                ensemble_n: n,
                mean: est.mean,
                stderr: est.stderr,
                samples: est.samples,
                failures: est.failures,
                seed,
            });
        }
    }
    Ok(rows)
}

#[derive(Serialize)]
struct SimulationDoc<'a> {
    config_hash: String,
    rows: &'a [SimulationRow],
}

pub fn run_simulate(cfg: &RunConfig) -> Result<Outcome> {
    let req = cfg.request()?;
    for &q in &cfg.quantities {
        ensemble_for(q)?;
    }
    let rows = simulations(cfg, &req)?;
    let hash = cfg.config_hash();
    let text = match cfg.output.format {
        Format::Json => to_json(&SimulationDoc {
            config_hash: hash,
            rows: &rows,
        }),
        Format::Csv => write_csv(
            &["quantity", "ensemble", "N", "mean", "stderr", "samples", "failures", "seed", "config_hash"],
            &rows
                .iter()
                .map(|r| {
                    vec![
                        r.quantity.name().to_string(),
                        r.ensemble.name().to_string(),
                        r.ensemble_n.to_string(),
                        csv_float(r.mean),
                        csv_float(r.stderr),
                        r.samples.to_string(),
                        r.failures.to_string(),
                        r.seed.to_string(),
                        hash.clone(),
                    ]
                })
                .collect::<Vec<_>>(),
        )?,
    };
    Ok(Outcome {
        text,
        breach: false,
        out: cfg.output.path.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ComparisonRow {
    pub quantity: Quantity,
    pub ensemble: Group,
    #[serde(rename = "N")]
    pub ensemble_n: usize,
    pub prediction: f64,
    pub prediction_accuracy: f64,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    /// `(mean − prediction) / stderr`; zero when both agree exactly.
    pub z: f64,
    pub samples: usize,
    pub failures: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct Comparison {
    pub config_hash: String,
    pub z_threshold: f64,
    pub passed: bool,
    pub rows: Vec<ComparisonRow>,
}

fn z_score(mean: f64, prediction: f64, stderr: f64) -> f64 {
    let d = mean - prediction;
    if d == 0.0 {
        0.0
    } else {
        d / stderr
    }
}

pub fn comparison(cfg: &RunConfig) -> Result<Comparison> {
    let req = cfg.request()?;
    for &q in &cfg.quantities {
        ensemble_for(q)?;
    }
    let opts = cfg.prediction_options();
    let even_odd = if cfg.quantities.iter().any(|q| matches!(q, Quantity::CEven | Quantity::COdd)) {
        Some(c_even_odd(&req, &opts)?)
    } else {
        None
    };
    let mut predicted = Vec::new();
    for &q in &cfg.quantities {
        let est = match (q, &even_odd) {
            (Quantity::CEven, Some(eo)) => eo.even,
            (Quantity::COdd, Some(eo)) => eo.odd,
            _ => {
                let r = predict(q, &req, &opts)?;
                crate::quadrature::Estimate {
                    value: r.value,
                    error: r.accuracy,
                }
            }
        };
        predicted.push((q, est));
    }
    let sims = simulations(cfg, &req)?;
    let rows: Vec<ComparisonRow> = sims
        .into_iter()
        .map(|s| {
            let p = predicted
                .iter()
                .find(|(q, _)| *q == s.quantity)
                .map(|(_, e)| *e)
                .expect("every simulated quantity was predicted");
            ComparisonRow {
                quantity: s.quantity,
                ensemble: s.ensemble,
                ensemble_n: s.ensemble_n,
                prediction: p.value,
                prediction_accuracy: p.error,
                mc_mean: s.mean,
                mc_stderr: s.stderr,
                z: z_score(s.mean, p.value, s.stderr),
                samples: s.samples,
                failures: s.failures,
                seed: s.seed,
            }
        })
        .collect();
    let threshold = cfg.tolerances.z_threshold;
    let passed = rows.iter().all(|r| r.z.abs() <= threshold);
    Ok(Comparison {
        config_hash: cfg.config_hash(),
        z_threshold: threshold,
        passed,
        rows,
    })
}

pub fn run_compare(cfg: &RunConfig) -> Result<Outcome> {
    let cmp = comparison(cfg)?;
    let text = match cfg.output.format {
        Format::Json => to_json(&cmp),
        Format::Csv => write_csv(
            &[
                "quantity", "ensemble", "N", "prediction", "prediction_accuracy", "mc_mean",
                "mc_stderr", "z", "samples", "failures", "seed", "config_hash",
            ],
            &cmp.rows
                .iter()
                .map(|r| {
                    vec![
                        r.quantity.name().to_string(),
                        r.ensemble.name().to_string(),
                        r.ensemble_n.to_string(),
                        csv_float(r.prediction),
                        csv_float(r.prediction_accuracy),
                        csv_float(r.mc_mean),
                        csv_float(r.mc_stderr),
                        csv_float(r.z),
                        r.samples.to_string(),
                        r.failures.to_string(),
                        r.seed.to_string(),
                        cmp.config_hash.clone(),
                    ]
                })
                .collect::<Vec<_>>(),
        )?,
    };
    Ok(Outcome {
        text,
        breach: !cmp.passed,
        out: cfg.output.path.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct SweepRow {
    pub sigma: f64,
    pub quantity: Quantity,
    pub value: f64,
    pub method: Method,
    pub accuracy: f64,
}

/// Predictions with every built-in function's support radius set to each grid value.
pub fn sweep(cfg: &RunConfig, grid: &[f64]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &sigma in grid {
        let functions = cfg
            .functions
            .iter()
            .map(|f| match f {
                TestFunctionSpec::Builtin { family, .. } => Ok(TestFunctionSpec::builtin(*family, sigma)),
                TestFunctionSpec::Custom { .. } => Err(Error::Config(
                    "a sigma sweep needs built-in families, not custom transforms".into(),
                )),
            })
            .collect::<Result<Vec<_>>>()?;
        let point = RunConfig {
            functions,
            ..cfg.clone()
        };
        point
            .validate()
            .map_err(|e| Error::Config(format!("grid point sigma = {sigma}: {e}")))?;
        for r in predictions(&point)? {
            rows.push(SweepRow {
                sigma,
                quantity: r.quantity,
                value: r.value,
                method: r.method,
                accuracy: r.accuracy,
            });
        }
    }
    Ok(rows)
}

#[derive(Serialize)]
struct SweepDoc<'a> {
    config_hash: String,
    vary: &'static str,
    rows: &'a [SweepRow],
}

pub fn run_sweep(cfg: &RunConfig, grid: &[f64]) -> Result<Outcome> {
    let rows = sweep(cfg, grid)?;
    let hash = cfg.config_hash();
    let text = match cfg.output.format {
        Format::Json => to_json(&SweepDoc {
            config_hash: hash,
            vary: "sigma",
            rows: &rows,
        }),
        Format::Csv => write_csv(
            &["sigma", "quantity", "value", "method", "accuracy", "config_hash"],
            &rows
                .iter()
                .map(|r| {
                    vec![
                        csv_float(r.sigma),
                        r.quantity.name().to_string(),
                        csv_float(r.value),
                        method_name(r.method),
                        csv_float(r.accuracy),
                        hash.clone(),
                    ]
                })
                .collect::<Vec<_>>(),
        )?,
    };
    Ok(Outcome {
        text,
        breach: false,
        out: cfg.output.path.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct Validation {
    #[serde(flatten)]
    pub diagnostics: SamplerDiagnostics,
    pub residual_tol: f64,
    pub passed: bool,
}

pub fn validation(kind: EnsembleKind, samples: usize, seed: u64, sampler: Sampler) -> Result<Validation> {
    if samples == 0 {
        return Err(Error::Config("`samples` must be positive".into()));
    }
    let d = validate_sampler(kind, samples, seed, sampler);
    let passed = d.failures == 0 && d.marginal.map_or(true, |m| m.passed);
    Ok(Validation {
        diagnostics: d,
        residual_tol: RESIDUAL_TOL,
        passed,
    })
}

pub fn run_validate(
    kind: EnsembleKind,
    samples: usize,
    seed: u64,
    sampler: Sampler,
    format: Format,
) -> Result<Outcome> {
    let v = validation(kind, samples, seed, sampler)?;
    let d = &v.diagnostics;
    let text = match format {
        Format::Json => to_json(&v),
        Format::Csv => {
            let (stat, crit) = d
                .marginal
                .map_or((String::new(), String::new()), |m| {
                    (csv_float(m.statistic), csv_float(m.critical))
                });
            write_csv(
                &[
                    "ensemble", "N", "samples", "failures", "max_unitarity", "max_determinant",
                    "max_pairing", "max_symplectic", "marginal_statistic", "marginal_critical",
                    "passed",
                ],
                &[vec![
                    d.kind.group.name().to_string(),
                    d.kind.n.to_string(),
                    d.samples.to_string(),
                    d.failures.to_string(),
                    csv_float(d.max_unitarity),
                    csv_float(d.max_determinant),
                    csv_float(d.max_pairing),
                    csv_float(d.max_symplectic),
                    stat,
                    crit,
                    v.passed.to_string(),
                ]],
            )?
        }
    };
    Ok(Outcome {
        text,
        breach: !v.passed,
        out: None,
    })
}

#[cfg(test)]
mod tests;
