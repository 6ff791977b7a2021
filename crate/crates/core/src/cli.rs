//! Command-line front end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::rngs::StdRng;
use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::expfam::{FamilyModel, SolveStrategy, SolverOptions};
use crate::families::{gaussian_known_variance_model, weibull_model, WeibullSpec};
use crate::means::{f_mean, holder_mean, lehmer_mean, v_weights, MeanKind, MeanOrder, Sample};
use crate::mwle::{fit, FitOptions, FitResult, WeightPolicy};
use crate::numeric::KahanSum;
use crate::pipeline::{aggregate, load_matrix, load_returns, LoadReport, PipelineConfig};
use crate::svg::render_sweep;
use crate::sweep::{party_series, run_sweep, Grid, SweepMode, SweepTable};

/// A scalar map used by the f-mean (`f` or its inverse).
type Transform = fn(f64) -> f64;

#[derive(Debug, Parser)]
#[command(
    name = "mwle",
    version,
    about = "Lehmer and Hölder means as maximum weighted likelihood estimates"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Hölder, Lehmer or generalized f-mean of a list of values.
    Mean(MeanArgs),
    /// Maximum weighted likelihood fit of an exponential family.
    Fit(FitArgs),
    /// Per-party scale estimates over a grid of mean orders.
    Sweep(SweepArgs),
    /// v-weight curves of two (or more) values over a grid of orders.
    Vweights(VweightArgs),
    /// Aggregate a returns file into the per-cycle proportion matrix.
    Ingest(IngestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Holder,
    Lehmer,
    F,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Func {
    Identity,
    Log,
    Exp,
    Reciprocal,
    Square,
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Weibull,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Policy {
    Holder,
    Lehmer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Lehmer,
    Holder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Convention {
    /// `x^α / Σ x^α` and `x^α / n`, as usually plotted.
    Figure,
    /// `w x^(α-1) / Σ w x^(α-1)` and `w x^(α-1) / Σ w`.
    Definition,
}

#[derive(Debug, Args)]
pub struct MeanArgs {
    #[arg(long, value_enum)]
    pub kind: Kind,
    /// Mean order; `inf` and `-inf` are accepted.
    #[arg(long, allow_hyphen_values = true, default_value = "1")]
    pub alpha: String,
    /// Function of the f-mean.
    #[arg(long, value_enum, default_value = "identity")]
    pub func: Func,
    /// Comma-separated observation weights.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub weights: Option<Vec<f64>>,
    #[arg(required = true, allow_negative_numbers = true)]
    pub values: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Returns file or `year,dem,rep,other` matrix.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Column-name / party-label config (`key=value` lines).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, value_enum, default_value = "weibull")]
    pub family: Family,
    /// Weibull shapes, one per column or a single shared value.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub shapes: Vec<f64>,
    /// Known Gaussian standard deviations, one per column or shared.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub sigma: Vec<f64>,
    #[arg(long, value_enum, default_value = "holder")]
    pub policy: Policy,
    /// Lehmer exponents β, one per column or shared.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        default_value = "1"
    )]
    pub beta: Vec<f64>,
    /// A single column of observations, instead of `--data`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub values: Option<Vec<f64>>,
    #[command(flatten)]
    pub data: DataArgs,
    /// auto, closed, newton or bisection.
    #[arg(long, default_value = "auto")]
    pub solver: String,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    /// Draw this many samples from the fitted model and compare the mean
    /// sufficient statistic with the target (Monte Carlo check).
    #[arg(long, default_value_t = 0)]
    pub mc_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// `start:stop:step`; defaults to -3:4:0.1 (lehmer) or 0.1:6:0.1 (holder).
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VweightArgs {
    #[arg(long, allow_hyphen_values = true, default_value = "-5:5:0.1")]
    pub grid: String,
    #[arg(long, value_delimiter = ',', default_value = "0.6,2")]
    pub values: Vec<f64>,
    #[arg(long, value_enum, default_value = "figure")]
    pub convention: Convention,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Matrix CSV destination; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Runs one command, writing its primary output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Mean(a) => cmd_mean(&a, out),
        Command::Fit(a) => cmd_fit(&a, out),
        Command::Sweep(a) => cmd_sweep(&a, out),
        Command::Vweights(a) => cmd_vweights(&a, out),
        Command::Ingest(a) => cmd_ingest(&a, out),
    }
}

pub fn cmd_mean(a: &MeanArgs, out: &mut dyn Write) -> Result<()> {
    let value = match a.kind {
        Kind::F => {
            if a.weights.is_some() {
                return Err(Error::Config("the f-mean takes no weights".into()));
            }
            let (f, g): (Transform, Transform) = match a.func {
                Func::Identity => (|x| x, |y| y),
                Func::Log => (f64::ln, f64::exp),
                Func::Exp => (f64::exp, f64::ln),
                Func::Reciprocal => (|x| -1.0 / x, |y| -1.0 / y),
                Func::Square => (|x| x * x, f64::sqrt),
                Func::Sqrt => (f64::sqrt, |y| y * y),
            };
            if matches!(
                a.func,
                Func::Log | Func::Reciprocal | Func::Square | Func::Sqrt
            ) {
                if let Some(x) = a.values.iter().find(|x| !(**x > 0.0)) {
                    return Err(Error::Domain(format!(
                        "value {x} is outside the positive domain of f = {:?}",
                        a.func
                    )));
                }
            }
            f_mean(f, g, &a.values)?
        }
        kind => {
            let order: MeanOrder = a.alpha.parse()?;
            let sample = match &a.weights {
                Some(w) => Sample::new(a.values.clone(), w.clone())?,
                None => Sample::unweighted(a.values.clone())?,
            };
            if kind == Kind::Holder {
                holder_mean(order, &sample)?
            } else {
                lehmer_mean(order, &sample)?
            }
        }
    };
    writeln!(out, "{value}")?;
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::from_file(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn report_rejects(report: &LoadReport) {
    if !report.rejects.is_empty() {
        log::warn!("{} malformed rows rejected", report.rejects.len());
        for r in report.rejects.iter().take(10) {
            log::warn!("line {}: {}", r.line, r.reason);
        }
    }
}

fn load_observations(data: &DataArgs) -> Result<Vec<Vec<f64>>> {
    let path = data
        .data
        .as_ref()
        .ok_or_else(|| Error::Config("--data is required".into()))?;
    let config = load_config(data.config.as_deref())?;
    let (matrix, report) = load_matrix(path, &config)?;
    if let Some(report) = &report {
        report_rejects(report);
    }
    if matrix.is_empty() {
        return Err(Error::Domain(format!(
            "{} yields no election cycles",
            path.display()
        )));
    }
    log::info!("{} cycles loaded from {}", matrix.len(), path.display());
    Ok(matrix.observations())
}

fn broadcast(v: &[f64], k: usize, what: &str) -> Result<Vec<f64>> {
    match v.len() {
        1 => Ok(vec![v[0]; k]),
        n if n == k => Ok(v.to_vec()),
        n => Err(Error::Config(format!("{n} {what} for {k} columns"))),
    }
}

pub fn cmd_fit(a: &FitArgs, out: &mut dyn Write) -> Result<()> {
    let observations = match (&a.values, &a.data.data) {
        (Some(_), Some(_)) => return Err(Error::Config("give either --values or --data".into())),
        (Some(v), None) => v.iter().map(|x| vec![*x]).collect(),
        (None, _) => load_observations(&a.data)?,
    };
    let k = observations.first().map_or(0, Vec::len);
    let model: Box<dyn FamilyModel> = match a.family {
        Family::Weibull => Box::new(weibull_model(&WeibullSpec::new(broadcast(
            &a.shapes, k, "shapes",
        )?))?),
        Family::Gaussian => Box::new(gaussian_known_variance_model(&broadcast(
            &a.sigma, k, "sigmas",
        )?)?),
    };
    let policy = match a.policy {
        Policy::Holder => WeightPolicy::holder(),
        Policy::Lehmer => WeightPolicy::lehmer(a.beta.clone()),
    };
    let options = FitOptions {
        solver: SolverOptions::with_strategy(a.solver.parse::<SolveStrategy>()?),
        ..FitOptions::default()
    };
    let result = fit(model.as_ref(), &observations, &policy, &options)?;
    let mc = if a.mc_samples > 0 {
        Some(monte_carlo_check(
            model.as_ref(),
            &result,
            a.mc_samples,
            a.seed,
        )?)
    } else {
        None
    };
    match a.format {
        Format::Text => write_fit_text(
            out,
            model.as_ref(),
            a,
            observations.len(),
            &result,
            mc.as_deref(),
        ),
        Format::Csv => write_fit_csv(out, &result, mc.as_deref()),
    }
}

/// Mean and standard error of each sufficient statistic over `n` draws.
fn monte_carlo_check(
    model: &dyn FamilyModel,
    fit: &FitResult,
    n: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let mut rng = StdRng::seed_from_u64(seed);
    let q = model.dim_eta();
    let mut sums = vec![KahanSum::default(); q];
    let mut squares = vec![KahanSum::default(); q];
    for _ in 0..n {
        let x = model
            .sample(&fit.eta_hat, &mut rng)
            .ok_or_else(|| Error::Config(format!("{} has no sampler", model.name())))?;
        for (j, t) in model.sufficient_stat(&x).into_iter().enumerate() {
            sums[j].add(t);
            squares[j].add(t * t);
        }
    }
    let n = n as f64;
    Ok(sums
        .iter()
        .zip(&squares)
        .map(|(s, s2)| {
            let mean = s.total() / n;
            let var = (s2.total() / n - mean * mean).max(0.0);
            (mean, (var / n).sqrt())
        })
        .collect())
}

fn write_fit_text(
    out: &mut dyn Write,
    model: &dyn FamilyModel,
    a: &FitArgs,
    n: usize,
    r: &FitResult,
    mc: Option<&[(f64, f64)]>,
) -> Result<()> {
    let policy = match a.policy {
        Policy::Holder => "holder (u = w)".to_string(),
        Policy::Lehmer => format!("lehmer (u = w x^(beta-1), beta = {:?})", a.beta),
    };
    writeln!(out, "model: {}", model.name())?;
    writeln!(out, "policy: {policy}")?;
    writeln!(out, "observations: {n}")?;
    writeln!(
        out,
        "{:<12} {:>24} {:>24} {:>24}",
        "parameter", "theta_hat", "eta_hat", "target"
    )?;
    for j in 0..r.theta_hat.len() {
        writeln!(
            out,
            "{:<12} {:>24} {:>24} {:>24}",
            r.parameter_names.get(j).map_or("?", String::as_str),
            r.theta_hat[j],
            r.eta_hat[j],
            r.target[j]
        )?;
    }
    let d = &r.diagnostics;
    writeln!(out, "method: {}", d.method)?;
    writeln!(out, "iterations: {}", d.iterations)?;
    writeln!(out, "residual: {:e}", d.residual)?;
    writeln!(
        out,
        "hessian eigenvalues: [{:e}, {:e}]",
        d.hessian_min_eigenvalue, d.hessian_max_eigenvalue
    )?;
    writeln!(out, "minimality: {}", d.minimality)?;
    if let Some(mc) = mc {
        for (j, (mean, se)) in mc.iter().enumerate() {
            writeln!(
                out,
                "monte carlo T{}: {mean} ± {se} (target {}, {:.2} standard errors)",
                j + 1,
                r.target[j],
                (mean - r.target[j]).abs() / se.max(f64::MIN_POSITIVE)
            )?;
        }
    }
    Ok(())
}

fn write_fit_csv(out: &mut dyn Write, r: &FitResult, mc: Option<&[(f64, f64)]>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "parameter",
        "theta_hat",
        "eta_hat",
        "target",
        "method",
        "iterations",
        "residual",
        "hessian_min_eigenvalue",
        "hessian_max_eigenvalue",
        "minimal",
    ];
    if mc.is_some() {
        header.extend(["mc_mean", "mc_stderr"]);
    }
    w.write_record(&header)?;
    let d = &r.diagnostics;
    for j in 0..r.theta_hat.len() {
        let mut rec = vec![
            r.parameter_names.get(j).cloned().unwrap_or_default(),
            r.theta_hat[j].to_string(),
            r.eta_hat[j].to_string(),
            r.target[j].to_string(),
            d.method.to_string(),
            d.iterations.to_string(),
            d.residual.to_string(),
            d.hessian_min_eigenvalue.to_string(),
            d.hessian_max_eigenvalue.to_string(),
            d.minimality.is_minimal().to_string(),
        ];
        if let Some(mc) = mc {
            rec.push(mc[j].0.to_string());
            rec.push(mc[j].1.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn write_to(path: Option<&Path>, out: &mut dyn Write, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes)?,
        None => out.write_all(bytes)?,
    }
    Ok(())
}

pub fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write) -> Result<()> {
    let observations = load_observations(&a.data)?;
    let mode = match a.mode {
        Mode::Lehmer => SweepMode::Lehmer,
        Mode::Holder => SweepMode::Holder,
    };
    let grid: Grid = match &a.grid {
        Some(g) => g.parse()?,
        None => mode.default_grid(),
    };
    let k = observations[0].len();
    let series = if k == 3 {
        party_series()
    } else {
        (1..=k).map(|j| j.to_string()).collect()
    };
    let table = run_sweep(mode, &grid, &observations, series)?;
    if table.gaps() > 0 {
        log::warn!(
            "{} of {} grid points failed and are left as gaps",
            table.gaps(),
            table.rows.len()
        );
    }
    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;
    write_to(a.output.as_deref(), out, &csv)?;
    if let Some(path) = &a.svg {
        fs::write(path, sweep_svg(&table, mode))?;
    }
    Ok(())
}

/// The chart written by `sweep --svg`.
pub fn sweep_svg(table: &SweepTable, mode: SweepMode) -> String {
    let (title, x_label) = match mode {
        SweepMode::Lehmer => ("MWLE of λ as the Lehmer mean", "β"),
        SweepMode::Holder => ("MWLE of λ as the Hölder mean", "k"),
    };
    let legend: Vec<String> = if table.series == party_series() {
        vec![
            "λ₁ DEMOCRAT".into(),
            "λ₂ REPUBLICAN".into(),
            "λ₃ OTHER".into(),
        ]
    } else {
        table.series.iter().map(|s| format!("λ_{s}")).collect()
    };
    render_sweep(table, title, x_label, "λ", &legend)
}

pub fn cmd_vweights(a: &VweightArgs, out: &mut dyn Write) -> Result<()> {
    let grid: Grid = a.grid.parse()?;
    let sample = Sample::unweighted(a.values.clone())?;
    let n = a.values.len();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["alpha".to_string()];
    header.extend((1..=n).map(|i| format!("v_l_{i}")));
    header.extend((1..=n).map(|i| format!("v_h_{i}")));
    w.write_record(&header)?;
    for &alpha in grid.points() {
        let order = match a.convention {
            Convention::Figure => alpha + 1.0,
            Convention::Definition => alpha,
        };
        let order = MeanOrder::new(order)?;
        let vl = v_weights(MeanKind::Lehmer, order, &sample)?;
        let vh = v_weights(MeanKind::Holder, order, &sample)?;
        let mut rec = vec![alpha.to_string()];
        rec.extend(vl.iter().chain(&vh).map(f64::to_string));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_to(a.output.as_deref(), out, &bytes)
}

pub fn cmd_ingest(a: &IngestArgs, out: &mut dyn Write) -> Result<()> {
    let path = a
        .data
        .data
        .as_ref()
        .ok_or_else(|| Error::Config("--data is required".into()))?;
    let config = load_config(a.data.config.as_deref())?;
    let report = load_returns(path, &config.schema)?;
    report_rejects(&report);
    let matrix = aggregate(&report.rows, &config.parties)?;
    log::info!(
        "{} rows parsed, {} rejected, {} filtered; {} cycles",
        report.rows.len(),
        report.rejects.len(),
        report.filtered,
        matrix.len()
    );
    let mut csv = Vec::new();
    matrix.write_csv(&mut csv)?;
    write_to(a.output.as_deref(), out, &csv)
}
