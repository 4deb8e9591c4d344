//! Command-line front end.
//!
//! Every subcommand reads its options from flags, falling back to the
//! matching `[section]` of an optional TOML config file (`--config`), then
//! to built-in defaults. The fully resolved options are written into each
//! run's `manifest.json`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::BlinError;
use crate::estimators::{
    design_rank_check, fit_panel, EstimatorConfig, InfluenceFit, LambdaChoice, Method, ModelKind, Tolerance,
};
use crate::evaluate::{
    aic_select, align_scale, convergence_study, kfold_cv, likelihood_line_scan, StudyConfig,
};
use crate::io::{fmt_f64, ingest, matrix_csv, read_label_map, read_matrix_csv, write_atomic, write_json_atomic};
use crate::io::{long_csv_string, open, IngestOptions};
use crate::linalg::standard_normal_matrix;
use crate::model::{bilinear_companion_radius, companion, InfluencePair};
use crate::multiway::{fit_multiblin, fit_multiblin_sparse, MultiFit};
use crate::panel::Panel;
use crate::series::{LagSpec, TensorSeries};
use crate::simulate::{generate, replication_rng, Generator, SimulationSpec};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Run(#[from] BlinError),
    #[error("{0}")]
    NotConverged(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Run(e) => e.kind(),
            CliError::NotConverged(_) => "not_converged",
        }
    }

    fn status(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "blin", version, about = "Bipartite longitudinal influence network models")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Serialize)]
struct GlobalArgs {
    /// Seed for every random choice made by the command.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, env = "BLIN_JOBS")]
    jobs: Option<usize>,
    /// TOML file with one table per subcommand; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Exit with status 0 even when a fit did not converge.
    #[arg(long, global = true)]
    allow_nonconverged: bool,
    /// Print runtime errors to stderr as JSON.
    #[arg(long, global = true)]
    error_json: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a calibrated generating model and simulate series from it.
    Simulate(SimulateArgs),
    /// Fit an influence model to a long-format data file.
    Fit(FitArgs),
    /// K-fold cross-validation of one or more methods.
    Cv(CvArgs),
    /// Rank lag specifications by the sparse-fit information criterion.
    Lagselect(LagselectArgs),
    /// Convergence rates of BLIN and bilinear estimates.
    StudyConvergence(StudyArgs),
    /// In- and out-of-sample R² along the segment from the true to the fitted coefficients.
    Scan(ScanArgs),
    /// Numerical rank of the stacked design.
    Rankcheck(RankcheckArgs),
}

/// Ingestion switches shared by the data-reading commands.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
struct IngestArgs {
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    center: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    standardize: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    difference: Option<bool>,
    /// Fail on missing cells instead of zero-filling.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    strict: Option<bool>,
    /// CSV of `mode,label` lines fixing the index order of entities.
    #[arg(long)]
    label_map: Option<PathBuf>,
}

/// Estimator settings shared by the fitting commands.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
struct EstimatorArgs {
    /// Relative convergence tolerance on the criterion.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Fixed penalty for the sparse method; chosen by CV when absent.
    #[arg(long)]
    lambda: Option<f64>,
    /// Folds used to choose the penalty.
    #[arg(long)]
    lambda_folds: Option<usize>,
    #[arg(long)]
    rank_a: Option<usize>,
    #[arg(long)]
    rank_b: Option<usize>,
    /// Restarts for the bilinear and reduced-rank fits.
    #[arg(long)]
    restarts: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
struct SimulateArgs {
    /// `blin` or `bilinear`.
    #[arg(long)]
    generator: Option<String>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    l: Option<usize>,
    /// Fraction of off-diagonal influence entries set to zero.
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    target_r2: Option<f64>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
struct FitArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// exact, bcd, sparse, reduced-rank or bilinear.
    #[arg(long)]
    method: Option<String>,
    /// Lag per mode, e.g. `1,1` or `2,1,1`.
    #[arg(long)]
    lags: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    estimator: EstimatorArgs,
    #[command(flatten)]
    #[serde(flatten)]
    ingest: IngestArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
struct CvArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Comma-separated methods.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    lags: Option<String>,
    #[arg(long)]
    folds: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    estimator: EstimatorArgs,
    #[command(flatten)]
    #[serde(flatten)]
    ingest: IngestArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
struct LagselectArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Explicit cells separated by `;`, e.g. `1,1;2,1;2,2`.
    #[arg(long)]
    grid: Option<String>,
    /// Every combination of lags from 1 up to these per-mode maxima.
    #[arg(long)]
    max_lags: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    estimator: EstimatorArgs,
    #[command(flatten)]
    #[serde(flatten)]
    ingest: IngestArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
struct StudyArgs {
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    l: Option<usize>,
    /// Comma-separated horizons.
    #[arg(long)]
    t_grid: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
struct ScanArgs {
    /// Long-format series the model is fitted to.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Long-format series for out-of-sample R².
    #[arg(long)]
    test: Option<PathBuf>,
    /// Matrix CSV of the true A.
    #[arg(long)]
    truth_a: Option<PathBuf>,
    /// Matrix CSV of the true B.
    #[arg(long)]
    truth_b: Option<PathBuf>,
    /// `blin` or `bilinear`.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    lags: Option<String>,
    /// Evenly spaced points on [0, 1].
    #[arg(long)]
    points: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    estimator: EstimatorArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
struct RankcheckArgs {
    /// Long-format series; a standard-normal series is drawn when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    l: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    lags: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    ingest: IngestArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parse arguments, run, and return the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let error_json = cli.global.error_json;
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            if error_json {
                eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            } else {
                eprintln!("error: {e}");
            }
            e.status()
        }
    }
}

struct Context {
    seed: u64,
    allow_nonconverged: bool,
    config: Option<Map<String, Value>>,
    global: Value,
}

impl Context {
    /// Flags first, then the config table named `section`.
    fn resolve<T: Serialize + DeserializeOwned>(&self, flags: &T, section: &str) -> CliResult<T> {
        let Value::Object(mut merged) = serde_json::to_value(flags).map_err(BlinError::from)? else {
            unreachable!("argument structs serialize to objects")
        };
        if let Some(Value::Object(table)) = self.config.as_ref().and_then(|c| c.get(section)) {
            for (k, v) in table {
                let key = k.replace('-', "_");
                match merged.get(&key) {
                    None => return Err(CliError::Usage(format!("unknown key '{k}' in [{section}]"))),
                    Some(Value::Null) => {
                        merged.insert(key, v.clone());
                    }
                    Some(_) => {}
                }
            }
        }
        serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Usage(format!("[{section}]: {e}")))
    }

    fn check_converged(&self, converged: bool, what: &str) -> CliResult<()> {
        if converged || self.allow_nonconverged {
            Ok(())
        } else {
            Err(CliError::NotConverged(format!("{what} did not converge (pass --allow-nonconverged to accept)")))
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let config = match &cli.global.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(BlinError::from)?;
            let table: toml::Table =
                toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            let Value::Object(map) = serde_json::to_value(table).map_err(BlinError::from)? else { unreachable!() };
            Some(map)
        }
        None => None,
    };
    let top = |key: &str| config.as_ref().and_then(|c| c.get(key)).and_then(Value::as_u64);
    let seed = cli.global.seed.or_else(|| top("seed")).unwrap_or(0);
    let jobs = cli.global.jobs.or_else(|| top("jobs").map(|j| j as usize));
    if let Some(j) = jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be positive".into()));
        }
        // Fails only if a pool already exists, e.g. when run() is called twice in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    let ctx = Context {
        seed,
        allow_nonconverged: cli.global.allow_nonconverged,
        global: json!({ "seed": seed, "jobs": jobs, "allow_nonconverged": cli.global.allow_nonconverged }),
        config,
    };
    match &cli.command {
        Command::Simulate(a) => simulate_cmd(&ctx, &ctx.resolve(a, "simulate")?),
        Command::Fit(a) => fit_cmd(&ctx, &ctx.resolve(a, "fit")?),
        Command::Cv(a) => cv_cmd(&ctx, &ctx.resolve(a, "cv")?),
        Command::Lagselect(a) => lagselect_cmd(&ctx, &ctx.resolve(a, "lagselect")?),
        Command::StudyConvergence(a) => study_cmd(&ctx, &ctx.resolve(a, "study-convergence")?),
        Command::Scan(a) => scan_cmd(&ctx, &ctx.resolve(a, "scan")?),
        Command::Rankcheck(a) => rankcheck_cmd(&ctx, &ctx.resolve(a, "rankcheck")?),
    }
}

fn required<'a, T>(v: &'a Option<T>, name: &str) -> CliResult<&'a T> {
    v.as_ref().ok_or_else(|| CliError::Usage(format!("--{name} is required (flag or config)")))
}

fn parse<T: std::str::FromStr<Err = BlinError>>(text: &str) -> CliResult<T> {
    text.parse().map_err(|e: BlinError| CliError::Usage(e.to_string()))
}

fn out_dir(out: &Option<PathBuf>) -> PathBuf {
    out.clone().unwrap_or_else(|| PathBuf::from("blin-out"))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    Ok(write_atomic(path, text.as_bytes())?)
}

fn manifest(ctx: &Context, command: &str, options: &impl Serialize, extra: Value) -> CliResult<Value> {
    let mut m = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "global": ctx.global,
        "options": serde_json::to_value(options).map_err(BlinError::from)?,
    });
    if let (Value::Object(m), Value::Object(extra)) = (&mut m, extra) {
        m.extend(extra);
    }
    Ok(m)
}

fn load_series(input: &Path, args: &IngestArgs) -> CliResult<(TensorSeries, crate::io::IngestReport)> {
    let label_maps = match &args.label_map {
        Some(p) => Some(read_label_map(open(p)?)?),
        None => None,
    };
    let opts = IngestOptions {
        center: args.center.unwrap_or(false),
        standardize: args.standardize.unwrap_or(false),
        difference: args.difference.unwrap_or(false),
        strict: args.strict.unwrap_or(false),
        label_maps,
    };
    Ok(ingest(input, &opts)?)
}

fn estimator_config(ctx: &Context, method: Method, a: &EstimatorArgs) -> EstimatorConfig {
    let d = EstimatorConfig::default();
    let folds = a.lambda_folds.unwrap_or(10);
    EstimatorConfig {
        method,
        eta: a.eta.map(Tolerance::Relative).unwrap_or(d.eta),
        max_iter: a.max_iter.unwrap_or(d.max_iter),
        lambda: a.lambda.map(LambdaChoice::Fixed).unwrap_or(LambdaChoice::CrossValidated { folds }),
        rank_a: a.rank_a.unwrap_or(d.rank_a),
        rank_b: a.rank_b.unwrap_or(d.rank_b),
        restarts: a.restarts.unwrap_or(d.restarts),
        seed: ctx.seed,
        element_budget: d.element_budget,
    }
}

fn default_lags(series: &TensorSeries) -> LagSpec {
    LagSpec::multi(vec![1; series.modes()]).expect("unit lags are valid")
}

fn lags_for(text: &Option<String>, series: &TensorSeries) -> CliResult<LagSpec> {
    let lags = match text {
        Some(t) => parse::<LagSpec>(t)?,
        None => default_lags(series),
    };
    if lags.per_mode().len() != series.modes() {
        return Err(CliError::Usage(format!("{} lags given for a {}-mode series", lags.per_mode().len(), series.modes())));
    }
    Ok(lags)
}

fn simulate_cmd(ctx: &Context, a: &SimulateArgs) -> CliResult<()> {
    let d = SimulationSpec::default();
    let spec = SimulationSpec {
        generator: a.generator.as_deref().map(parse::<Generator>).transpose()?.unwrap_or(d.generator),
        s: a.s.unwrap_or(d.s),
        l: a.l.unwrap_or(d.l),
        q_sparsity: a.q.unwrap_or(d.q_sparsity),
        target_r2: a.target_r2.unwrap_or(d.target_r2),
        horizon: a.horizon.unwrap_or(d.horizon),
        burn_in: a.burn_in,
        seed: ctx.seed,
    };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let reps = a.replications.unwrap_or(1);
    let dir = out_dir(&a.out);
    let scenario = spec.scenario()?;
    write_text(&dir.join("truth_a.csv"), &matrix_csv(&scenario.pair.a))?;
    write_text(&dir.join("truth_b.csv"), &matrix_csv(&scenario.pair.b))?;
    let mut files = Vec::new();
    for rep in 0..reps {
        let series = generate(&spec, &scenario.pair, rep as u64)?;
        let name = format!("series_{rep:03}.csv");
        write_text(&dir.join(&name), &long_csv_string(&series)?)?;
        files.push(name);
    }
    let m = manifest(
        ctx,
        "simulate",
        a,
        json!({ "spec": spec, "burn_in": spec.effective_burn_in(), "calibration": scenario.calibration, "series": files }),
    )?;
    write_json_atomic(&dir.join("manifest.json"), &m)?;
    println!(
        "wrote {reps} series to {} (scale {:.6}, large-sample R² {:.4})",
        dir.display(),
        scenario.calibration.scale,
        scenario.calibration.achieved_r2
    );
    Ok(())
}

fn fit_stationarity(fit: &InfluenceFit) -> f64 {
    match fit.kind {
        ModelKind::Blin => companion(&fit.pair, &fit.lags).spectral_radius,
        ModelKind::Bilinear => bilinear_companion_radius(&fit.pair, fit.lags.p_a()),
    }
}

fn fit_cmd(ctx: &Context, a: &FitArgs) -> CliResult<()> {
    let input = required(&a.input, "input")?;
    let method = a.method.as_deref().map(parse::<Method>).transpose()?.unwrap_or(Method::Bcd);
    let (series, report) = load_series(input, &a.ingest)?;
    let lags = lags_for(&a.lags, &series)?;
    let cfg = estimator_config(ctx, method, &a.estimator);
    let dir = out_dir(&a.out);
    if series.modes() == 2 {
        let panel = Panel::from_series(&series, &lags)?;
        let fit = fit_panel(&panel, &lags, &cfg)?;
        write_text(&dir.join("a.csv"), &matrix_csv(&fit.pair.a))?;
        write_text(&dir.join("b.csv"), &matrix_csv(&fit.pair.b))?;
        write_text(&dir.join("diag_effect.csv"), &matrix_csv(&fit.diag_effect()))?;
        let radius = fit_stationarity(&fit);
        let m = manifest(
            ctx,
            "fit",
            a,
            json!({
                "method": fit.method.name(),
                "kind": fit.kind,
                "lags": lags.per_mode(),
                "lambda": fit.lambda,
                "iterations": fit.iterations,
                "converged": fit.converged,
                "initial_criterion": fit.initial_criterion,
                "criterion_trace": fit.criterion_trace,
                "r2_in": fit.r2_in,
                "design_rank": fit.design_rank,
                "canonical_shift": fit.pair.canonical_shift,
                "spectral_radius": radius,
                "stationary": radius < 1.0,
                "restart_criteria": fit.restart_criteria,
                "warnings": fit.warnings,
                "ingest": report,
            }),
        )?;
        write_json_atomic(&dir.join("manifest.json"), &m)?;
        println!(
            "{} fit: R² {:.4}, {} iterations, converged {}",
            fit.method.name(),
            fit.r2_in,
            fit.iterations,
            fit.converged
        );
        ctx.check_converged(fit.converged, "the fit")
    } else {
        let fit = match method {
            Method::Bcd | Method::Exact => fit_multiblin(&series, &lags, &cfg)?,
            Method::Sparse => fit_multiblin_sparse(&series, &lags, &cfg)?.0,
            other => {
                return Err(CliError::Usage(format!("method {} supports two-mode data only", other.name())));
            }
        };
        write_multi_fit(&dir, &fit, &series)?;
        let m = manifest(
            ctx,
            "fit",
            a,
            json!({
                "method": fit.method.name(),
                "lags": lags.per_mode(),
                "dims": fit.dims,
                "lambda": fit.lambda,
                "iterations": fit.iterations,
                "converged": fit.converged,
                "initial_criterion": fit.initial_criterion,
                "criterion_trace": fit.criterion_trace,
                "r2_in": fit.r2_in,
                "warnings": fit.warnings,
                "ingest": report,
            }),
        )?;
        write_json_atomic(&dir.join("manifest.json"), &m)?;
        println!("{} fit: R² {:.4}, {} iterations, converged {}", fit.method.name(), fit.r2_in, fit.iterations, fit.converged);
        ctx.check_converged(fit.converged, "the fit")
    }
}

fn write_multi_fit(dir: &Path, fit: &MultiFit, series: &TensorSeries) -> CliResult<()> {
    for (k, net) in fit.networks.iter().enumerate() {
        let name = match k {
            0..=2 => format!("{}.csv", ["a", "b", "c"][k]),
            _ => format!("network_{}.csv", k + 1),
        };
        write_text(&dir.join(name), &matrix_csv(net))?;
    }
    let diag = TensorSeries::new(fit.dims.clone(), 1, fit.diag_effect())?;
    let diag = match series.labels() {
        Some(l) => diag.with_labels(l.to_vec())?,
        None => diag,
    };
    // Long layout with a single time index 0.
    write_text(&dir.join("diag_effect.csv"), &long_csv_string(&diag)?)
}

fn cv_cmd(ctx: &Context, a: &CvArgs) -> CliResult<()> {
    let input = required(&a.input, "input")?;
    let (series, _) = load_series(input, &a.ingest)?;
    series.require_two_mode()?;
    let lags = lags_for(&a.lags, &series)?;
    let folds = a.folds.unwrap_or(10);
    let methods: Vec<Method> = a
        .methods
        .as_deref()
        .unwrap_or("exact,sparse")
        .split(',')
        .map(|m| parse::<Method>(m.trim()))
        .collect::<CliResult<_>>()?;
    let configs: Vec<EstimatorConfig> = methods.iter().map(|&m| estimator_config(ctx, m, &a.estimator)).collect();
    let report = kfold_cv(&series, &lags, &configs, folds, ctx.seed)?;
    let dir = out_dir(&a.out);
    let mut assign = String::from("t,fold\n");
    for (t, f) in report.times.iter().zip(&report.assignment) {
        assign.push_str(&format!("{t},{f}\n"));
    }
    write_text(&dir.join("folds.csv"), &assign)?;
    let (s, l) = series.require_two_mode()?;
    let mut preds = String::from("method,t,i,j,value\n");
    for m in &report.methods {
        for (t, p) in report.times.iter().zip(&m.predictions) {
            for j in 0..l {
                for i in 0..s {
                    preds.push_str(&format!("{},{t},{i},{j},{}\n", m.label, fmt_f64(p[(i, j)])));
                }
            }
        }
    }
    write_text(&dir.join("predictions.csv"), &preds)?;
    let m = manifest(ctx, "cv", a, json!({ "lags": lags.per_mode(), "report": report }))?;
    write_json_atomic(&dir.join("manifest.json"), &m)?;
    for m in &report.methods {
        println!("{:<14} out-of-sample R² {:.4}", m.label, m.r2_out);
    }
    let bad: usize = report.methods.iter().map(|m| m.nonconverged_folds).sum();
    ctx.check_converged(bad == 0, &format!("{bad} fold fits"))
}

fn lag_grid(a: &LagselectArgs, series: &TensorSeries) -> CliResult<Vec<LagSpec>> {
    let k = series.modes();
    let grid: Vec<LagSpec> = if let Some(g) = &a.grid {
        g.split(';').filter(|c| !c.trim().is_empty()).map(parse::<LagSpec>).collect::<CliResult<_>>()?
    } else {
        let maxima: Vec<usize> = match &a.max_lags {
            Some(m) => parse::<LagSpec>(m)?.per_mode().to_vec(),
            None => vec![2; k],
        };
        let mut cells = vec![vec![]];
        for &m in &maxima {
            cells = cells.into_iter().flat_map(|c: Vec<usize>| (1..=m).map(move |p| [c.clone(), vec![p]].concat())).collect();
        }
        cells.into_iter().map(|c| LagSpec::multi(c).expect("lags start at 1")).collect()
    };
    if grid.iter().any(|g| g.per_mode().len() != k) {
        return Err(CliError::Usage(format!("every lag cell needs {k} entries")));
    }
    Ok(grid)
}

fn lagselect_cmd(ctx: &Context, a: &LagselectArgs) -> CliResult<()> {
    let input = required(&a.input, "input")?;
    let (series, _) = load_series(input, &a.ingest)?;
    let grid = lag_grid(a, &series)?;
    let cfg = estimator_config(ctx, Method::Sparse, &a.estimator);
    let cells = aic_select(&series, &grid, &cfg)?;
    let dir = out_dir(&a.out);
    let mut text = String::from("rank,lags,aic,r2,nonzeros,rss,n_obs,lambda,flagged\n");
    for (r, c) in cells.iter().enumerate() {
        text.push_str(&format!(
            "{},\"{}\",{},{},{},{},{},{},{}\n",
            r + 1,
            c.lags,
            fmt_f64(c.aic),
            fmt_f64(c.r2),
            c.nonzeros,
            fmt_f64(c.rss),
            c.n_obs,
            c.lambda.map(fmt_f64).unwrap_or_default(),
            c.flagged
        ));
    }
    write_text(&dir.join("aic.csv"), &text)?;
    write_json_atomic(&dir.join("manifest.json"), &manifest(ctx, "lagselect", a, json!({ "cells": cells }))?)?;
    for c in cells.iter().take(5) {
        println!("{:<10} AIC {:>14.3}  R² {:.4}  nonzeros {}", c.lags.to_string(), c.aic, c.r2, c.nonzeros);
    }
    Ok(())
}

fn study_cmd(ctx: &Context, a: &StudyArgs) -> CliResult<()> {
    let d = StudyConfig::default();
    let t_grid = match &a.t_grid {
        Some(g) => g
            .split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|e| CliError::Usage(format!("t-grid {t:?}: {e}"))))
            .collect::<CliResult<Vec<_>>>()?,
        None => d.t_grid.clone(),
    };
    let cfg = StudyConfig {
        s: a.s.unwrap_or(d.s),
        l: a.l.unwrap_or(d.l),
        t_grid,
        reps: a.reps.unwrap_or(d.reps),
        seed: ctx.seed,
        restarts: a.restarts.unwrap_or(d.restarts),
        max_iter: a.max_iter.unwrap_or(d.max_iter),
        ..d
    };
    let result = convergence_study(&cfg)?;
    let dir = out_dir(&a.out);
    let mut buf = Vec::new();
    result.write_rows_csv(&mut buf)?;
    write_atomic(&dir.join("study.csv"), &buf)?;
    let m = manifest(ctx, "study-convergence", a, json!({ "config": cfg, "slopes": result.slopes }))?;
    write_json_atomic(&dir.join("slopes.json"), &m)?;
    for e in &result.slopes {
        println!(
            "{:?} data, {:?} fit, {:?}: slope {:.3} (se {:.3}, {} excluded)",
            e.generator, e.method, e.metric, e.slope, e.se, e.excluded
        );
    }
    Ok(())
}

fn read_matrix(path: &Path) -> CliResult<DMatrix<f64>> {
    Ok(read_matrix_csv(open(path)?)?)
}

fn scan_cmd(ctx: &Context, a: &ScanArgs) -> CliResult<()> {
    let kind = a.model.as_deref().map(parse::<ModelKind>).transpose()?.unwrap_or(ModelKind::Blin);
    let no_ingest = IngestArgs::default();
    let (train, _) = load_series(required(&a.train, "train")?, &no_ingest)?;
    let (test, _) = load_series(required(&a.test, "test")?, &no_ingest)?;
    let truth = InfluencePair::new(read_matrix(required(&a.truth_a, "truth-a")?)?, read_matrix(required(&a.truth_b, "truth-b")?)?)?;
    let lags = lags_for(&a.lags, &train)?;
    let method = match kind {
        ModelKind::Blin => Method::Exact,
        ModelKind::Bilinear => Method::Bilinear,
    };
    let cfg = estimator_config(ctx, method, &a.estimator);
    let (train_panel, test_panel) = (Panel::from_series(&train, &lags)?, Panel::from_series(&test, &lags)?);
    let fit = fit_panel(&train_panel, &lags, &cfg)?;
    let fitted = match kind {
        ModelKind::Blin => fit.pair.clone(),
        ModelKind::Bilinear => align_scale(&truth, &fit.pair),
    };
    let n = a.points.unwrap_or(101).max(2);
    let grid: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
    let curve = likelihood_line_scan(&train_panel, &test_panel, &truth, &fitted, &grid, kind)?;
    let dir = out_dir(&a.out);
    let mut text = String::from("xi,r2_in,r2_out\n");
    for p in &curve {
        text.push_str(&format!("{},{},{}\n", fmt_f64(p.xi), fmt_f64(p.r2_in), fmt_f64(p.r2_out)));
    }
    write_text(&dir.join("scan.csv"), &text)?;
    let m = manifest(ctx, "scan", a, json!({ "converged": fit.converged, "iterations": fit.iterations }))?;
    write_json_atomic(&dir.join("manifest.json"), &m)?;
    println!("scanned {n} points; fitted endpoint in-sample R² {:.4}", curve.last().map_or(f64::NAN, |p| p.r2_in));
    ctx.check_converged(fit.converged, "the fit")
}

fn rankcheck_cmd(ctx: &Context, a: &RankcheckArgs) -> CliResult<()> {
    let series = match &a.input {
        Some(p) => load_series(p, &a.ingest)?.0,
        None => {
            let (s, l, t) = (a.s.unwrap_or(3), a.l.unwrap_or(3), a.horizon.unwrap_or(4));
            let mut rng = replication_rng(ctx.seed, 0);
            let slices: Vec<_> = (0..t).map(|_| standard_normal_matrix(&mut rng, s, l)).collect();
            TensorSeries::from_matrices(&slices)?
        }
    };
    let lags = lags_for(&a.lags, &series)?;
    let check = design_rank_check(&series, &lags)?;
    let m = manifest(ctx, "rankcheck", a, json!({ "dims": series.dims(), "horizon": series.horizon(), "lags": lags.per_mode(), "result": check }))?;
    if let Some(out) = &a.out {
        write_json_atomic(&out.join("rankcheck.json"), &m)?;
    }
    println!("{}", serde_json::to_string_pretty(&check).map_err(BlinError::from)?);
    Ok(())
}
