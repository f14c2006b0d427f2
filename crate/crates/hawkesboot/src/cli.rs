//! Command-line front end.
//!
//! Exit codes: 0 success, 1 numeric failure (non-convergence, sanity
//! refusal), 2 usage or IO error.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use hawkesboot_core::bootstrap::{bootstrap_ellipsoid_cover, bootstrap_lr_pvalue, percentile_ci, EllipsoidConstruction, Scheme};
use hawkesboot_core::likelihood::{fit_mle, lr_statistic, FitOptions, FitResult, Parameterization};
use hawkesboot_core::simulate::{simulate_thinning, simulate_timechange, DEFAULT_BURN_IN};
use hawkesboot_core::timechange::transformed_waiting_times;
use hawkesboot_core::{Error, EventSeries, KernelFamily, Params};

use crate::critical::normal_two_sided;
use crate::diagnose::{default_max_lag, diagnose, write_diagnostics, DiagnoseError};
use crate::export::{rates_csv, render_summary, render_text, TableKind};
use crate::io::{load_series, read_value_file, write_series, IngestError};
use crate::montecarlo::{run_coverage_experiment, run_sanity_study, standard_model, ConfigError, McConfig, ModelSpec};
use crate::parallel::{run_bootstrap, with_threads};
use crate::report::{
    family_name, fit_coordinates, BootstrapConfig, BootstrapOutput, DiagnoseConfig, EllipsoidDoc, FitConfig, FitDoc,
    FitOutput, NullDoc, ParamsDoc, SCHEMA_VERSION,
};

#[derive(Debug, Parser)]
#[command(name = "hawkesboot", version, about = "Bootstrap inference for Hawkes processes")]
pub struct Cli {
    /// worker threads (0 = all cores); results do not depend on it
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a Hawkes process and write its event times
    Simulate(SimulateArgs),
    /// Maximum-likelihood fit of an event file
    Fit(FitArgs),
    /// Bootstrap confidence intervals, ellipsoids and LR p-value
    Bootstrap(BootstrapArgs),
    /// Monte Carlo coverage and size experiment
    Mc(McArgs),
    /// KS test, QQ pairs and autocorrelations of transformed waiting times
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Method {
    Thinning,
    Timechange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Exp,
    Powerlaw,
    Poisson,
}

impl KernelArg {
    fn family(self) -> KernelFamily {
        match self {
            KernelArg::Exp => KernelFamily::Exponential,
            KernelArg::Powerlaw => KernelFamily::PowerLaw,
            KernelArg::Poisson => KernelFamily::Poisson,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EllipsoidArg {
    WaldQuantile,
    BootstrapCovariance,
}

impl EllipsoidArg {
    fn name(self) -> &'static str {
        match self {
            EllipsoidArg::WaldQuantile => "wald-quantile",
            EllipsoidArg::BootstrapCovariance => "bootstrap-covariance",
        }
    }

    fn construction(self) -> EllipsoidConstruction {
        match self {
            EllipsoidArg::WaldQuantile => EllipsoidConstruction::WaldQuantile,
            EllipsoidArg::BootstrapCovariance => EllipsoidConstruction::BootstrapCovariance,
        }
    }
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    Scheme::parse(&s.to_ascii_lowercase()).ok_or_else(|| format!("unknown scheme `{s}` (expected prfb, npfb, prrb or nprb)"))
}

/// Comma-separated parameter vector such as `0.5,2.5,5`.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector(pub Vec<f64>);

fn parse_vector(s: &str) -> Result<Vector, String> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| format!("`{x}` is not a number")))
        .collect::<Result<_, _>>()
        .map(Vector)
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("params").required(true).args(["model", "mu"]))]
pub struct SimulateArgs {
    /// one of the standard models 1A..3C
    #[arg(long, conflicts_with_all = ["mu", "alpha", "beta", "delta"])]
    pub model: Option<String>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long, requires = "beta")]
    pub alpha: Option<f64>,
    #[arg(long, requires = "alpha")]
    pub beta: Option<f64>,
    /// power-law exponent; selects the kernel α(x+β)^(−δ)
    #[arg(long, requires = "alpha")]
    pub delta: Option<f64>,
    /// horizon
    #[arg(long = "T")]
    pub horizon: f64,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    pub burn_in: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "thinning")]
    pub method: Method,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct DataArgs {
    /// event file: one time per line, or CSV with a `t` column
    #[arg(long)]
    pub data: PathBuf,
    /// pre-sample history; defaults to `<stem>.presample.txt` when present
    #[arg(long)]
    pub pre_sample: Option<PathBuf>,
    /// defaults to the file's `# horizon` line, else the last event
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long, value_enum, default_value = "exp")]
    pub kernel: KernelArg,
    /// starting point in natural coordinates, comma separated
    #[arg(long, value_parser = parse_vector)]
    pub init: Option<Vector>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// JSON output; stdout when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: Scheme,
    #[arg(long = "B", default_value_t = 199)]
    pub replications: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// generate bootstrap samples under θ₀ (natural coordinates)
    #[arg(long, value_parser = parse_vector)]
    pub restricted: Option<Vector>,
    /// θ₀ for the LR test and ellipsoid verdicts; defaults to --restricted
    #[arg(long, value_parser = parse_vector)]
    pub null: Option<Vector>,
    #[arg(long, value_enum, default_value = "wald-quantile")]
    pub ellipsoid: EllipsoidArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct McArgs {
    /// TOML configuration; defaults apply to missing keys
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long = "B")]
    pub bootstrap_reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub level: Option<f64>,
    /// comma-separated standard model labels
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub horizons: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub schemes: Option<Vec<String>>,
    /// only count sanity-check failures over this many attempts per cell
    #[arg(long)]
    pub sanity_attempts: Option<usize>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["data", "residuals"]))]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, requires = "data")]
    pub pre_sample: Option<PathBuf>,
    #[arg(long, requires = "data")]
    pub horizon: Option<f64>,
    #[arg(long, value_enum, default_value = "exp")]
    pub kernel: KernelArg,
    /// parameters in natural coordinates; fitted when absent
    #[arg(long, value_parser = parse_vector, requires = "data")]
    pub theta: Option<Vector>,
    /// transformed waiting times, one per line
    #[arg(long)]
    pub residuals: Option<PathBuf>,
    #[arg(long)]
    pub max_lag: Option<usize>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Numeric(_) => 1,
            CliError::Usage(_) | CliError::Io(_) => 2,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::Domain { .. } | Error::InvalidSeries(_) | Error::NonStationary(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Series(inner) => inner.into(),
            other => CliError::Io(other.to_string()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<DiagnoseError> for CliError {
    fn from(e: DiagnoseError) -> Self {
        match e {
            DiagnoseError::Core(inner) => inner.into(),
            other => CliError::Io(other.to_string()),
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_error(path, e))
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    match out {
        Some(path) => write_file(path, &text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

fn check_level(level: f64) -> Result<(), CliError> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--level must lie in (0, 1), got {level}")))
    }
}

fn path_string(p: &Path) -> String {
    p.display().to_string()
}

fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    if !(args.horizon > 0.0 && args.horizon.is_finite()) {
        return Err(CliError::Usage(format!("--T must be positive, got {}", args.horizon)));
    }
    let theta = match (&args.model, args.mu) {
        (Some(label), _) => standard_model(label)
            .ok_or_else(|| CliError::Usage(format!("unknown model `{label}` (expected 1A..3C)")))?
            .params()?,
        (None, Some(mu)) => match (args.alpha, args.beta, args.delta) {
            (None, None, None) => Params::poisson(mu)?,
            (Some(alpha), Some(beta), None) => Params::exponential(mu, alpha, beta)?,
            (Some(alpha), Some(beta), Some(delta)) => Params::power_law(mu, alpha, beta, delta)?,
            _ => return Err(CliError::Usage("--alpha and --beta go together".into())),
        },
        (None, None) => return Err(CliError::Usage("give --model or --mu".into())),
    };
    if !theta.stationary() {
        eprintln!(
            "warning: branching ratio {} >= 1, the simulated path is explosive",
            theta.branching_ratio()
        );
    }
    let series = match args.method {
        Method::Thinning => simulate_thinning(&theta, args.horizon, args.burn_in, args.seed)?,
        Method::Timechange => simulate_timechange(&theta, args.horizon, args.burn_in, args.seed)?,
    };
    write_series(&args.out, &series)?;
    eprintln!(
        "wrote {} events ({} pre-sample) to {}",
        series.len(),
        series.pre_sample().len(),
        args.out.display()
    );
    Ok(())
}

fn load(args: &DataArgs) -> Result<EventSeries, CliError> {
    if let Some(t) = args.horizon {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::Usage(format!("--horizon must be positive, got {t}")));
        }
    }
    Ok(load_series(&args.data, args.pre_sample.as_deref(), args.horizon)?)
}

fn fit_series(h: &EventSeries, args: &DataArgs) -> Result<FitResult, CliError> {
    let family = args.kernel.family();
    let init = match &args.init {
        Some(v) => Some(Params::from_natural_vec(family, &v.0)?),
        None => None,
    };
    Ok(fit_mle(h, family, init, &FitOptions::default())?)
}

fn fit(args: &FitArgs) -> Result<(), CliError> {
    check_level(args.level)?;
    let h = load(&args.data)?;
    let result = fit_series(&h, &args.data)?;
    let output = FitOutput {
        schema_version: SCHEMA_VERSION,
        config: FitConfig {
            data: path_string(&args.data.data),
            pre_sample: args.data.pre_sample.as_deref().map(path_string),
            kernel: family_name(args.data.kernel.family()).into(),
            horizon: h.horizon(),
            init: args.data.init.clone().map(|v| v.0),
            level: args.level,
        },
        n_events: h.len(),
        n_pre_sample: h.pre_sample().len(),
        fit: FitDoc::new(&result, args.level, normal_two_sided(args.level)),
    };
    emit_json(&output, args.out.as_deref())?;
    if !result.converged {
        return Err(CliError::Numeric("optimizer did not converge; output written anyway".into()));
    }
    if !result.sanity.overall {
        eprintln!("warning: fit fails the sanity check (stationarity or negative-definite Hessian)");
    }
    Ok(())
}

fn bootstrap(args: &BootstrapArgs) -> Result<(), CliError> {
    check_level(args.level)?;
    if args.replications < 2 {
        return Err(CliError::Usage(format!("--B must be at least 2, got {}", args.replications)));
    }
    let family = args.data.kernel.family();
    let h = load(&args.data)?;
    let result = fit_series(&h, &args.data)?;
    let mut warnings = Vec::new();
    if !result.converged {
        return Err(CliError::Numeric("fit of the original data did not converge".into()));
    }
    let mut scheme = args.scheme;
    if let Some(v) = &args.restricted {
        scheme = scheme.restricted(Params::from_natural_vec(family, &v.0)?);
    }
    if !result.sanity.overall {
        let msg = format!(
            "fit fails the sanity check (branching ratio {:.4}, negative-definite Hessian: {})",
            result.theta_hat.branching_ratio(),
            result.sanity.hessian_nd
        );
        if scheme.name().ends_with("rb") {
            return Err(CliError::Numeric(format!(
                "{msg}; the recursive bootstrap needs a stationary fit, use prfb or npfb"
            )));
        }
        eprintln!("warning: {msg}; the fixed-intensity bootstrap proceeds");
        warnings.push(msg);
    }
    let run = run_bootstrap(&h, &result, scheme, args.replications, args.seed)?;
    if run.unreliable() {
        let msg = format!("{} of {} bootstrap fits discarded; results unreliable", run.discarded, run.requested);
        eprintln!("warning: {msg}");
        warnings.push(msg);
    }
    let mut cis = std::collections::BTreeMap::new();
    for c in fit_coordinates(family) {
        if let Ok((lo, hi)) = percentile_ci(&run, c, args.level) {
            cis.insert(c.label().to_string(), [lo, hi]);
        }
    }
    let null_vec = args.null.clone().or_else(|| args.restricted.clone()).map(|v| v.0);
    let null = match &null_vec {
        Some(v) => {
            let theta0 = Params::from_natural_vec(family, v)?;
            let lr = lr_statistic(&h, &theta0, &result)?;
            let covers = if family == KernelFamily::Exponential {
                let cover = |par| bootstrap_ellipsoid_cover(&run, &result, &theta0, par, args.level, args.ellipsoid.construction());
                EllipsoidDoc {
                    natural: cover(Parameterization::Natural)?,
                    branching: cover(Parameterization::Branching)?,
                }
            } else {
                EllipsoidDoc {
                    natural: false,
                    branching: false,
                }
            };
            Some(NullDoc {
                theta0: (&theta0).into(),
                lr,
                p_value: bootstrap_lr_pvalue(&run, lr),
                ellipsoid_covers: covers,
            })
        }
        None => None,
    };
    let output = BootstrapOutput {
        schema_version: SCHEMA_VERSION,
        config: BootstrapConfig {
            data: path_string(&args.data.data),
            pre_sample: args.data.pre_sample.as_deref().map(path_string),
            horizon: h.horizon(),
            scheme: args.scheme.name().into(),
            replications: args.replications,
            level: args.level,
            seed: args.seed,
            restricted: args.restricted.clone().map(|v| v.0),
            null: null_vec,
            ellipsoid: args.ellipsoid.name().into(),
        },
        fit: FitDoc::new(&result, args.level, normal_two_sided(args.level)),
        theta_star: (&run.theta_star).into(),
        requested: run.requested,
        retained: run.effective(),
        discarded: run.discarded,
        unreliable: run.unreliable(),
        warnings,
        failures: BootstrapOutput::failures(&run),
        draws: BootstrapOutput::draws(&run),
        lr_stars: run.lr_stars.clone(),
        n_stars: run.n_stars.clone(),
        percentile_ci: cis,
        null,
    };
    emit_json(&output, args.out.as_deref())
}

fn mc_config(args: &McArgs) -> Result<McConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => McConfig::default(),
    };
    if let Some(v) = args.reps {
        cfg.reps = v;
    }
    if let Some(v) = args.bootstrap_reps {
        cfg.bootstrap_reps = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.level {
        cfg.level = v;
    }
    if let Some(labels) = &args.models {
        cfg.models = labels
            .iter()
            .map(|l| standard_model(l).ok_or_else(|| CliError::Usage(format!("unknown model `{l}`"))))
            .collect::<Result<Vec<ModelSpec>, _>>()?;
    }
    if let Some(v) = &args.horizons {
        cfg.horizons = v.clone();
    }
    if let Some(v) = &args.schemes {
        cfg.schemes = v.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn mc(args: &McArgs) -> Result<(), CliError> {
    let cfg = mc_config(args)?;
    let dir = &args.out_dir;
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    if let Some(attempts) = args.sanity_attempts {
        if attempts == 0 {
            return Err(CliError::Usage("--sanity-attempts must be positive".into()));
        }
        let report = run_sanity_study(&cfg, attempts)?;
        let mut csv = String::from("model,horizon,attempted,failures,rate,not_converged,not_stationary,not_negative_definite\n");
        for c in &report.cells {
            if let Some(s) = &c.study {
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    c.model, c.horizon, s.attempted, s.failures, s.rate, s.not_converged, s.not_stationary, s.not_negative_definite
                ));
            }
        }
        write_file(&dir.join("sanity.csv"), &csv)?;
        return emit_json(&report, Some(&dir.join("sanity.json")));
    }
    let report = run_coverage_experiment(&cfg)?;
    emit_json(&report, Some(&dir.join("report.json")))?;
    write_file(&dir.join("rates.csv"), &rates_csv(&report))?;
    for kind in TableKind::ALL {
        write_file(&dir.join(format!("{}.txt", kind.file_stem())), &render_text(&report, kind))?;
    }
    write_file(&dir.join("summary.txt"), &render_summary(&report))?;
    // wall time lives apart from the reproducible outputs
    let mut timings = String::from("model,horizon,seconds\n");
    for c in &report.cells {
        timings.push_str(&format!("{},{},{:.3}\n", c.model, c.horizon, c.wall_time));
        eprintln!("{} T={}: {} valid of {} attempted, {:.1}s", c.model, c.horizon, c.valid, c.attempted, c.wall_time);
    }
    write_file(&dir.join("timings.csv"), &timings)
}

fn diagnose_cmd(args: &DiagnoseArgs) -> Result<(), CliError> {
    let (values, theta, config_theta) = match (&args.data, &args.residuals) {
        (Some(data), None) => {
            let data_args = DataArgs {
                data: data.clone(),
                pre_sample: args.pre_sample.clone(),
                horizon: args.horizon,
                kernel: args.kernel,
                init: None,
            };
            let h = load(&data_args)?;
            let theta = match &args.theta {
                Some(v) => Params::from_natural_vec(args.kernel.family(), &v.0)?,
                None => fit_series(&h, &data_args)?.theta_hat,
            };
            (transformed_waiting_times(&theta, &h).values, Some(ParamsDoc::from(&theta)), args.theta.clone().map(|v| v.0))
        }
        (None, Some(path)) => (read_value_file(path)?, None, None),
        _ => return Err(CliError::Usage("give exactly one of --data and --residuals".into())),
    };
    let max_lag = args.max_lag.unwrap_or_else(|| default_max_lag(values.len()));
    let config = DiagnoseConfig {
        data: args.data.as_deref().map(path_string),
        pre_sample: args.pre_sample.as_deref().map(path_string),
        residuals: args.residuals.as_deref().map(path_string),
        kernel: args.data.as_ref().map(|_| family_name(args.kernel.family()).to_string()),
        theta: config_theta,
        max_lag,
    };
    let d = diagnose(&values, config, theta)?;
    write_diagnostics(&args.out_dir, &d)?;
    eprintln!(
        "n = {}, KS statistic {:.4}, p-value {:.4}",
        d.summary.n, d.summary.ks.statistic, d.summary.ks.p_value
    );
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let threads = cli.threads;
    with_threads(threads, move || match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Bootstrap(a) => bootstrap(a),
        Command::Mc(a) => mc(a),
        Command::Diagnose(a) => diagnose_cmd(a),
    })
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
