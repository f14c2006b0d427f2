//! Coverage, ellipsoid and likelihood-ratio size experiments on simulated
//! exponential Hawkes processes.
//!
//! Each (model, horizon) cell keeps drawing replications until `reps` of
//! them pass the sanity check or `max_attempts_factor · reps` attempts are
//! spent. Asymptotic and bootstrap procedures are evaluated on the same
//! valid replications. Replication `i` of cell `c` is seeded by
//! `derive_seed(derive_seed(seed, c), i)` so results are identical for any
//! thread count.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use hawkesboot_core::bootstrap::{
    bootstrap_ellipsoid_cover, bootstrap_lr_pvalue, percentile_ci, run_bootstrap, EllipsoidConstruction, Scheme,
};
use hawkesboot_core::likelihood::{
    asymptotic_ci, asymptotic_ellipsoid_cover, fit_mle, lr_statistic, Coord, FitOptions, FitResult, Parameterization,
};
use hawkesboot_core::rng::derive_seed;
use hawkesboot_core::simulate::{simulate_thinning, DEFAULT_BURN_IN};
use hawkesboot_core::{EventSeries, KernelFamily, Params};

use crate::critical::{chi_squared, normal_two_sided};

pub const SCHEMA_VERSION: u32 = 1;

/// One data-generating row: exponential kernel `(μ, α, β)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub label: String,
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl ModelSpec {
    pub fn new(label: &str, mu: f64, alpha: f64, beta: f64) -> Self {
        ModelSpec {
            label: label.to_string(),
            mu,
            alpha,
            beta,
        }
    }

    pub fn params(&self) -> hawkesboot_core::Result<Params> {
        Params::exponential(self.mu, self.alpha, self.beta)
    }
}

/// Unit mean intensity with branching ratios 0.2, 0.5, 0.8 and decay rates
/// 1, 5, 25.
pub fn standard_models() -> Vec<ModelSpec> {
    [
        ("1A", 0.8, 0.2, 1.0),
        ("1B", 0.8, 1.0, 5.0),
        ("1C", 0.8, 5.0, 25.0),
        ("2A", 0.5, 0.5, 1.0),
        ("2B", 0.5, 2.5, 5.0),
        ("2C", 0.5, 12.5, 25.0),
        ("3A", 0.2, 0.8, 1.0),
        ("3B", 0.2, 4.0, 5.0),
        ("3C", 0.2, 20.0, 25.0),
    ]
    .iter()
    .map(|&(label, mu, alpha, beta)| ModelSpec::new(label, mu, alpha, beta))
    .collect()
}

pub fn standard_model(label: &str) -> Option<ModelSpec> {
    standard_models().into_iter().find(|m| m.label.eq_ignore_ascii_case(label))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub models: Vec<ModelSpec>,
    pub horizons: Vec<f64>,
    /// valid replications per cell
    pub reps: usize,
    /// bootstrap replications `B`
    #[serde(alias = "B")]
    pub bootstrap_reps: usize,
    pub burn_in: f64,
    pub level: f64,
    pub seed: u64,
    pub schemes: Vec<String>,
    pub max_attempts_factor: usize,
    /// `wald-quantile` or `bootstrap-covariance`
    pub ellipsoid: String,
    /// impose the true value as bootstrap centre
    pub restricted: bool,
    /// percentile intervals and ellipsoids are skipped when false
    pub intervals: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            models: standard_models(),
            horizons: vec![50.0, 100.0, 200.0],
            reps: 500,
            bootstrap_reps: 199,
            burn_in: DEFAULT_BURN_IN,
            level: 0.95,
            seed: 1,
            schemes: Scheme::ALL.iter().map(|s| s.name().to_string()).collect(),
            max_attempts_factor: 5,
            ellipsoid: "wald-quantile".into(),
            restricted: false,
            intervals: true,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("reps must be positive")]
    Reps,
    #[error("bootstrap_reps must be at least 19, got {0}")]
    Bootstrap(usize),
    #[error("level must lie in (0, 1), got {0}")]
    Level(f64),
    #[error("unknown scheme `{0}`")]
    Scheme(String),
    #[error("unknown ellipsoid construction `{0}`")]
    Ellipsoid(String),
    #[error("horizon must be positive, got {0}")]
    Horizon(f64),
    #[error("max_attempts_factor must be positive")]
    Attempts,
    #[error("burn_in must be non-negative, got {0}")]
    BurnIn(f64),
}

impl McConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.reps == 0 {
            return Err(ConfigError::Reps);
        }
        if self.bootstrap_reps < 19 {
            return Err(ConfigError::Bootstrap(self.bootstrap_reps));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(ConfigError::Level(self.level));
        }
        if self.max_attempts_factor == 0 {
            return Err(ConfigError::Attempts);
        }
        if !(self.burn_in >= 0.0) {
            return Err(ConfigError::BurnIn(self.burn_in));
        }
        if let Some(&t) = self.horizons.iter().find(|&&t| !(t > 0.0 && t.is_finite())) {
            return Err(ConfigError::Horizon(t));
        }
        self.scheme_list()?;
        self.construction()?;
        Ok(())
    }

    /// Schemes with their index in the canonical order (used for seeding).
    pub fn scheme_list(&self) -> Result<Vec<(usize, Scheme)>, ConfigError> {
        self.schemes
            .iter()
            .map(|name| {
                let lower = name.to_ascii_lowercase();
                Scheme::ALL
                    .iter()
                    .position(|s| s.name() == lower)
                    .map(|i| (i, Scheme::ALL[i]))
                    .ok_or_else(|| ConfigError::Scheme(name.clone()))
            })
            .collect()
    }

    pub fn construction(&self) -> Result<EllipsoidConstruction, ConfigError> {
        match self.ellipsoid.as_str() {
            "wald-quantile" => Ok(EllipsoidConstruction::WaldQuantile),
            "bootstrap-covariance" => Ok(EllipsoidConstruction::BootstrapCovariance),
            other => Err(ConfigError::Ellipsoid(other.to_string())),
        }
    }
}

/// Why an attempted replication did not count.
#[derive(Debug, Clone, PartialEq)]
enum Attempt {
    Valid(Box<(EventSeries, FitResult, f64)>),
    Sanity,
    Optimizer,
}

/// Targets in report order.
pub const INTERVAL_TARGETS: [&str; 4] = ["mu", "alpha", "beta", "a"];
pub const ELLIPSOID_TARGETS: [&str; 2] = ["ce_theta", "ce_theta_tilde"];
pub const LR_TARGET: &str = "lr_size";

#[derive(Debug, Clone, Default)]
struct Verdicts {
    intervals: [bool; 4],
    ellipsoids: [bool; 2],
    lr_reject: bool,
    discarded: usize,
    failed: bool,
}

#[derive(Debug, Clone)]
struct Replication {
    asymptotic: Verdicts,
    schemes: Vec<Verdicts>,
}

/// One rate with its Monte Carlo standard error `√(p(1−p)/n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub model: String,
    pub horizon: f64,
    pub method: String,
    pub target: String,
    pub rate: f64,
    pub mc_se: f64,
    pub valid: usize,
    pub attempted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub model: String,
    pub horizon: f64,
    pub attempted: usize,
    pub valid: usize,
    pub sanity_failures: usize,
    /// fits whose likelihood fell below the true value's (local maximum)
    pub optimizer_failures: usize,
    pub sanity_failure_rate: f64,
    /// discarded bootstrap fits per scheme, summed over replications
    pub bootstrap_discards: BTreeMap<String, usize>,
    /// bootstrap runs that could not produce an interval or ellipsoid
    pub bootstrap_failures: BTreeMap<String, usize>,
    pub error: Option<String>,
    pub rows: Vec<RateRow>,
    /// seconds; kept out of serialized output so reruns compare equal
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub schema_version: u32,
    pub config: McConfig,
    pub cells: Vec<CellReport>,
}

impl McReport {
    pub fn rows(&self) -> impl Iterator<Item = &RateRow> {
        self.cells.iter().flat_map(|c| c.rows.iter())
    }

    pub fn rate(&self, model: &str, horizon: f64, method: &str, target: &str) -> Option<&RateRow> {
        self.rows()
            .find(|r| r.model == model && r.horizon == horizon && r.method == method && r.target == target)
    }
}

fn mc_se(p: f64, n: usize) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    (p * (1.0 - p) / n as f64).sqrt()
}

fn attempt(cfg: &McConfig, truth: &Params, horizon: f64, seed: u64) -> Attempt {
    let Ok(h) = simulate_thinning(truth, horizon, cfg.burn_in, seed) else {
        return Attempt::Sanity;
    };
    let Ok(fit) = fit_mle(&h, KernelFamily::Exponential, None, &FitOptions::default()) else {
        return Attempt::Sanity;
    };
    if !(fit.converged && fit.sanity.overall) {
        return Attempt::Sanity;
    }
    match lr_statistic(&h, truth, &fit) {
        Ok(lr) => Attempt::Valid(Box::new((h, fit, lr))),
        Err(_) => Attempt::Optimizer,
    }
}

struct Critical {
    z: f64,
    /// χ²₃ quantile shared by the ellipsoid and the LR test
    chi2: f64,
}

fn evaluate(
    cfg: &McConfig,
    schemes: &[(usize, Scheme)],
    construction: EllipsoidConstruction,
    crit: &Critical,
    truth: &Params,
    data: &(EventSeries, FitResult, f64),
    seed: u64,
) -> Replication {
    let (h, fit, lr) = data;
    let pars = [Parameterization::Natural, Parameterization::Branching];
    let mut asymptotic = Verdicts {
        lr_reject: *lr > crit.chi2,
        ..Verdicts::default()
    };
    if cfg.intervals {
        for (i, c) in Coord::EXPONENTIAL.iter().enumerate() {
            let v = c.value(truth).expect("exponential coordinate");
            asymptotic.intervals[i] = asymptotic_ci(fit, *c, crit.z).is_ok_and(|(lo, hi)| lo <= v && v <= hi);
        }
        for (k, par) in pars.iter().enumerate() {
            asymptotic.ellipsoids[k] = asymptotic_ellipsoid_cover(fit, truth, *par, crit.chi2).unwrap_or(false);
        }
    }
    let schemes = schemes
        .iter()
        .map(|&(index, scheme)| {
            let scheme = if cfg.restricted { scheme.restricted(*truth) } else { scheme };
            let run = match run_bootstrap(h, fit, scheme, cfg.bootstrap_reps, derive_seed(seed, 1 + index as u64)) {
                Ok(run) => run,
                Err(_) => {
                    return Verdicts {
                        failed: true,
                        ..Verdicts::default()
                    }
                }
            };
            let mut v = Verdicts {
                lr_reject: bootstrap_lr_pvalue(&run, *lr) <= 1.0 - cfg.level,
                discarded: run.discarded,
                ..Verdicts::default()
            };
            if cfg.intervals {
                for (i, c) in Coord::EXPONENTIAL.iter().enumerate() {
                    let t = c.value(truth).expect("exponential coordinate");
                    match percentile_ci(&run, *c, cfg.level) {
                        Ok((lo, hi)) => v.intervals[i] = lo <= t && t <= hi,
                        Err(_) => v.failed = true,
                    }
                }
                for (k, par) in pars.iter().enumerate() {
                    match bootstrap_ellipsoid_cover(&run, fit, truth, *par, cfg.level, construction) {
                        Ok(c) => v.ellipsoids[k] = c,
                        Err(_) => v.failed = true,
                    }
                }
            }
            v
        })
        .collect();
    Replication { asymptotic, schemes }
}

fn run_cell(cfg: &McConfig, cell: usize, model: &ModelSpec, horizon: f64) -> CellReport {
    let start = Instant::now();
    let mut report = CellReport {
        model: model.label.clone(),
        horizon,
        attempted: 0,
        valid: 0,
        sanity_failures: 0,
        optimizer_failures: 0,
        sanity_failure_rate: 0.0,
        bootstrap_discards: BTreeMap::new(),
        bootstrap_failures: BTreeMap::new(),
        error: None,
        rows: Vec::new(),
        wall_time: 0.0,
    };
    let truth = match model.params() {
        Ok(t) if t.stationary() => t,
        Ok(t) => {
            report.error = Some(format!("branching ratio {} is not below one", t.branching_ratio()));
            return report;
        }
        Err(e) => {
            report.error = Some(e.to_string());
            return report;
        }
    };
    let schemes = cfg.scheme_list().expect("validated");
    let construction = cfg.construction().expect("validated");
    let crit = Critical {
        z: normal_two_sided(cfg.level),
        chi2: chi_squared(cfg.level, 3),
    };
    let cell_seed = derive_seed(cfg.seed, cell as u64);
    let cap = cfg.max_attempts_factor * cfg.reps;

    // attempts in index order, batch by batch, until enough are valid
    let mut valid = Vec::with_capacity(cfg.reps);
    let mut next = 0;
    while valid.len() < cfg.reps && next < cap {
        let want = cfg.reps - valid.len();
        let batch = (want + want / 4 + 8).min(cap - next);
        let outcomes: Vec<(usize, Attempt)> = (next..next + batch)
            .into_par_iter()
            .map(|i| (i, attempt(cfg, &truth, horizon, derive_seed(cell_seed, i as u64))))
            .collect();
        next += batch;
        for (i, outcome) in outcomes {
            if valid.len() == cfg.reps {
                break;
            }
            report.attempted = i + 1;
            match outcome {
                Attempt::Valid(data) => valid.push((i, data)),
                Attempt::Sanity => report.sanity_failures += 1,
                Attempt::Optimizer => report.optimizer_failures += 1,
            }
        }
    }
    report.valid = valid.len();
    report.sanity_failure_rate = if report.attempted == 0 {
        0.0
    } else {
        report.sanity_failures as f64 / report.attempted as f64
    };
    if valid.len() < cfg.reps {
        report.error = Some(format!(
            "only {} valid replications within {} attempts",
            valid.len(),
            report.attempted
        ));
    }

    let results: Vec<Replication> = valid
        .par_iter()
        .map(|(i, data)| {
            let seed = derive_seed(cell_seed, *i as u64);
            evaluate(cfg, &schemes, construction, &crit, &truth, data, seed)
        })
        .collect();

    let n = results.len();
    let mut push = |method: &str, target: &str, hits: usize| {
        let rate = if n == 0 { f64::NAN } else { hits as f64 / n as f64 };
        report.rows.push(RateRow {
            model: model.label.clone(),
            horizon,
            method: method.to_string(),
            target: target.to_string(),
            rate,
            mc_se: mc_se(rate, n),
            valid: n,
            attempted: report.attempted,
        });
    };
    let tally = |pick: &dyn Fn(&Replication) -> bool| results.iter().filter(|r| pick(r)).count();
    let mut methods: Vec<(String, Box<dyn Fn(&Replication) -> &Verdicts>)> =
        vec![("asym".to_string(), Box::new(|r: &Replication| &r.asymptotic))];
    for (k, (_, scheme)) in schemes.iter().enumerate() {
        methods.push((scheme.name().to_string(), Box::new(move |r: &Replication| &r.schemes[k])));
    }
    for (name, get) in &methods {
        if cfg.intervals {
            for (i, target) in INTERVAL_TARGETS.iter().enumerate() {
                push(name, target, tally(&|r| get(r).intervals[i]));
            }
            for (k, target) in ELLIPSOID_TARGETS.iter().enumerate() {
                push(name, target, tally(&|r| get(r).ellipsoids[k]));
            }
        }
        push(name, LR_TARGET, tally(&|r| get(r).lr_reject));
    }
    for (k, (_, scheme)) in schemes.iter().enumerate() {
        let discards = results.iter().map(|r| r.schemes[k].discarded).sum();
        let failures = results.iter().filter(|r| r.schemes[k].failed).count();
        report.bootstrap_discards.insert(scheme.name().to_string(), discards);
        report.bootstrap_failures.insert(scheme.name().to_string(), failures);
    }
    report.wall_time = start.elapsed().as_secs_f64();
    report
}

/// Runs every (model, horizon) cell of the configuration.
pub fn run_coverage_experiment(cfg: &McConfig) -> Result<McReport, ConfigError> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for (m, model) in cfg.models.iter().enumerate() {
        for (t, &horizon) in cfg.horizons.iter().enumerate() {
            let cell = m * cfg.horizons.len() + t;
            cells.push(run_cell(cfg, cell, model, horizon));
        }
    }
    Ok(McReport {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        cells,
    })
}

/// Sanity-check failure frequency over a fixed number of attempts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SanityStudy {
    pub attempted: usize,
    pub failures: usize,
    pub not_converged: usize,
    pub not_stationary: usize,
    pub not_negative_definite: usize,
    pub rate: f64,
}

/// Counts fits that fail to converge, are non-stationary, or have a
/// Hessian that is not negative definite (a failing fit may count under
/// several reasons but once in `failures`).
pub fn sanity_failure_rate(model: &Params, horizon: f64, burn_in: f64, attempts: usize, seed: u64) -> SanityStudy {
    let verdicts: Vec<(bool, bool, bool)> = (0..attempts)
        .into_par_iter()
        .map(|i| {
            let fitted = simulate_thinning(model, horizon, burn_in, derive_seed(seed, i as u64))
                .and_then(|h| fit_mle(&h, KernelFamily::Exponential, None, &FitOptions::default()));
            match fitted {
                Ok(fit) => (fit.converged, fit.sanity.stationary, fit.sanity.hessian_nd),
                Err(_) => (false, false, false),
            }
        })
        .collect();
    let failures = verdicts.iter().filter(|(c, s, n)| !(c & s & n)).count();
    SanityStudy {
        attempted: attempts,
        failures,
        not_converged: verdicts.iter().filter(|v| !v.0).count(),
        not_stationary: verdicts.iter().filter(|v| !v.1).count(),
        not_negative_definite: verdicts.iter().filter(|v| !v.2).count(),
        rate: failures as f64 / attempts.max(1) as f64,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SanityCell {
    pub model: String,
    pub horizon: f64,
    pub error: Option<String>,
    pub study: Option<SanityStudy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SanityReport {
    pub schema_version: u32,
    pub config: McConfig,
    pub attempts: usize,
    pub cells: Vec<SanityCell>,
}

/// Sanity-check failure rates over `attempts` replications per cell, using
/// the same replication seeds as [`run_coverage_experiment`].
pub fn run_sanity_study(cfg: &McConfig, attempts: usize) -> Result<SanityReport, ConfigError> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for (m, model) in cfg.models.iter().enumerate() {
        for (t, &horizon) in cfg.horizons.iter().enumerate() {
            let cell_seed = derive_seed(cfg.seed, (m * cfg.horizons.len() + t) as u64);
            let (study, error) = match model.params() {
                Ok(p) if p.stationary() => (Some(sanity_failure_rate(&p, horizon, cfg.burn_in, attempts, cell_seed)), None),
                Ok(p) => (None, Some(format!("branching ratio {} is not below one", p.branching_ratio()))),
                Err(e) => (None, Some(e.to_string())),
            };
            cells.push(SanityCell {
                model: model.label.clone(),
                horizon,
                error,
                study,
            });
        }
    }
    Ok(SanityReport {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        attempts,
        cells,
    })
}
