//! JSON documents written by the command-line tool. Every document carries
//! `schema_version` and the resolved configuration that produced it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use hawkesboot_core::bootstrap::BootstrapRun;
use hawkesboot_core::kernels::Shape;
use hawkesboot_core::likelihood::{asymptotic_ci, standard_error, Coord, FitResult};
use hawkesboot_core::linalg::Matrix;
use hawkesboot_core::{KernelFamily, Params};

pub const SCHEMA_VERSION: u32 = 1;

pub fn family_name(family: KernelFamily) -> &'static str {
    match family {
        KernelFamily::Poisson => "poisson",
        KernelFamily::Exponential => "exp",
        KernelFamily::PowerLaw => "powerlaw",
    }
}

/// Parameters in both the natural and the branching-ratio form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsDoc {
    pub kernel: String,
    pub mu: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub a: f64,
}

impl From<&Params> for ParamsDoc {
    fn from(p: &Params) -> Self {
        let (alpha, beta, delta) = match p.kernel().shape() {
            Shape::None => (None, None, None),
            Shape::Exponential { alpha, beta } => (Some(alpha), Some(beta), None),
            Shape::PowerLaw { alpha, beta, delta } => (Some(alpha), Some(beta), Some(delta)),
        };
        ParamsDoc {
            kernel: family_name(p.family()).into(),
            mu: p.mu(),
            alpha,
            beta,
            delta,
            a: p.branching_ratio(),
        }
    }
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub estimate: f64,
    pub std_error: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SanityDoc {
    pub stationary: bool,
    pub hessian_negative_definite: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDoc {
    pub theta_hat: ParamsDoc,
    /// estimation coordinates: `(μ, a, β)`, `(μ, α, β, δ)` or `(μ)`
    pub coordinates: Vec<String>,
    pub estimate: Vec<f64>,
    pub loglik: f64,
    pub score: Vec<f64>,
    pub score_norm: f64,
    pub hessian: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hessian_natural: Option<Vec<Vec<f64>>>,
    pub converged: bool,
    pub iterations: usize,
    pub sanity: SanityDoc,
    pub level: f64,
    /// empty when `−H` is not positive definite
    pub asymptotic_ci: BTreeMap<String, Interval>,
}

pub fn fit_coordinates(family: KernelFamily) -> Vec<Coord> {
    match family {
        KernelFamily::Poisson => vec![Coord::Mu],
        KernelFamily::Exponential => Coord::EXPONENTIAL.to_vec(),
        KernelFamily::PowerLaw => vec![Coord::Mu, Coord::Alpha, Coord::Beta, Coord::Delta, Coord::BranchingRatio],
    }
}

impl FitDoc {
    pub fn new(fit: &FitResult, level: f64, z: f64) -> Self {
        let family = fit.family();
        let labels = match family {
            KernelFamily::Poisson => vec!["mu"],
            KernelFamily::Exponential => vec!["mu", "a", "beta"],
            KernelFamily::PowerLaw => vec!["mu", "alpha", "beta", "delta"],
        };
        let mut cis = BTreeMap::new();
        for c in fit_coordinates(family) {
            if let (Ok(se), Ok((lower, upper)), Ok(estimate)) =
                (standard_error(fit, c), asymptotic_ci(fit, c, z), c.value(&fit.theta_hat))
            {
                cis.insert(
                    c.label().to_string(),
                    Interval {
                        estimate,
                        std_error: se,
                        lower,
                        upper,
                    },
                );
            }
        }
        FitDoc {
            theta_hat: (&fit.theta_hat).into(),
            coordinates: labels.into_iter().map(String::from).collect(),
            estimate: fit.theta_hat.fit_vec(),
            loglik: fit.loglik,
            score_norm: fit.score.iter().fold(0.0, |m: f64, g| m.max(g.abs())),
            score: fit.score.clone(),
            hessian: rows(&fit.hessian),
            hessian_natural: (family == KernelFamily::Exponential).then(|| rows(&fit.hessian_natural())),
            converged: fit.converged,
            iterations: fit.iterations,
            sanity: SanityDoc {
                stationary: fit.sanity.stationary,
                hessian_negative_definite: fit.sanity.hessian_nd,
                pass: fit.sanity.overall,
            },
            level,
            asymptotic_ci: cis,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub data: String,
    pub pre_sample: Option<String>,
    pub kernel: String,
    pub horizon: f64,
    pub init: Option<Vec<f64>>,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutput {
    pub schema_version: u32,
    pub config: FitConfig,
    pub n_events: usize,
    pub n_pre_sample: usize,
    pub fit: FitDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub data: String,
    pub pre_sample: Option<String>,
    pub horizon: f64,
    pub scheme: String,
    pub replications: usize,
    pub level: f64,
    pub seed: u64,
    pub restricted: Option<Vec<f64>>,
    pub null: Option<Vec<f64>>,
    pub ellipsoid: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub replication: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidDoc {
    /// `λ = (μ, α, β)`
    pub natural: bool,
    /// `θ = (μ, a, β)`
    pub branching: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullDoc {
    pub theta0: ParamsDoc,
    pub lr: f64,
    pub p_value: f64,
    pub ellipsoid_covers: EllipsoidDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOutput {
    pub schema_version: u32,
    pub config: BootstrapConfig,
    pub fit: FitDoc,
    pub theta_star: ParamsDoc,
    pub requested: usize,
    pub retained: usize,
    pub discarded: usize,
    pub unreliable: bool,
    pub warnings: Vec<String>,
    pub failures: Vec<Failure>,
    /// retained draws in estimation coordinates, replication order
    pub draws: Vec<Vec<f64>>,
    pub lr_stars: Vec<f64>,
    pub n_stars: Vec<usize>,
    pub percentile_ci: BTreeMap<String, [f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub null: Option<NullDoc>,
}

impl BootstrapOutput {
    pub fn draws(run: &BootstrapRun) -> Vec<Vec<f64>> {
        run.theta_stars.iter().map(Params::fit_vec).collect()
    }

    pub fn failures(run: &BootstrapRun) -> Vec<Failure> {
        run.failures
            .iter()
            .map(|(b, r)| Failure {
                replication: *b,
                reason: r.clone(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseConfig {
    pub data: Option<String>,
    pub pre_sample: Option<String>,
    pub residuals: Option<String>,
    pub kernel: Option<String>,
    pub theta: Option<Vec<f64>>,
    pub max_lag: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsDoc {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsOutput {
    pub schema_version: u32,
    pub config: DiagnoseConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<ParamsDoc>,
    pub n: usize,
    pub mean: f64,
    pub ks: KsDoc,
    pub band: f64,
    pub acf_outside_band: usize,
    pub acf_squared_outside_band: usize,
    pub files: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use hawkesboot_core::likelihood::{fit_mle, FitOptions};
    use hawkesboot_core::simulate::simulate_thinning;

    #[test]
    fn both_parameterizations() {
        let p = Params::exponential(0.5, 2.5, 5.0).unwrap();
        let d = ParamsDoc::from(&p);
        assert_eq!((d.mu, d.alpha, d.beta, d.a), (0.5, Some(2.5), Some(5.0), 0.5));
        let json = serde_json::to_value(&d).unwrap();
        assert!(json.get("delta").is_none());
    }

    #[test]
    fn fit_document() {
        let truth = Params::exponential(0.5, 2.5, 5.0).unwrap();
        let h = simulate_thinning(&truth, 200.0, 100.0, 3).unwrap();
        let fit = fit_mle(&h, KernelFamily::Exponential, None, &FitOptions::default()).unwrap();
        let doc = FitDoc::new(&fit, 0.95, 1.959963984540054);
        assert_eq!(doc.estimate.len(), 3);
        assert_eq!(doc.hessian.len(), 3);
        assert!(doc.score_norm < 1e-6);
        if doc.sanity.pass {
            for k in ["mu", "alpha", "beta", "a"] {
                let ci = &doc.asymptotic_ci[k];
                assert!(ci.lower < ci.estimate && ci.estimate < ci.upper);
            }
        }
    }
}
