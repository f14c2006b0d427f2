//! Fixed- and recursive-intensity bootstraps with parametric or residual
//! resampled transformed waiting times.
//!
//! Every scheme draws transformed waits `v*ᵢ`, accumulates them into
//! `s*ᵢ`, and maps them to event times through an inverse integrated
//! intensity: the data-built `Λ̂` (fixed) or the path-built `Λ*`
//! (recursive). Replication `b` draws from its own RNG stream, so runs can
//! be split across threads with identical results.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::intensity::{EventSeries, Params};
use crate::likelihood::{lr_from, maximize, Coord, FitOptions, FitResult, LikelihoodTarget, Order, Parameterization};
use crate::linalg::{inverse_pd, quadratic_form, Matrix};
use crate::rng::{stream, StreamRng};
use crate::timechange::{transformed_waiting_times, FixedCompensator, RecursiveInverter, TransformedWaits};

/// Default number of bootstrap replications.
pub const DEFAULT_REPLICATIONS: usize = 199;

/// Share of discarded replications above which a run is flagged.
pub const UNRELIABLE_DISCARD_SHARE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IntensityMode {
    Fixed,
    Recursive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WaitMode {
    Parametric,
    NonParametric,
}

/// Bootstrap true value `θ*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Center {
    /// the unrestricted MLE
    Unrestricted,
    /// a null value imposed on the generation
    Restricted(Params),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scheme {
    pub intensity: IntensityMode,
    pub waits: WaitMode,
    pub center: Center,
}

impl Scheme {
    pub const PRFB: Scheme = Scheme::unrestricted(IntensityMode::Fixed, WaitMode::Parametric);
    pub const NPFB: Scheme = Scheme::unrestricted(IntensityMode::Fixed, WaitMode::NonParametric);
    pub const PRRB: Scheme = Scheme::unrestricted(IntensityMode::Recursive, WaitMode::Parametric);
    pub const NPRB: Scheme = Scheme::unrestricted(IntensityMode::Recursive, WaitMode::NonParametric);
    pub const ALL: [Scheme; 4] = [Scheme::PRFB, Scheme::NPFB, Scheme::PRRB, Scheme::NPRB];

    pub const fn unrestricted(intensity: IntensityMode, waits: WaitMode) -> Self {
        Scheme {
            intensity,
            waits,
            center: Center::Unrestricted,
        }
    }

    pub fn restricted(self, theta0: Params) -> Self {
        Scheme {
            center: Center::Restricted(theta0),
            ..self
        }
    }

    pub fn name(&self) -> &'static str {
        match (self.waits, self.intensity) {
            (WaitMode::Parametric, IntensityMode::Fixed) => "prfb",
            (WaitMode::NonParametric, IntensityMode::Fixed) => "npfb",
            (WaitMode::Parametric, IntensityMode::Recursive) => "prrb",
            (WaitMode::NonParametric, IntensityMode::Recursive) => "nprb",
        }
    }

    /// Unrestricted scheme from its lower-case short name.
    pub fn parse(name: &str) -> Option<Scheme> {
        Scheme::ALL.into_iter().find(|s| s.name() == name)
    }
}

/// Source of bootstrap transformed waiting times.
#[derive(Debug, Clone, PartialEq)]
pub enum WaitSampler {
    /// i.i.d. unit exponential
    Exponential,
    /// uniform resampling from rescaled residuals (mean exactly one)
    Residuals(Vec<f64>),
}

impl WaitSampler {
    pub fn new(mode: WaitMode, fit_waits: &TransformedWaits) -> Result<Self> {
        Ok(match mode {
            WaitMode::Parametric => WaitSampler::Exponential,
            WaitMode::NonParametric => {
                let r = fit_waits.rescaled()?;
                if r.iter().any(|&v| !(v > 0.0)) {
                    return Err(Error::Numeric("non-positive transformed residual".into()));
                }
                WaitSampler::Residuals(r)
            }
        })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            WaitSampler::Exponential => loop {
                let v: f64 = Exp1.sample(rng);
                if v > 0.0 {
                    break v;
                }
            },
            WaitSampler::Residuals(r) => r[rng.random_range(0..r.len())],
        }
    }
}

/// Endless stream of `v*ᵢ` for a scheme.
pub fn draw_transformed_waits<'a, R: Rng + ?Sized>(
    sampler: &'a WaitSampler,
    rng: &'a mut R,
) -> impl Iterator<Item = f64> + 'a {
    core::iter::repeat_with(move || sampler.draw(rng))
}

/// Everything a replication needs, shared read-only across replications.
#[derive(Debug, Clone)]
pub struct BootstrapContext<'a> {
    data: &'a EventSeries,
    scheme: Scheme,
    theta_star: Params,
    sampler: WaitSampler,
    /// `Λ̂` at `θ*` over the data (fixed mode only)
    table: Option<FixedCompensator>,
    seed: u64,
    options: FitOptions,
}

/// One successful replication.
#[derive(Debug, Clone, PartialEq)]
pub struct Replicate {
    pub theta: Params,
    pub lr: f64,
    pub n_events: usize,
}

impl<'a> BootstrapContext<'a> {
    /// Validates the scheme against the fit: recursive schemes require that
    /// the fit passed its sanity check; fixed schemes run regardless.
    pub fn new(data: &'a EventSeries, fit: &FitResult, scheme: Scheme, seed: u64) -> Result<Self> {
        let theta_star = match scheme.center {
            Center::Unrestricted => fit.theta_hat,
            Center::Restricted(t) => t,
        };
        if theta_star.family() != fit.family() {
            return Err(Error::InvalidParameter(alloc::format!(
                "restricted value is {:?}, fit is {:?}",
                theta_star.family(),
                fit.family()
            )));
        }
        if scheme.intensity == IntensityMode::Recursive {
            if !fit.sanity.stationary {
                return Err(Error::SanityFailed(alloc::format!(
                    "branching ratio {} outside (0, 1); recursive bootstrap would explode",
                    fit.theta_hat.branching_ratio()
                )));
            }
            if !fit.sanity.hessian_nd {
                return Err(Error::SanityFailed("Hessian at the estimate is not negative definite".into()));
            }
            if !theta_star.stationary() {
                return Err(Error::NonStationary(theta_star.branching_ratio()));
            }
        }
        let sampler = WaitSampler::new(scheme.waits, &transformed_waiting_times(&fit.theta_hat, data))?;
        let table = (scheme.intensity == IntensityMode::Fixed).then(|| FixedCompensator::new(&theta_star, data));
        Ok(BootstrapContext {
            data,
            scheme,
            theta_star,
            sampler,
            table,
            seed,
            options: FitOptions::default(),
        })
    }

    pub fn with_options(mut self, options: FitOptions) -> Self {
        self.options = options;
        self
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn theta_star(&self) -> &Params {
        &self.theta_star
    }

    pub fn sampler(&self) -> &WaitSampler {
        &self.sampler
    }

    /// `Λ̂(T)` for fixed schemes.
    pub fn fixed_total(&self) -> Option<f64> {
        self.table.as_ref().map(|t| t.total())
    }

    /// RNG stream of replication `b`.
    pub fn rng(&self, b: usize) -> StreamRng {
        stream(self.seed, b as u64)
    }

    /// Bootstrap series of replication `b` plus the transformed waits used.
    pub fn series(&self, b: usize) -> Result<(EventSeries, Vec<f64>)> {
        let mut rng = self.rng(b);
        generate_with(self, &mut rng)
    }

    pub fn replicate(&self, b: usize) -> Result<Replicate> {
        let (series, _) = self.series(b)?;
        let target = match self.scheme.intensity {
            IntensityMode::Fixed => LikelihoodTarget::fixed_intensity(self.data, series.events()),
            IntensityMode::Recursive => LikelihoodTarget::recursive(&series),
        };
        let max = maximize(&target, &self.theta_star, &self.options)?;
        if !max.converged {
            return Err(Error::NotConverged {
                iterations: max.iterations,
                gradient: max.gradient.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
            });
        }
        let at_star = target.evaluate(&self.theta_star, Order::Value).value;
        let lr = lr_from(max.loglik, at_star)?;
        Ok(Replicate {
            theta: max.theta,
            lr,
            n_events: series.len(),
        })
    }

    /// Assemble a run from per-replication outcomes listed in index order.
    pub fn collect(&self, outcomes: Vec<Result<Replicate>>) -> BootstrapRun {
        let requested = outcomes.len();
        let mut run = BootstrapRun {
            scheme: self.scheme,
            theta_star: self.theta_star,
            requested,
            theta_stars: Vec::with_capacity(requested),
            lr_stars: Vec::with_capacity(requested),
            n_stars: Vec::with_capacity(requested),
            discarded: 0,
            failures: Vec::new(),
            seed: self.seed,
        };
        for (b, outcome) in outcomes.into_iter().enumerate() {
            match outcome {
                Ok(r) => {
                    run.theta_stars.push(r.theta);
                    run.lr_stars.push(r.lr);
                    run.n_stars.push(r.n_events);
                }
                Err(e) => {
                    run.discarded += 1;
                    run.failures.push((b, alloc::format!("{e}")));
                }
            }
        }
        run
    }
}

fn generate_with<R: Rng + ?Sized>(ctx: &BootstrapContext<'_>, rng: &mut R) -> Result<(EventSeries, Vec<f64>)> {
    let horizon = ctx.data.horizon();
    let mut waits = Vec::new();
    let mut times = Vec::new();
    match &ctx.table {
        Some(table) => {
            let total = table.total();
            let mut s = 0.0;
            loop {
                let v = ctx.sampler.draw(rng);
                s += v;
                if s > total {
                    break;
                }
                let t = table.invert(s)?;
                if times.last().is_some_and(|&p| t <= p) {
                    return Err(Error::Numeric(alloc::format!("bootstrap times collide at {t}")));
                }
                times.push(t);
                waits.push(v);
            }
        }
        None => {
            let mut gen = RecursiveInverter::new(&ctx.theta_star, ctx.data.pre_sample(), 0.0, horizon);
            loop {
                let v = ctx.sampler.draw(rng);
                match gen.next(v)? {
                    Some(_) => waits.push(v),
                    None => break,
                }
            }
            times = gen.into_generated();
        }
    }
    let series = EventSeries::new(ctx.data.pre_sample().to_vec(), times, horizon)?;
    Ok((series, waits))
}

/// One bootstrap sample for `scheme` at `θ*`, pre-sample fixed to the data.
pub fn generate_bootstrap_series<R: Rng + ?Sized>(
    scheme: Scheme,
    theta_star: &Params,
    h: &EventSeries,
    sampler: &WaitSampler,
    rng: &mut R,
) -> Result<EventSeries> {
    let table = (scheme.intensity == IntensityMode::Fixed).then(|| FixedCompensator::new(theta_star, h));
    let ctx = BootstrapContext {
        data: h,
        scheme,
        theta_star: *theta_star,
        sampler: sampler.clone(),
        table,
        seed: 0,
        options: FitOptions::default(),
    };
    generate_with(&ctx, rng).map(|(s, _)| s)
}

/// Outcome of `B` bootstrap replications.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapRun {
    pub scheme: Scheme,
    pub theta_star: Params,
    /// replications attempted (`B`)
    pub requested: usize,
    pub theta_stars: Vec<Params>,
    pub lr_stars: Vec<f64>,
    pub n_stars: Vec<usize>,
    pub discarded: usize,
    /// `(replication index, reason)` for each discarded replication
    pub failures: Vec<(usize, String)>,
    pub seed: u64,
}

impl BootstrapRun {
    /// Retained replications `B_eff`.
    pub fn effective(&self) -> usize {
        self.theta_stars.len()
    }

    pub fn unreliable(&self) -> bool {
        self.discarded as f64 > UNRELIABLE_DISCARD_SHARE * self.requested as f64
    }

    pub fn coordinate(&self, coord: Coord) -> Result<Vec<f64>> {
        self.theta_stars.iter().map(|t| coord.value(t)).collect()
    }
}

/// Sequential bootstrap; see [`BootstrapContext::replicate`] for a
/// per-replication entry point suited to parallel drivers.
pub fn run_bootstrap(h: &EventSeries, fit: &FitResult, scheme: Scheme, replications: usize, seed: u64) -> Result<BootstrapRun> {
    let ctx = BootstrapContext::new(h, fit, scheme, seed)?;
    let outcomes = (0..replications).map(|b| ctx.replicate(b)).collect();
    Ok(ctx.collect(outcomes))
}

/// 1-based order statistic `⌈q·n⌉`, clamped to `[1, n]`.
///
/// A relative slack of `1e-9` keeps exact products such as `0.025·200`
/// from rounding up past the intended index.
pub fn order_statistic_index(q: f64, n: usize) -> usize {
    let k = libm::ceil(q * n as f64 - 1e-9 * n as f64) as usize;
    k.clamp(1, n)
}

/// Empirical quantile under the order-statistic convention above.
pub fn empirical_quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InsufficientData("no values for a quantile".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[order_statistic_index(q, sorted.len()) - 1])
}

/// Percentile interval from the `(1−level)/2` and `(1+level)/2` order
/// statistics of the retained draws.
pub fn percentile_ci(run: &BootstrapRun, coord: Coord, level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain {
            value: level,
            lower: 0.0,
            upper: 1.0,
        });
    }
    if run.effective() < 2 {
        return Err(Error::InsufficientData(alloc::format!(
            "{} retained bootstrap draws, need at least 2",
            run.effective()
        )));
    }
    let values = run.coordinate(coord)?;
    let tail = 0.5 * (1.0 - level);
    Ok((empirical_quantile(&values, tail)?, empirical_quantile(&values, 1.0 - tail)?))
}

/// How a bootstrap ellipsoid is calibrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EllipsoidConstruction {
    /// Wald form with the data information, cut at the bootstrap quantile
    /// of the same form evaluated at each `θ̂*_b − θ*`
    #[default]
    WaldQuantile,
    /// Form built from the inverse bootstrap covariance of `θ̂*`
    BootstrapCovariance,
}

/// Bootstrap confidence ellipsoid coverage of `θ₀`.
pub fn bootstrap_ellipsoid_cover(
    run: &BootstrapRun,
    fit: &FitResult,
    theta0: &Params,
    par: Parameterization,
    level: f64,
    construction: EllipsoidConstruction,
) -> Result<bool> {
    if !fit.sanity.hessian_nd {
        return Err(Error::SanityFailed("Hessian at the estimate is not negative definite".into()));
    }
    if run.effective() < 2 {
        return Err(Error::InsufficientData("too few bootstrap draws for an ellipsoid".into()));
    }
    let star = par.coords(&run.theta_star);
    let draws: Vec<Vec<f64>> = run.theta_stars.iter().map(|t| par.coords(t)).collect();
    let metric = match construction {
        EllipsoidConstruction::WaldQuantile => par.information(fit),
        EllipsoidConstruction::BootstrapCovariance => {
            let d = star.len();
            let n = draws.len() as f64;
            let mut mean = alloc::vec![0.0; d];
            for x in &draws {
                for i in 0..d {
                    mean[i] += x[i] / n;
                }
            }
            let mut cov = Matrix::zeros(d, d);
            for x in &draws {
                for i in 0..d {
                    for j in 0..d {
                        cov[(i, j)] += (x[i] - mean[i]) * (x[j] - mean[j]) / (n - 1.0);
                    }
                }
            }
            inverse_pd(&cov).ok_or_else(|| Error::Numeric("bootstrap covariance is singular".into()))?
        }
    };
    let form = |x: &[f64], c: &[f64]| {
        let diff: Vec<f64> = x.iter().zip(c).map(|(a, b)| a - b).collect();
        quadratic_form(&metric, &diff)
    };
    let forms: Vec<f64> = draws.iter().map(|x| form(x, &star)).collect();
    let cut = empirical_quantile(&forms, level)?;
    Ok(form(&par.coords(&fit.theta_hat), &par.coords(theta0)) <= cut)
}

/// `(1 + #{LR*_b ≥ LR_obs}) / (B_eff + 1)`.
pub fn bootstrap_lr_pvalue(run: &BootstrapRun, observed: f64) -> f64 {
    let exceed = run.lr_stars.iter().filter(|&&lr| lr >= observed).count();
    (1 + exceed) as f64 / (run.effective() + 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intensity::integrated_intensity;
    use crate::kernels::KernelFamily;
    use crate::likelihood::fit_mle;
    use crate::simulate::simulate_thinning;

    fn data() -> (EventSeries, FitResult) {
        let h = simulate_thinning(&Params::branching(0.5, 0.5, 5.0).unwrap(), 100.0, 100.0, 11).unwrap();
        let fit = fit_mle(&h, KernelFamily::Exponential, None, &FitOptions::default()).unwrap();
        (h, fit)
    }

    fn run_of(draws: Vec<f64>) -> BootstrapRun {
        let n = draws.len();
        BootstrapRun {
            scheme: Scheme::PRFB,
            theta_star: Params::poisson(1.0).unwrap(),
            requested: n,
            theta_stars: draws.iter().map(|&m| Params::poisson(m).unwrap()).collect(),
            lr_stars: draws,
            n_stars: alloc::vec![0; n],
            discarded: 0,
            failures: Vec::new(),
            seed: 0,
        }
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(Scheme::parse(s.name()), Some(s));
        }
        assert_eq!(Scheme::parse("bca"), None);
    }

    #[test]
    fn residual_sampler_has_unit_mean_and_support() {
        let (h, fit) = data();
        let waits = transformed_waiting_times(&fit.theta_hat, &h);
        let sampler = WaitSampler::new(WaitMode::NonParametric, &waits).unwrap();
        let WaitSampler::Residuals(r) = &sampler else { panic!() };
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        assert!((mean - 1.0).abs() < 1e-12);
        let mut rng = stream(3, 0);
        for v in draw_transformed_waits(&sampler, &mut rng).take(5000) {
            assert!(r.contains(&v));
        }
    }

    #[test]
    fn parametric_waits_have_unit_mean() {
        let mut rng = stream(5, 0);
        let n = 1_000_000;
        let mean = draw_transformed_waits(&WaitSampler::Exponential, &mut rng).take(n).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.004, "{mean}");
    }

    #[test]
    fn empty_residuals_rejected() {
        let waits = TransformedWaits {
            values: Vec::new(),
            theta_used: Params::poisson(1.0).unwrap(),
        };
        assert!(WaitSampler::new(WaitMode::NonParametric, &waits).is_err());
        assert!(WaitSampler::new(WaitMode::Parametric, &waits).is_ok());
    }

    #[test]
    fn poisson_modes_coincide() {
        let h = EventSeries::from_events(alloc::vec![1.0, 2.5, 4.0, 7.5], 10.0).unwrap();
        let theta = Params::poisson(0.4).unwrap();
        let a = generate_bootstrap_series(Scheme::PRFB, &theta, &h, &WaitSampler::Exponential, &mut stream(1, 0)).unwrap();
        let b = generate_bootstrap_series(Scheme::PRRB, &theta, &h, &WaitSampler::Exponential, &mut stream(1, 0)).unwrap();
        let mut rng = stream(1, 0);
        let mut t = 0.0;
        for (x, y) in a.events().iter().zip(b.events()) {
            t += WaitSampler::Exponential.draw(&mut rng) / 0.4;
            assert!((x - t).abs() < 1e-10 && (y - t).abs() < 1e-10);
        }
        assert_eq!(a.len(), b.len());
    }

    #[test]
    fn fixed_paths_invert_the_data_compensator() {
        let (h, fit) = data();
        let ctx = BootstrapContext::new(&h, &fit, Scheme::PRFB, 9).unwrap();
        let total = ctx.fixed_total().unwrap();
        for b in 0..20 {
            let (series, waits) = ctx.series(b).unwrap();
            let mut prev = 0.0;
            let mut s = 0.0;
            for (&t, &v) in series.events().iter().zip(&waits) {
                let now = integrated_intensity(&fit.theta_hat, &h, t).unwrap();
                assert!((now - prev - v).abs() < 1e-8);
                prev = now;
                s += v;
            }
            assert!(s <= total);
            assert!(series.events().last().is_none_or(|&t| t <= h.horizon()));
            assert_eq!(series.pre_sample(), h.pre_sample());
        }
    }

    #[test]
    fn recursive_scheme_refuses_failed_sanity() {
        let (h, mut fit) = data();
        fit.sanity.stationary = false;
        fit.sanity.overall = false;
        assert!(matches!(
            BootstrapContext::new(&h, &fit, Scheme::PRRB, 1),
            Err(Error::SanityFailed(_))
        ));
        assert!(BootstrapContext::new(&h, &fit, Scheme::PRFB, 1).is_ok());
    }

    #[test]
    fn run_is_deterministic_and_consistent() {
        let (h, fit) = data();
        for scheme in Scheme::ALL {
            let a = run_bootstrap(&h, &fit, scheme, 8, 42).unwrap();
            let b = run_bootstrap(&h, &fit, scheme, 8, 42).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.effective() + a.discarded, 8);
            assert!(a.lr_stars.iter().all(|&lr| lr >= 0.0));
        }
        let empty = run_bootstrap(&h, &fit, Scheme::PRFB, 0, 42).unwrap();
        assert_eq!(empty.effective(), 0);
    }

    #[test]
    fn restricted_center_only_changes_theta_star() {
        let (h, fit) = data();
        let theta0 = Params::branching(0.5, 0.5, 5.0).unwrap();
        let restricted = BootstrapContext::new(&h, &fit, Scheme::PRFB.restricted(theta0), 3).unwrap();
        assert_eq!(*restricted.theta_star(), theta0);
        // unrestricted run on a fit whose estimate is θ₀ generates the same paths
        let mut moved = fit.clone();
        moved.theta_hat = theta0;
        let plain = BootstrapContext::new(&h, &moved, Scheme::PRFB, 3).unwrap();
        assert_eq!(restricted.series(0).unwrap(), plain.series(0).unwrap());
    }

    #[test]
    fn order_statistics_for_199() {
        assert_eq!(order_statistic_index(0.025, 199), 5);
        assert_eq!(order_statistic_index(0.975, 199), 195);
        assert_eq!(order_statistic_index(0.025, 200), 5);
        assert_eq!(order_statistic_index(0.0, 10), 1);
        assert_eq!(order_statistic_index(1.0, 10), 10);
        let run = run_of((1..=199).rev().map(|i| i as f64).collect());
        assert_eq!(percentile_ci(&run, Coord::Mu, 0.95).unwrap(), (5.0, 195.0));
    }

    #[test]
    fn constant_draws_give_degenerate_interval() {
        let run = run_of(alloc::vec![2.0; 10]);
        assert_eq!(percentile_ci(&run, Coord::Mu, 0.9).unwrap(), (2.0, 2.0));
        assert!(percentile_ci(&run_of(alloc::vec![2.0]), Coord::Mu, 0.9).is_err());
        assert!(percentile_ci(&run, Coord::Mu, 1.0).is_err());
    }

    #[test]
    fn lr_pvalue_edges() {
        let run = run_of(alloc::vec![0.5, 1.0, 2.0, 3.0]);
        assert_eq!(bootstrap_lr_pvalue(&run, 0.0), 1.0);
        assert_eq!(bootstrap_lr_pvalue(&run, 10.0), 0.2);
        assert_eq!(bootstrap_lr_pvalue(&run, 2.0), 0.6);
    }

    #[test]
    fn ellipsoid_at_the_estimate_is_covered() {
        let (h, fit) = data();
        let run = run_bootstrap(&h, &fit, Scheme::PRFB, 19, 1).unwrap();
        for par in [Parameterization::Natural, Parameterization::Branching] {
            for c in [EllipsoidConstruction::WaldQuantile, EllipsoidConstruction::BootstrapCovariance] {
                assert!(bootstrap_ellipsoid_cover(&run, &fit, &fit.theta_hat, par, 0.95, c).unwrap());
            }
            assert!(crate::likelihood::asymptotic_ellipsoid_cover(&fit, &fit.theta_hat, par, 7.81).unwrap());
        }
    }

    #[test]
    fn poisson_ellipsoid_is_an_interval() {
        let h = EventSeries::from_events((1..=40).map(|i| i as f64 * 0.5).collect(), 25.0).unwrap();
        let fit = fit_mle(&h, KernelFamily::Poisson, None, &FitOptions::default()).unwrap();
        let run = run_bootstrap(&h, &fit, Scheme::PRFB, 99, 4).unwrap();
        let mu_hat = fit.theta_hat.mu();
        let info = 40.0 / (mu_hat * mu_hat);
        let forms: Vec<f64> = run.theta_stars.iter().map(|t| info * (t.mu() - mu_hat).powi(2)).collect();
        let cut = empirical_quantile(&forms, 0.9).unwrap();
        let half = libm::sqrt(cut / info);
        for mu0 in [1.0, 1.3, 1.6, 1.9, mu_hat + half * 0.999, mu_hat + half * 1.001] {
            let theta0 = Params::poisson(mu0).unwrap();
            let direct = (mu0 - mu_hat).abs() <= half;
            let cover = bootstrap_ellipsoid_cover(
                &run,
                &fit,
                &theta0,
                Parameterization::Natural,
                0.9,
                EllipsoidConstruction::WaldQuantile,
            )
            .unwrap();
            assert_eq!(cover, direct, "mu0 {mu0}");
        }
    }
}
