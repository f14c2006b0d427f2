//! Log-likelihood, score, Hessian and the maximum-likelihood driver.
//!
//! The log-likelihood of sample points `p₁ < … < p_n` under a conditioning
//! history `H` on `[0, T]` is
//!
//! ```text
//! ℓ(θ) = Σᵢ log λ_H(pᵢ; θ) − ∫₀ᵀ λ_H(t; θ) dt,   λ_H(t) = μ + Σ_{h ∈ H, h < t} γ(t − h).
//! ```
//!
//! The ordinary likelihood uses the data as both points and history. The
//! fixed-intensity bootstrap evaluates bootstrap points against the
//! original history, and the recursive bootstrap uses the bootstrap path
//! for both; [`LikelihoodTarget`] covers all three.
//!
//! Exponential-kernel derivatives are analytic in `(μ, a, β)` with
//! `γ(x) = aβ·exp(−βx)`, computed by one merged pass over points and
//! history that carries the memory sums `Σ dᵏ exp(−βd)` for `k = 0, 1, 2`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::intensity::{dimension, integrated_between, EventSeries, Params};
use crate::kernels::{KernelFamily, Shape};
use crate::linalg::{frobenius, symmetric_eigenvalues, Matrix};

/// Relative truncation of the pre-sample memory sums.
const PRESAMPLE_TRUNCATION: f64 = 1e-17;

/// What a likelihood evaluation should return.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Order {
    Value,
    Gradient,
    Hessian,
}

/// Value, gradient and Hessian in estimation coordinates
/// (see [`Params::fit_vec`]).
#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Option<Matrix>,
}

/// Evaluation points plus the history their intensity is conditioned on.
#[derive(Debug, Clone, Copy)]
pub struct LikelihoodTarget<'a> {
    history: &'a [f64],
    points: &'a [f64],
    horizon: f64,
}

impl<'a> LikelihoodTarget<'a> {
    /// The data likelihood: sample events against the full history.
    pub fn standard(h: &'a EventSeries) -> Self {
        LikelihoodTarget {
            history: h.all(),
            points: h.events(),
            horizon: h.horizon(),
        }
    }

    /// Bootstrap points evaluated under the intensity of the original data.
    pub fn fixed_intensity(original: &'a EventSeries, points: &'a [f64]) -> Self {
        LikelihoodTarget {
            history: original.all(),
            points,
            horizon: original.horizon(),
        }
    }

    /// A bootstrap path under its own intensity; same as
    /// [`LikelihoodTarget::standard`] on the bootstrap series.
    pub fn recursive(boot: &'a EventSeries) -> Self {
        Self::standard(boot)
    }

    pub fn points(&self) -> &[f64] {
        self.points
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn loglik(&self, theta: &Params) -> f64 {
        self.evaluate(theta, Order::Value).value
    }

    /// `∫₀ᵀ λ_H(t;θ) dt`; depends on the history only, never on the points.
    pub fn compensator(&self, theta: &Params) -> f64 {
        match theta.kernel().shape() {
            Shape::Exponential { alpha, beta } => {
                let ev = exp_pass(theta.mu(), alpha / beta, beta, self.history, &[], self.horizon);
                ev.compensator
            }
            _ => integrated_between(theta, self.history, 0.0, self.horizon),
        }
    }

    pub fn evaluate(&self, theta: &Params, order: Order) -> Derivatives {
        match theta.kernel().shape() {
            Shape::None => {
                let n = self.points.len() as f64;
                let mu = theta.mu();
                Derivatives {
                    value: n * libm::log(mu) - mu * self.horizon,
                    gradient: vec![n / mu - self.horizon],
                    hessian: (order == Order::Hessian).then(|| Matrix::from_element(1, 1, -n / (mu * mu))),
                }
            }
            Shape::Exponential { alpha, beta } => {
                let ev = exp_pass(theta.mu(), alpha / beta, beta, self.history, self.points, self.horizon);
                ev.into_derivatives(theta.mu(), alpha / beta, beta, self.horizon, order)
            }
            Shape::PowerLaw { .. } => self.numeric(theta, order),
        }
    }

    fn power_law_value(&self, theta: &Params) -> f64 {
        let k = theta.kernel();
        let mu = theta.mu();
        let mut total = 0.0;
        let mut upto = 0;
        for &p in self.points {
            while upto < self.history.len() && self.history[upto] < p {
                upto += 1;
            }
            let rate = mu + self.history[..upto].iter().map(|&h| k.value_unchecked(p - h)).sum::<f64>();
            total += libm::log(rate);
        }
        total - integrated_between(theta, self.history, 0.0, self.horizon)
    }

    fn value_at(&self, family: KernelFamily, coords: &[f64]) -> f64 {
        match Params::from_fit_vec(family, coords) {
            Ok(theta) if family == KernelFamily::PowerLaw => self.power_law_value(&theta),
            Ok(theta) => self.loglik(&theta),
            Err(_) => f64::NAN,
        }
    }

    fn numeric_gradient(&self, family: KernelFamily, x: &[f64]) -> Vec<f64> {
        let mut probe = x.to_vec();
        (0..x.len())
            .map(|i| {
                let h = fd_step(x[i], 1e-6);
                probe[i] = x[i] + h;
                let up = self.value_at(family, &probe);
                probe[i] = x[i] - h;
                let down = self.value_at(family, &probe);
                probe[i] = x[i];
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    fn numeric(&self, theta: &Params, order: Order) -> Derivatives {
        let family = theta.family();
        let x = theta.fit_vec();
        let value = self.power_law_value(theta);
        let gradient = if order >= Order::Gradient {
            self.numeric_gradient(family, &x)
        } else {
            Vec::new()
        };
        let hessian = (order == Order::Hessian).then(|| {
            let d = x.len();
            let mut m = Matrix::zeros(d, d);
            let mut probe = x.clone();
            for j in 0..d {
                let h = fd_step(x[j], 1e-4);
                probe[j] = x[j] + h;
                let up = self.numeric_gradient(family, &probe);
                probe[j] = x[j] - h;
                let down = self.numeric_gradient(family, &probe);
                probe[j] = x[j];
                for i in 0..d {
                    m[(i, j)] = (up[i] - down[i]) / (2.0 * h);
                }
            }
            (&m + m.transpose()) * 0.5
        });
        Derivatives {
            value,
            gradient,
            hessian,
        }
    }
}

/// Central-difference step `rel·(1+|x|)`, kept inside the positive half-line.
fn fd_step(x: f64, rel: f64) -> f64 {
    (rel * (1.0 + x.abs())).min(0.5 * x.abs().max(f64::MIN_POSITIVE))
}

/// Memory sums `Σ dᵏ e^{−βd}`, `k = 0, 1, 2`.
#[derive(Debug, Clone, Copy, Default)]
struct Memory {
    r0: f64,
    r1: f64,
    r2: f64,
}

impl Memory {
    #[inline]
    fn decayed(&self, beta: f64, dt: f64) -> Memory {
        let e = libm::exp(-beta * dt);
        Memory {
            r0: e * self.r0,
            r1: e * (self.r1 + dt * self.r0),
            r2: e * (self.r2 + 2.0 * dt * self.r1 + dt * dt * self.r0),
        }
    }
}

/// Accumulated pieces of one exponential-kernel pass.
struct ExpPass {
    log_sum: f64,
    grad_sum: [f64; 3],
    hess_sum: [[f64; 3]; 3],
    compensator: f64,
    /// `(K, ∂K/∂β, ∂²K/∂β²)` with compensator `μT + aK`
    k: [f64; 3],
}

/// Memory of the pre-sample (times < 0) evaluated at time 0.
///
/// Summed from the most recent event backwards; stops once the remaining
/// terms cannot move the sums by more than [`PRESAMPLE_TRUNCATION`]
/// relative. Beyond `d > 2/β` each `dᵏ e^{−βd}` (k ≤ 2) is decreasing, so
/// the tail is bounded by `count · e^{−βd} (1+d)²`.
fn presample_memory(beta: f64, pre: &[f64]) -> Memory {
    let mut m = Memory::default();
    let knee = 2.0 / beta;
    for (j, &t) in pre.iter().enumerate().rev() {
        let d = -t;
        let e = libm::exp(-beta * d);
        if d > knee {
            let tail = (j + 1) as f64 * e * (1.0 + d) * (1.0 + d);
            if tail <= PRESAMPLE_TRUNCATION * (m.r0 + m.r1 + m.r2) {
                break;
            }
        }
        m.r0 += e;
        m.r1 += d * e;
        m.r2 += d * d * e;
    }
    m
}

fn exp_pass(mu: f64, a: f64, beta: f64, history: &[f64], points: &[f64], horizon: f64) -> ExpPass {
    let split = history.partition_point(|&t| t < 0.0);
    let (pre, sample) = history.split_at(split);
    let start = presample_memory(beta, pre);

    let ab = a * beta;
    let mut log_sum = 0.0;
    let mut g = [0.0; 3];
    let mut hs = [[0.0; 3]; 3];

    let mut state = start;
    let mut at = 0.0;
    let mut next = 0;
    for &p in points {
        while next < sample.len() && sample[next] < p {
            let t = sample[next];
            state = state.decayed(beta, t - at);
            state.r0 += 1.0;
            at = t;
            next += 1;
        }
        let s = state.decayed(beta, p - at);
        let rate = mu + ab * s.r0;
        log_sum += libm::log(rate);
        // ∂λ/∂(μ, a, β)
        let d_a = beta * s.r0;
        let d_ab = s.r0 - beta * s.r1;
        let d_b = a * d_ab;
        let d_bb = a * (beta * s.r2 - 2.0 * s.r1);
        let inv = 1.0 / rate;
        let grad = [inv, d_a * inv, d_b * inv];
        for i in 0..3 {
            g[i] += grad[i];
            for j in 0..3 {
                hs[i][j] -= grad[i] * grad[j];
            }
        }
        hs[1][2] += d_ab * inv;
        hs[2][1] += d_ab * inv;
        hs[2][2] += d_bb * inv;
    }
    let mut n_sample = 0.0;
    for &t in &sample[next..] {
        if t > horizon {
            break;
        }
        state = state.decayed(beta, t - at);
        state.r0 += 1.0;
        at = t;
    }
    for &t in sample.iter().take_while(|&&t| t <= horizon) {
        let _ = t;
        n_sample += 1.0;
    }
    let end = state.decayed(beta, horizon - at);
    let k = [
        start.r0 + n_sample - end.r0,
        end.r1 - start.r1,
        start.r2 - end.r2,
    ];
    ExpPass {
        log_sum,
        grad_sum: g,
        hess_sum: hs,
        compensator: mu * horizon + a * k[0],
        k,
    }
}

impl ExpPass {
    fn into_derivatives(self, _mu: f64, a: f64, _beta: f64, horizon: f64, order: Order) -> Derivatives {
        let value = self.log_sum - self.compensator;
        let gradient = if order >= Order::Gradient {
            vec![
                self.grad_sum[0] - horizon,
                self.grad_sum[1] - self.k[0],
                self.grad_sum[2] - a * self.k[1],
            ]
        } else {
            Vec::new()
        };
        let hessian = (order == Order::Hessian).then(|| {
            let mut m = Matrix::zeros(3, 3);
            for i in 0..3 {
                for j in 0..3 {
                    m[(i, j)] = self.hess_sum[i][j];
                }
            }
            m[(1, 2)] -= self.k[1];
            m[(2, 1)] -= self.k[1];
            m[(2, 2)] -= a * self.k[2];
            m
        });
        Derivatives {
            value,
            gradient,
            hessian,
        }
    }
}

/// `ℓ_T(θ)` of a series.
pub fn loglik(theta: &Params, h: &EventSeries) -> f64 {
    LikelihoodTarget::standard(h).loglik(theta)
}

/// `∂ℓ/∂θ` in estimation coordinates.
pub fn score(theta: &Params, h: &EventSeries) -> Vec<f64> {
    LikelihoodTarget::standard(h).evaluate(theta, Order::Gradient).gradient
}

/// `∂²ℓ/∂θ∂θᵀ` in estimation coordinates.
pub fn hessian(theta: &Params, h: &EventSeries) -> Matrix {
    LikelihoodTarget::standard(h)
        .evaluate(theta, Order::Hessian)
        .hessian
        .expect("hessian requested")
}

/// Box constraints on the estimation coordinates, in natural units.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub const DEFAULT_LOWER: f64 = 1e-10;
    pub const DEFAULT_UPPER: f64 = 1e10;

    /// Positivity only (up to `[1e-10, 1e10]`); stationarity is not imposed.
    pub fn positive(family: KernelFamily) -> Self {
        let d = dimension(family);
        Bounds {
            lower: vec![Self::DEFAULT_LOWER; d],
            upper: vec![Self::DEFAULT_UPPER; d],
        }
    }
}

/// Optimizer settings.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Projected log-coordinate gradient tolerance, relative to `1 + |ℓ|`.
    pub gradient_tolerance: f64,
    /// Log-coordinate step below which the search stops.
    pub parameter_tolerance: f64,
    pub max_iterations: usize,
    pub bounds: Option<Bounds>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            gradient_tolerance: 1e-8,
            parameter_tolerance: 1e-10,
            max_iterations: 500,
            bounds: None,
        }
    }
}

/// Result of a bare maximisation (no Hessian, no sanity check).
#[derive(Debug, Clone, PartialEq)]
pub struct Maximum {
    pub theta: Params,
    pub loglik: f64,
    pub gradient: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// log-likelihood at the start and after every accepted step
    pub trajectory: Vec<f64>,
}

/// Post-fit gate: stationarity and a negative-definite Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct SanityVerdict {
    pub stationary: bool,
    pub hessian_nd: bool,
    pub overall: bool,
}

/// Eigenvalues must lie below `−HESSIAN_ND_TOLERANCE · ‖H‖_F`.
pub const HESSIAN_ND_TOLERANCE: f64 = 1e-10;

impl SanityVerdict {
    pub fn evaluate(theta: &Params, hessian: &Matrix) -> Self {
        let a = theta.branching_ratio();
        let stationary = match theta.family() {
            KernelFamily::Poisson => true,
            _ => a > 0.0 && a < 1.0,
        };
        let hessian_nd = hessian_negative_definite(hessian);
        SanityVerdict {
            stationary,
            hessian_nd,
            overall: stationary && hessian_nd,
        }
    }
}

pub fn hessian_negative_definite(hessian: &Matrix) -> bool {
    if hessian.iter().any(|x| !x.is_finite()) {
        return false;
    }
    let limit = -HESSIAN_ND_TOLERANCE * frobenius(hessian);
    symmetric_eigenvalues(hessian).iter().all(|&ev| ev < limit)
}

/// A maximum-likelihood fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub theta_hat: Params,
    pub loglik: f64,
    /// score in estimation coordinates
    pub score: Vec<f64>,
    /// Hessian in estimation coordinates
    pub hessian: Matrix,
    pub converged: bool,
    pub iterations: usize,
    pub sanity: SanityVerdict,
}

impl FitResult {
    pub fn family(&self) -> KernelFamily {
        self.theta_hat.family()
    }

    /// `−H⁻¹` in estimation coordinates, `None` unless `−H` is positive definite.
    pub fn covariance(&self) -> Option<Matrix> {
        crate::linalg::inverse_pd(&(-&self.hessian))
    }

    /// Hessian in natural coordinates `(μ, α, β)` for the exponential
    /// kernel, by the chain rule through `a = α/β` (score term included).
    pub fn hessian_natural(&self) -> Matrix {
        match self.theta_hat.kernel().shape() {
            Shape::Exponential { alpha, beta } => {
                // J = ∂(μ, a, β)/∂(μ, α, β)
                let mut j = Matrix::identity(3, 3);
                j[(1, 1)] = 1.0 / beta;
                j[(1, 2)] = -alpha / (beta * beta);
                let mut m = j.transpose() * &self.hessian * &j;
                let s_a = self.score[1];
                m[(1, 2)] += s_a * (-1.0 / (beta * beta));
                m[(2, 1)] += s_a * (-1.0 / (beta * beta));
                m[(2, 2)] += s_a * (2.0 * alpha / (beta * beta * beta));
                m
            }
            _ => self.hessian.clone(),
        }
    }
}

/// Default starting point `(0.5·n/T, 0.5, 1/mean(w))` for the exponential
/// kernel, `n/T` for Poisson, and `(0.5·n/T, 0.5·β, 1, 2)`-style guesses for
/// the power law (`β = w̄`, `δ = 2`, half the rate explained by excitation).
pub fn default_init(h: &EventSeries, family: KernelFamily) -> Result<Params> {
    let n = h.len();
    if n == 0 {
        return Err(Error::InsufficientData("no sample events".into()));
    }
    let rate = n as f64 / h.horizon();
    let mean_wait = h.events().last().copied().unwrap_or(0.0) / n as f64;
    let mean_wait = if mean_wait > 0.0 { mean_wait } else { 1.0 / rate };
    match family {
        KernelFamily::Poisson => Params::poisson(rate),
        KernelFamily::Exponential => Params::branching(0.5 * rate, 0.5, 1.0 / mean_wait),
        KernelFamily::PowerLaw => {
            let beta = mean_wait;
            // a = α β^{1−δ}/(δ−1) = 0.5 with δ = 2 → α = 0.5 β
            Params::power_law(0.5 * rate, 0.5 * beta, beta, 2.0)
        }
    }
}

/// Maximise a likelihood target from `init`.
///
/// Quasi-Newton (BFGS) ascent on `x = log θ` with projected backtracking
/// line search onto the log-box. The inverse-Hessian model starts from the
/// exact Hessian at `init` when that is negative definite in `x`.
pub fn maximize(target: &LikelihoodTarget<'_>, init: &Params, options: &FitOptions) -> Result<Maximum> {
    let family = init.family();
    let d = dimension(family);
    if family == KernelFamily::Poisson {
        let mu = target.points().len() as f64 / target.horizon();
        if mu <= 0.0 {
            return Err(Error::InsufficientData("Poisson MLE needs at least one event".into()));
        }
        let theta = Params::poisson(mu)?;
        let ev = target.evaluate(&theta, Order::Gradient);
        return Ok(Maximum {
            theta,
            loglik: ev.value,
            gradient: ev.gradient,
            converged: true,
            iterations: 0,
            trajectory: vec![ev.value],
        });
    }
    let bounds = options.bounds.clone().unwrap_or_else(|| Bounds::positive(family));
    if bounds.lower.len() != d || bounds.upper.len() != d {
        return Err(Error::InvalidParameter("bounds dimension mismatch".into()));
    }
    let lo: Vec<f64> = bounds.lower.iter().map(|&b| libm::log(b)).collect();
    let hi: Vec<f64> = bounds.upper.iter().map(|&b| libm::log(b)).collect();
    let clamp = |x: &mut [f64]| {
        for i in 0..x.len() {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    };

    // objective in x: f = −ℓ, g = −θ ⊙ ∇ℓ
    let eval = |x: &[f64], order: Order| -> Option<(f64, Vec<f64>, Option<Matrix>)> {
        let coords: Vec<f64> = x.iter().map(|&v| libm::exp(v)).collect();
        let theta = Params::from_fit_vec(family, &coords).ok()?;
        let ev = target.evaluate(&theta, order);
        if !ev.value.is_finite() {
            return None;
        }
        let g: Vec<f64> = ev.gradient.iter().zip(&coords).map(|(gi, ci)| -gi * ci).collect();
        let h = ev.hessian.map(|h| {
            let mut m = Matrix::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    m[(i, j)] = -h[(i, j)] * coords[i] * coords[j];
                }
                m[(i, i)] -= ev.gradient[i] * coords[i];
            }
            m
        });
        Some((-ev.value, g, h))
    };

    let mut x: Vec<f64> = init.fit_vec().iter().map(|&v| libm::log(v)).collect();
    clamp(&mut x);
    let analytic_start = family == KernelFamily::Exponential;
    let (mut f, mut g, h0) = eval(&x, if analytic_start { Order::Hessian } else { Order::Gradient })
        .ok_or_else(|| Error::Numeric("log-likelihood not finite at the starting point".into()))?;
    let identity = Matrix::identity(d, d);
    let mut inv_h = h0
        .and_then(|h| crate::linalg::inverse_pd(&h))
        .unwrap_or_else(|| identity.clone());

    let gtol = options.gradient_tolerance;
    let free = |x: &[f64], g: &[f64], i: usize| !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0));
    let projected_norm = |x: &[f64], g: &[f64]| {
        (0..d)
            .filter(|&i| free(x, g, i))
            .map(|i| g[i].abs())
            .fold(0.0, f64::max)
    };

    let mut trajectory = vec![-f];
    // f is a difference of two sums of roughly this size
    let magnitude = 2.0 * target.points().len() as f64;
    let mut noisy_steps = 0;
    let mut refreshes = 0;
    let mut iterations = 0;
    let mut converged = projected_norm(&x, &g) <= gtol * (1.0 + f.abs());
    while !converged && iterations < options.max_iterations {
        iterations += 1;
        let mask: Vec<bool> = (0..d).map(|i| free(&x, &g, i)).collect();
        let direction = |inv_h: &Matrix| -> Vec<f64> {
            (0..d)
                .map(|i| {
                    if !mask[i] {
                        return 0.0;
                    }
                    -(0..d).filter(|&j| mask[j]).map(|j| inv_h[(i, j)] * g[j]).sum::<f64>()
                })
                .collect()
        };
        let mut p = direction(&inv_h);
        let mut slope: f64 = p.iter().zip(&g).map(|(a, b)| a * b).sum();
        // Once the predicted decrease sinks into the roundoff of f, only the
        // gradient can guide the search; refresh the model from the exact
        // Hessian so the step is a Newton step.
        let floor = 1e3 * f64::EPSILON * (1.0 + f.abs() + magnitude);
        if slope > -floor && refreshes < 5 {
            refreshes += 1;
            if let Some(exact) = eval(&x, Order::Hessian)
                .and_then(|(_, _, h)| h)
                .and_then(|h| crate::linalg::inverse_pd(&h))
            {
                inv_h = exact;
                p = direction(&inv_h);
                slope = p.iter().zip(&g).map(|(a, b)| a * b).sum();
            }
        }
        if !(slope < 0.0) {
            inv_h = identity.clone();
            p = direction(&inv_h);
        }
        // cap a single step at a factor e^5 in any coordinate
        let longest = p.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if longest > 5.0 {
            p.iter_mut().for_each(|v| *v *= 5.0 / longest);
        }

        // Near the optimum the Armijo decrease drowns in roundoff of f; a
        // step that keeps f within that noise and shrinks the projected
        // gradient is taken instead, a bounded number of times in a row.
        let noise = 64.0 * f64::EPSILON * (1.0 + f.abs() + magnitude);
        let current = projected_norm(&x, &g);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial: Vec<f64> = x.iter().zip(&p).map(|(xi, pi)| xi + step * pi).collect();
            clamp(&mut trial);
            let moved: f64 = trial.iter().zip(&x).zip(&g).map(|((t, xi), gi)| (t - xi) * gi).sum();
            if let Some((ft, gt, _)) = eval(&trial, Order::Gradient) {
                let armijo = ft <= f + 1e-4 * moved.min(0.0) && f - ft > noise;
                let level = noisy_steps < 10 && ft <= f + noise && projected_norm(&trial, &gt) < current;
                if armijo || level {
                    noisy_steps = if armijo { 0 } else { noisy_steps + 1 };
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            break;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let s_norm = libm::sqrt(s.iter().map(|v| v * v).sum::<f64>());
        let y_norm = libm::sqrt(y.iter().map(|v| v * v).sum::<f64>());
        if sy > 1e-12 * s_norm * y_norm && sy > 0.0 {
            // H⁺ = (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ
            let rho = 1.0 / sy;
            let sv = Matrix::from_column_slice(d, 1, &s);
            let yv = Matrix::from_column_slice(d, 1, &y);
            let left = &identity - (&sv * yv.transpose()) * rho;
            inv_h = &left * &inv_h * left.transpose() + (&sv * sv.transpose()) * rho;
        }
        let step_len = s.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        x = xn;
        f = fn_;
        g = gn;
        trajectory.push(-f);
        converged = projected_norm(&x, &g) <= gtol * (1.0 + f.abs());
        if step_len <= options.parameter_tolerance * (1.0 + x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))) {
            break;
        }
    }
    let coords: Vec<f64> = x.iter().map(|&v| libm::exp(v)).collect();
    let theta = Params::from_fit_vec(family, &coords)?;
    let gradient = g.iter().zip(&coords).map(|(gi, ci)| -gi / ci).collect();
    Ok(Maximum {
        theta,
        loglik: -f,
        gradient,
        converged,
        iterations,
        trajectory,
    })
}

/// Fit a kernel family by maximum likelihood and run the sanity check.
pub fn fit_mle(h: &EventSeries, family: KernelFamily, init: Option<Params>, options: &FitOptions) -> Result<FitResult> {
    let init = match init {
        Some(p) if p.family() == family => p,
        Some(p) => {
            return Err(Error::InvalidParameter(alloc::format!(
                "initial value is {:?}, fit requested {family:?}",
                p.family()
            )))
        }
        None => default_init(h, family)?,
    };
    let target = LikelihoodTarget::standard(h);
    let max = maximize(&target, &init, options)?;
    finish_fit(&target, max)
}

fn finish_fit(target: &LikelihoodTarget<'_>, max: Maximum) -> Result<FitResult> {
    let ev = target.evaluate(&max.theta, Order::Hessian);
    let hessian = ev.hessian.expect("hessian requested");
    let sanity = SanityVerdict::evaluate(&max.theta, &hessian);
    Ok(FitResult {
        theta_hat: max.theta,
        loglik: ev.value,
        score: ev.gradient,
        hessian,
        converged: max.converged,
        iterations: max.iterations,
        sanity,
    })
}

/// Numerical slack allowed below zero before a likelihood-ratio statistic
/// is treated as an optimizer failure.
pub const LR_SLACK: f64 = 1e-8;

/// `LR = 2(ℓ(θ̂) − ℓ(θ₀))`, clamped at zero within [`LR_SLACK`].
pub fn lr_statistic(h: &EventSeries, theta0: &Params, fit: &FitResult) -> Result<f64> {
    lr_from(fit.loglik, loglik(theta0, h))
}

pub(crate) fn lr_from(at_max: f64, at_null: f64) -> Result<f64> {
    let lr = 2.0 * (at_max - at_null);
    if lr < -LR_SLACK {
        Err(Error::Numeric(alloc::format!(
            "likelihood ratio {lr} below zero: the maximiser missed the maximum"
        )))
    } else {
        Ok(lr.max(0.0))
    }
}

/// A scalar coordinate of a parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Coord {
    Mu,
    Alpha,
    Beta,
    BranchingRatio,
    Delta,
}

impl Coord {
    pub const EXPONENTIAL: [Coord; 4] = [Coord::Mu, Coord::Alpha, Coord::Beta, Coord::BranchingRatio];

    pub fn label(self) -> &'static str {
        match self {
            Coord::Mu => "mu",
            Coord::Alpha => "alpha",
            Coord::Beta => "beta",
            Coord::BranchingRatio => "a",
            Coord::Delta => "delta",
        }
    }

    pub fn parse(s: &str) -> Option<Coord> {
        Some(match s {
            "mu" => Coord::Mu,
            "alpha" => Coord::Alpha,
            "beta" => Coord::Beta,
            "a" => Coord::BranchingRatio,
            "delta" => Coord::Delta,
            _ => return None,
        })
    }

    fn unavailable(self, family: KernelFamily) -> Error {
        Error::InvalidParameter(alloc::format!("{family:?} has no coordinate {}", self.label()))
    }

    pub fn value(self, theta: &Params) -> Result<f64> {
        let kernel = theta.kernel();
        match (self, kernel.shape()) {
            (Coord::Mu, _) => Ok(theta.mu()),
            (Coord::Alpha, Shape::Exponential { alpha, .. } | Shape::PowerLaw { alpha, .. }) => Ok(alpha),
            (Coord::Beta, Shape::Exponential { beta, .. } | Shape::PowerLaw { beta, .. }) => Ok(beta),
            (Coord::BranchingRatio, Shape::Exponential { .. } | Shape::PowerLaw { .. }) => Ok(theta.branching_ratio()),
            (Coord::Delta, Shape::PowerLaw { delta, .. }) => Ok(delta),
            _ => Err(self.unavailable(theta.family())),
        }
    }

    /// Gradient of the coordinate with respect to the estimation coordinates.
    pub fn gradient(self, theta: &Params) -> Result<Vec<f64>> {
        let d = dimension(theta.family());
        let mut g = vec![0.0; d];
        match (self, theta.kernel().shape()) {
            (Coord::Mu, _) => g[0] = 1.0,
            (Coord::Alpha, Shape::Exponential { alpha, beta }) => {
                // α = aβ
                g[1] = beta;
                g[2] = alpha / beta;
            }
            (Coord::BranchingRatio, Shape::Exponential { .. }) => g[1] = 1.0,
            (Coord::Beta, Shape::Exponential { .. } | Shape::PowerLaw { .. }) => g[2] = 1.0,
            (Coord::Alpha, Shape::PowerLaw { .. }) => g[1] = 1.0,
            (Coord::Delta, Shape::PowerLaw { .. }) => g[3] = 1.0,
            (Coord::BranchingRatio, Shape::PowerLaw { alpha, beta, delta }) => {
                // a = α β^{1−δ} / (δ − 1)
                let a = theta.branching_ratio();
                g[1] = a / alpha;
                g[2] = (1.0 - delta) * a / beta;
                g[3] = -a * (libm::log(beta) + 1.0 / (delta - 1.0));
            }
            _ => return Err(self.unavailable(theta.family())),
        }
        Ok(g)
    }
}

/// Wald interval `θ̂_c ± z·se_c` with `se² = ∇cᵀ(−H)⁻¹∇c`.
///
/// `z` is the two-sided normal critical value (1.96 for 95%).
pub fn asymptotic_ci(fit: &FitResult, coord: Coord, z: f64) -> Result<(f64, f64)> {
    let se = standard_error(fit, coord)?;
    let centre = coord.value(&fit.theta_hat)?;
    Ok((centre - z * se, centre + z * se))
}

pub fn standard_error(fit: &FitResult, coord: Coord) -> Result<f64> {
    let cov = fit
        .covariance()
        .ok_or_else(|| Error::Numeric("Hessian is not negative definite".into()))?;
    let g = coord.gradient(&fit.theta_hat)?;
    Ok(libm::sqrt(crate::linalg::quadratic_form(&cov, &g)))
}

/// Coordinates of a joint confidence region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameterization {
    /// `(μ, α, β)` (natural coordinates of every family)
    Natural,
    /// `(μ, a, β)` for the exponential kernel, natural otherwise
    Branching,
}

impl Parameterization {
    pub fn coords(self, theta: &Params) -> Vec<f64> {
        match self {
            Parameterization::Natural => theta.natural_vec(),
            Parameterization::Branching => theta.fit_vec(),
        }
    }

    /// Observed information `−H` at the fit, in these coordinates.
    pub fn information(self, fit: &FitResult) -> Matrix {
        match self {
            Parameterization::Natural => -fit.hessian_natural(),
            Parameterization::Branching => -&fit.hessian,
        }
    }
}

/// `(θ̂ − θ₀)ᵀ(−H)(θ̂ − θ₀)`; errors when `H` is not negative definite.
pub fn wald_form(fit: &FitResult, theta0: &Params, par: Parameterization) -> Result<f64> {
    if !fit.sanity.hessian_nd {
        return Err(Error::Numeric("Hessian is not negative definite".into()));
    }
    let diff: Vec<f64> = par
        .coords(&fit.theta_hat)
        .iter()
        .zip(par.coords(theta0))
        .map(|(a, b)| a - b)
        .collect();
    Ok(crate::linalg::quadratic_form(&par.information(fit), &diff))
}

/// Asymptotic ellipsoid: covered when the Wald form is at most the
/// `χ²_d` critical value `chi2`.
pub fn asymptotic_ellipsoid_cover(fit: &FitResult, theta0: &Params, par: Parameterization, chi2: f64) -> Result<bool> {
    Ok(wald_form(fit, theta0, par)? <= chi2)
}
