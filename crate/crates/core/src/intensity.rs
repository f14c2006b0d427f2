//! Conditional intensity `λ(t;θ)` and integrated intensity `Λ(t;θ)`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kernels::{Kernel, KernelFamily, Shape};

/// Full parameter point: baseline intensity plus excitation kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    mu: f64,
    kernel: Kernel,
}

impl Params {
    pub fn new(mu: f64, kernel: Kernel) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidParameter(format!("mu must be finite and > 0, got {mu}")));
        }
        Ok(Params { mu, kernel })
    }

    pub fn poisson(mu: f64) -> Result<Self> {
        Self::new(mu, Kernel::NONE)
    }

    /// Exponential kernel in natural form `(μ, α, β)`.
    pub fn exponential(mu: f64, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(mu, Kernel::exponential(alpha, beta)?)
    }

    /// Exponential kernel in branching-ratio form `(μ, a, β)`, `α = aβ`.
    pub fn branching(mu: f64, a: f64, beta: f64) -> Result<Self> {
        Self::new(mu, Kernel::exponential_branching(a, beta)?)
    }

    pub fn power_law(mu: f64, alpha: f64, beta: f64, delta: f64) -> Result<Self> {
        Self::new(mu, Kernel::power_law(alpha, beta, delta)?)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn family(&self) -> KernelFamily {
        self.kernel.family()
    }

    pub fn branching_ratio(&self) -> f64 {
        self.kernel.branching_ratio()
    }

    pub fn stationary(&self) -> bool {
        self.branching_ratio() < 1.0
    }

    /// Natural coordinates: `[μ]`, `[μ, α, β]` or `[μ, α, β, δ]`.
    pub fn natural_vec(&self) -> Vec<f64> {
        match self.kernel.shape() {
            Shape::None => alloc::vec![self.mu],
            Shape::Exponential { alpha, beta } => alloc::vec![self.mu, alpha, beta],
            Shape::PowerLaw { alpha, beta, delta } => alloc::vec![self.mu, alpha, beta, delta],
        }
    }

    /// Estimation coordinates: the exponential kernel uses `[μ, a, β]`,
    /// the other families their natural coordinates.
    pub fn fit_vec(&self) -> Vec<f64> {
        match self.kernel.shape() {
            Shape::Exponential { alpha, beta } => alloc::vec![self.mu, alpha / beta, beta],
            _ => self.natural_vec(),
        }
    }

    pub fn from_fit_vec(family: KernelFamily, v: &[f64]) -> Result<Self> {
        let need = dimension(family);
        if v.len() != need {
            return Err(Error::InvalidParameter(format!(
                "expected {need} coordinates for {family:?}, got {}",
                v.len()
            )));
        }
        match family {
            KernelFamily::Poisson => Self::poisson(v[0]),
            KernelFamily::Exponential => Self::branching(v[0], v[1], v[2]),
            KernelFamily::PowerLaw => Self::power_law(v[0], v[1], v[2], v[3]),
        }
    }

    pub fn from_natural_vec(family: KernelFamily, v: &[f64]) -> Result<Self> {
        match family {
            KernelFamily::Exponential if v.len() == 3 => Self::exponential(v[0], v[1], v[2]),
            _ => Self::from_fit_vec(family, v),
        }
    }
}

/// Number of free parameters of a family.
pub fn dimension(family: KernelFamily) -> usize {
    match family {
        KernelFamily::Poisson => 1,
        KernelFamily::Exponential => 3,
        KernelFamily::PowerLaw => 4,
    }
}

/// Pre-sample history on `[start, 0)`, sample events on `[0, T]` and the
/// horizon `T`.
///
/// All times are held in one strictly increasing buffer; `split` marks the
/// first sample event.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSeries {
    times: Vec<f64>,
    split: usize,
    start: f64,
    horizon: f64,
}

impl EventSeries {
    pub fn new(pre_sample: Vec<f64>, events: Vec<f64>, horizon: f64) -> Result<Self> {
        let start = pre_sample.first().copied().unwrap_or(0.0).min(0.0);
        Self::with_start(pre_sample, events, horizon, start)
    }

    /// Sample events only, no pre-sample history.
    pub fn from_events(events: Vec<f64>, horizon: f64) -> Result<Self> {
        Self::new(Vec::new(), events, horizon)
    }

    /// As [`EventSeries::new`] with an explicit history origin `start = −M`.
    pub fn with_start(pre_sample: Vec<f64>, events: Vec<f64>, horizon: f64, start: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidSeries(format!("horizon must be finite and > 0, got {horizon}")));
        }
        if !(start.is_finite() && start <= 0.0) {
            return Err(Error::InvalidSeries(format!("history origin must be <= 0, got {start}")));
        }
        if let Some(&p) = pre_sample.iter().find(|&&p| !(p >= start && p < 0.0)) {
            return Err(Error::InvalidSeries(format!("pre-sample time {p} outside [{start}, 0)")));
        }
        if let Some(&e) = events.iter().find(|&&e| !(e >= 0.0 && e <= horizon)) {
            return Err(Error::InvalidSeries(format!("event time {e} outside [0, {horizon}]")));
        }
        let split = pre_sample.len();
        let mut times = pre_sample;
        times.extend_from_slice(&events);
        if let Some(i) = times.windows(2).position(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidSeries(format!(
                "times not strictly increasing at position {}: {} then {}",
                i + 1,
                times[i],
                times[i + 1]
            )));
        }
        Ok(EventSeries {
            times,
            split,
            start,
            horizon,
        })
    }

    /// Same history, new sample events (used for bootstrap paths).
    pub fn replace_events(&self, events: Vec<f64>) -> Result<Self> {
        Self::with_start(self.pre_sample().to_vec(), events, self.horizon, self.start)
    }

    pub fn pre_sample(&self) -> &[f64] {
        &self.times[..self.split]
    }

    pub fn events(&self) -> &[f64] {
        &self.times[self.split..]
    }

    /// Pre-sample followed by sample events.
    pub fn all(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    /// `n_T`, the number of sample events.
    pub fn len(&self) -> usize {
        self.times.len() - self.split
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sample waiting times `wᵢ = tᵢ − tᵢ₋₁` with `t₀ = 0`.
    pub fn waiting_times(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.events()
            .iter()
            .map(|&t| {
                let w = t - prev;
                prev = t;
                w
            })
            .collect()
    }
}

/// Memory sum of the exponential kernel,
/// `Σ_{t_j ≤ last_time} exp(−β (last_time − t_j))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpState {
    pub last_time: f64,
    pub s_value: f64,
}

impl ExpState {
    pub fn empty(at: f64) -> Self {
        ExpState {
            last_time: at,
            s_value: 0.0,
        }
    }

    /// Sum the value would have at `t ≥ last_time` with no new events.
    #[inline]
    pub fn decayed(&self, beta: f64, t: f64) -> f64 {
        self.s_value * libm::exp(-beta * (t - self.last_time))
    }

    #[inline]
    pub fn advance(&mut self, beta: f64, t: f64) {
        self.s_value = self.decayed(beta, t);
        self.last_time = t;
    }

    /// Record an event at `t ≥ last_time`.
    #[inline]
    pub fn push_event(&mut self, beta: f64, t: f64) {
        self.advance(beta, t);
        self.s_value += 1.0;
    }
}

fn check_range(t: f64, lower: f64, upper: f64) -> Result<()> {
    if t >= lower && t <= upper {
        Ok(())
    } else {
        Err(Error::Domain {
            value: t,
            lower,
            upper,
        })
    }
}

/// `λ(t;θ) = μ + Σ_{t_j < t} γ(t − t_j)` over the full history.
pub fn intensity_at(theta: &Params, h: &EventSeries, t: f64) -> Result<f64> {
    check_range(t, h.start(), h.horizon())?;
    let mut scan = IntensityScanner::new(theta, h);
    Ok(scan.at(t))
}

/// Increasing-time evaluator of `λ(t;θ)`.
///
/// For the exponential kernel each query costs O(1) amortised; the other
/// kernels sum directly over the history preceding `t`.
pub struct IntensityScanner<'a> {
    theta: Params,
    times: &'a [f64],
    next: usize,
    state: ExpState,
}

impl<'a> IntensityScanner<'a> {
    pub fn new(theta: &Params, h: &'a EventSeries) -> Self {
        Self::over(theta, h.all())
    }

    pub(crate) fn over(theta: &Params, times: &'a [f64]) -> Self {
        IntensityScanner {
            theta: *theta,
            times,
            next: 0,
            state: ExpState::empty(f64::NEG_INFINITY),
        }
    }

    /// Left-limit intensity at `t`; queries must be non-decreasing.
    pub fn at(&mut self, t: f64) -> f64 {
        let mu = self.theta.mu;
        match self.theta.kernel.shape() {
            Shape::None => mu,
            Shape::Exponential { alpha, beta } => {
                while self.next < self.times.len() && self.times[self.next] < t {
                    self.state.push_event(beta, self.times[self.next]);
                    self.next += 1;
                }
                if self.state.s_value == 0.0 {
                    mu
                } else {
                    mu + alpha * self.state.decayed(beta, t)
                }
            }
            Shape::PowerLaw { .. } => {
                while self.next < self.times.len() && self.times[self.next] < t {
                    self.next += 1;
                }
                let k = self.theta.kernel;
                mu + self.times[..self.next]
                    .iter()
                    .map(|&tj| k.value_unchecked(t - tj))
                    .sum::<f64>()
            }
        }
    }
}

/// `Λ(t;θ) = ∫₀ᵗ λ(s;θ) ds` in closed form, for `0 ≤ t ≤ T`.
pub fn integrated_intensity(theta: &Params, h: &EventSeries, t: f64) -> Result<f64> {
    check_range(t, 0.0, h.horizon())?;
    Ok(integrated_between(theta, h.all(), 0.0, t))
}

/// `∫_{lo}^{hi} λ(s) ds` for the given history, `lo ≤ hi`.
pub(crate) fn integrated_between(theta: &Params, history: &[f64], lo: f64, hi: f64) -> f64 {
    let k = theta.kernel;
    let mut total = theta.mu * (hi - lo);
    if k.family() == KernelFamily::Poisson {
        return total;
    }
    for &tj in history.iter().take_while(|&&tj| tj < hi) {
        let upper = k.integral_unchecked(hi - tj);
        let lower = if tj < lo { k.integral_unchecked(lo - tj) } else { 0.0 };
        total += upper - lower;
    }
    total
}

/// Stationary mean intensity `m = μ / (1 − a)`.
pub fn mean_intensity(theta: &Params) -> Result<f64> {
    let a = theta.branching_ratio();
    if a >= 1.0 {
        return Err(Error::NonStationary(a));
    }
    Ok(theta.mu / (1.0 - a))
}
