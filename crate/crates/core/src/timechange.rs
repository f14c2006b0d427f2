//! Random time change: transformed waiting times and the two inverses of
//! the integrated intensity used to build bootstrap paths.
//!
//! * [`FixedCompensator`] holds `Λ̂` built from a fixed history. It is a
//!   knot table over the history's event times; inversion locates the
//!   segment by binary search and then solves inside it.
//! * [`RecursiveInverter`] grows its own history: every solved time is
//!   appended and shapes the intensity for the next step.
//!
//! Inside a segment the integrated intensity is smooth, increasing, and has
//! slope `λ ≥ μ`, so the root of `Λ(t_prev + Δ) − Λ(t_prev) = v` lies in
//! `[0, v/μ]` and a bracketed Newton iteration is safe.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::intensity::{EventSeries, ExpState, Params};
use crate::kernels::{Kernel, Shape};

pub const MAX_ITERATIONS: usize = 100;
/// Accepted residual, relative to `max(1, s)`.
pub const TOLERANCE: f64 = 1e-10;
/// Residual at which iteration stops early, relative to `max(1, s)`.
const TARGET: f64 = 1e-14;

/// Transformed waiting times `vᵢ(θ) = Λ(tᵢ;θ) − Λ(tᵢ₋₁;θ)`, `t₀ = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedWaits {
    pub values: Vec<f64>,
    pub theta_used: Params,
}

impl TransformedWaits {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// `v̂ᶜᵢ = v̂ᵢ / v̄`, whose sample mean is one.
    pub fn rescaled(&self) -> Result<Vec<f64>> {
        if self.values.is_empty() {
            return Err(Error::InsufficientData("no transformed waiting times to rescale".into()));
        }
        let mean = self.mean();
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(Error::Numeric(alloc::format!("mean transformed wait {mean} not positive")));
        }
        Ok(self.values.iter().map(|v| v / mean).collect())
    }
}

pub fn transformed_waiting_times(theta: &Params, h: &EventSeries) -> TransformedWaits {
    let table = FixedCompensator::new(theta, h);
    let knots = &table.knot_values[..=h.len()];
    TransformedWaits {
        values: knots.windows(2).map(|w| w[1] - w[0]).collect(),
        theta_used: *theta,
    }
}

/// Increment of the integrated intensity past the last history time.
///
/// `anchor` is the time increments are measured from; `history` lists the
/// events at or before `anchor` (only those that excite the segment).
#[derive(Clone, Copy)]
struct Segment<'a> {
    mu: f64,
    kernel: Kernel,
    anchor: f64,
    /// exponential memory sum at `anchor`, events at `anchor` included
    memory: f64,
    history: &'a [f64],
}

impl Segment<'_> {
    /// `(∫_{anchor}^{anchor+Δ} λ, λ(anchor+Δ))`
    #[inline]
    fn eval(&self, delta: f64) -> (f64, f64) {
        match self.kernel.shape() {
            Shape::None => (self.mu * delta, self.mu),
            Shape::Exponential { alpha, beta } => {
                let decay = libm::exp(-beta * delta);
                let inc = self.mu * delta - (alpha / beta) * libm::expm1(-beta * delta) * self.memory;
                (inc, self.mu + alpha * decay * self.memory)
            }
            Shape::PowerLaw { .. } => {
                let k = self.kernel;
                let mut inc = self.mu * delta;
                let mut rate = self.mu;
                for &tj in self.history {
                    let age = self.anchor - tj;
                    inc += k.integral_unchecked(age + delta) - k.integral_unchecked(age);
                    rate += k.value_unchecked(age + delta);
                }
                (inc, rate)
            }
        }
    }

    /// Smallest `Δ ≥ 0` with `eval(Δ).0 = target`, searched in `[0, limit]`.
    fn solve(&self, target: f64, scale: f64, limit: f64) -> Result<f64> {
        let tol = TOLERANCE * scale.max(1.0);
        let stop = TARGET * scale.max(1.0);
        if target <= 0.0 {
            return Ok(0.0);
        }
        let (mut lo, mut hi) = (0.0_f64, (target / self.mu).min(limit));
        let mut x = 0.0_f64;
        let mut residual = -target;
        let mut rate = self.eval(0.0).1;
        for _ in 0..MAX_ITERATIONS {
            let mut next = x - residual / rate;
            if !(next >= lo && next <= hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            x = next;
            let (inc, r) = self.eval(x);
            residual = inc - target;
            rate = r;
            if residual < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            if residual.abs() <= stop || hi - lo <= 4.0 * f64::EPSILON * x.max(f64::MIN_POSITIVE) {
                break;
            }
        }
        if residual.abs() <= tol {
            Ok(x)
        } else {
            Err(Error::NoConvergence {
                iterations: MAX_ITERATIONS,
                residual,
                target,
            })
        }
    }
}

fn mu_of(theta: &Params) -> f64 {
    theta.mu()
}

fn beta_of(kernel: &Kernel) -> Option<f64> {
    match kernel.shape() {
        Shape::Exponential { beta, .. } => Some(beta),
        _ => None,
    }
}

/// Exponential memory sum of `history` evaluated at time `at` (events at
/// `at` included).
fn memory_at(beta: f64, history: &[f64], at: f64) -> f64 {
    let mut state = ExpState::empty(f64::NEG_INFINITY);
    for &t in history.iter().take_while(|&&t| t <= at) {
        state.push_event(beta, t);
    }
    if state.s_value == 0.0 {
        0.0
    } else {
        state.decayed(beta, at)
    }
}

/// `Λ̂(t) = ∫₀ᵗ λ(u;θ*) du` over a fixed history, with its inverse.
#[derive(Debug, Clone)]
pub struct FixedCompensator {
    theta: Params,
    times: Vec<f64>,
    /// index into `times` of the first sample event
    split: usize,
    /// `0, t₁, …, t_n, T`
    knot_times: Vec<f64>,
    /// `Λ̂` at each knot
    knot_values: Vec<f64>,
    /// exponential memory at each knot (empty for other kernels)
    knot_memory: Vec<f64>,
}

impl FixedCompensator {
    pub fn new(theta: &Params, h: &EventSeries) -> Self {
        let split = h.pre_sample().len();
        let times = h.all().to_vec();
        let mut knot_times = Vec::with_capacity(h.len() + 2);
        knot_times.push(0.0);
        knot_times.extend_from_slice(h.events());
        knot_times.push(h.horizon());

        let mut knot_values = Vec::with_capacity(knot_times.len());
        let mut knot_memory = Vec::new();
        let kernel = theta.kernel();
        knot_values.push(0.0);
        match beta_of(&kernel) {
            Some(beta) => {
                let mut memory = memory_at(beta, h.pre_sample(), 0.0);
                knot_memory.push(memory);
                let mut at = 0.0;
                for (k, &t) in knot_times.iter().enumerate().skip(1) {
                    let seg = Segment {
                        mu: mu_of(theta),
                        kernel,
                        anchor: at,
                        memory,
                        history: &[],
                    };
                    let (inc, _) = seg.eval(t - at);
                    knot_values.push(knot_values[k - 1] + inc);
                    memory *= libm::exp(-beta * (t - at));
                    if k <= h.len() {
                        memory += 1.0;
                    }
                    knot_memory.push(memory);
                    at = t;
                }
            }
            None => {
                for k in 1..knot_times.len() {
                    let (a, b) = (knot_times[k - 1], knot_times[k]);
                    let seg = Self::segment_at(theta, &times, split, k - 1, a, &[]);
                    let (inc, _) = seg.eval(b - a);
                    knot_values.push(knot_values[k - 1] + inc);
                }
            }
        }
        FixedCompensator {
            theta: *theta,
            times,
            split,
            knot_times,
            knot_values,
            knot_memory,
        }
    }

    fn segment_at<'a>(
        theta: &Params,
        times: &'a [f64],
        split: usize,
        knot: usize,
        anchor: f64,
        knot_memory: &[f64],
    ) -> Segment<'a> {
        // history exciting segment `knot`: pre-sample plus the first `knot` sample events
        let history = &times[..split + knot];
        Segment {
            mu: theta.mu(),
            kernel: theta.kernel(),
            anchor,
            memory: knot_memory.get(knot).copied().unwrap_or(0.0),
            history,
        }
    }

    fn segment(&self, knot: usize) -> Segment<'_> {
        Self::segment_at(
            &self.theta,
            &self.times,
            self.split,
            knot,
            self.knot_times[knot],
            &self.knot_memory,
        )
    }

    pub fn theta(&self) -> &Params {
        &self.theta
    }

    /// `Λ̂(T)`.
    pub fn total(&self) -> f64 {
        *self.knot_values.last().unwrap()
    }

    pub fn horizon(&self) -> f64 {
        *self.knot_times.last().unwrap()
    }

    /// `Λ̂` at `0, t₁, …, t_n, T`.
    pub fn knot_values(&self) -> &[f64] {
        &self.knot_values
    }

    /// `Λ̂(t)` for `0 ≤ t ≤ T`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        let horizon = self.horizon();
        if !(t >= 0.0 && t <= horizon) {
            return Err(Error::Domain {
                value: t,
                lower: 0.0,
                upper: horizon,
            });
        }
        // last knot with time ≤ t, excluding the closing horizon knot
        let last = self.knot_times.len() - 2;
        let k = (self.knot_times[..=last].partition_point(|&x| x <= t)).saturating_sub(1);
        let seg = self.segment(k);
        Ok(self.knot_values[k] + seg.eval(t - self.knot_times[k]).0)
    }

    /// `Λ̂⁻¹(s)`; [`Error::OutOfHorizon`] when `s > Λ̂(T)`.
    pub fn invert(&self, s: f64) -> Result<f64> {
        let total = self.total();
        if s > total {
            return Err(Error::OutOfHorizon {
                requested: s,
                available: total,
            });
        }
        if !(s >= 0.0) {
            return Err(Error::Domain {
                value: s,
                lower: 0.0,
                upper: total,
            });
        }
        if s == total {
            return Ok(self.horizon());
        }
        let k = self.knot_values.partition_point(|&x| x <= s) - 1;
        let k = k.min(self.knot_times.len() - 2);
        let anchor = self.knot_times[k];
        let width = self.knot_times[k + 1] - anchor;
        let delta = self.segment(k).solve(s - self.knot_values[k], s, width)?;
        Ok((anchor + delta).min(self.knot_times[k + 1]))
    }
}

/// `t = Λ̂⁻¹(s)` for a fixed history.
pub fn invert_fixed(theta: &Params, h: &EventSeries, s: f64) -> Result<f64> {
    FixedCompensator::new(theta, h).invert(s)
}

/// Solves `s_next = s_prev + ∫_{t_prev}^{t} λ*(u) du` where `λ*` is built
/// on `boot_history` and `t_prev` is its last sample event (0 if none).
pub fn invert_recursive(theta: &Params, boot_history: &EventSeries, s_prev: f64, s_next: f64) -> Result<f64> {
    if !(s_next > s_prev) {
        return Err(Error::Domain {
            value: s_next,
            lower: s_prev,
            upper: f64::INFINITY,
        });
    }
    let anchor = boot_history.events().last().copied().unwrap_or(0.0);
    let kernel = theta.kernel();
    let memory = beta_of(&kernel).map_or(0.0, |b| memory_at(b, boot_history.all(), anchor));
    let seg = Segment {
        mu: theta.mu(),
        kernel,
        anchor,
        memory,
        history: boot_history.all(),
    };
    let room = boot_history.horizon() - anchor;
    let v = s_next - s_prev;
    if seg.eval(room).0 < v {
        return Err(Error::OutOfHorizon {
            requested: s_next,
            available: s_prev + seg.eval(room).0,
        });
    }
    Ok(anchor + seg.solve(v, s_next, room)?)
}

/// Generator of event times whose intensity is driven by its own output.
///
/// Starting from `origin` with a fixed prior history, each call to
/// [`RecursiveInverter::next`] maps one transformed waiting time to the next
/// event time and appends it to the history.
#[derive(Debug, Clone)]
pub struct RecursiveInverter {
    theta: Params,
    times: Vec<f64>,
    prior: usize,
    anchor: f64,
    memory: f64,
    horizon: f64,
    transformed: f64,
}

impl RecursiveInverter {
    /// `prior` holds the fixed history, all strictly before `origin`.
    pub fn new(theta: &Params, prior: &[f64], origin: f64, horizon: f64) -> Self {
        let memory = beta_of(&theta.kernel()).map_or(0.0, |b| memory_at(b, prior, origin));
        RecursiveInverter {
            theta: *theta,
            times: prior.to_vec(),
            prior: prior.len(),
            anchor: origin,
            memory,
            horizon,
            transformed: 0.0,
        }
    }

    /// Next event time for transformed wait `v > 0`; `None` once it would
    /// fall beyond the horizon.
    pub fn next(&mut self, v: f64) -> Result<Option<f64>> {
        let seg = Segment {
            mu: self.theta.mu(),
            kernel: self.theta.kernel(),
            anchor: self.anchor,
            memory: self.memory,
            history: &self.times,
        };
        let room = self.horizon - self.anchor;
        if seg.eval(room).0 < v {
            return Ok(None);
        }
        let target = self.transformed + v;
        let delta = seg.solve(v, target, room)?;
        let t = self.anchor + delta;
        if t <= self.anchor && !self.generated().is_empty() {
            return Err(Error::Numeric(alloc::format!(
                "recursive inversion produced non-increasing time {t} after {}",
                self.anchor
            )));
        }
        if let Some(beta) = beta_of(&self.theta.kernel()) {
            self.memory = self.memory * libm::exp(-beta * delta) + 1.0;
        }
        self.times.push(t);
        self.anchor = t;
        self.transformed = target;
        Ok(Some(t))
    }

    /// Event times produced so far.
    pub fn generated(&self) -> &[f64] {
        &self.times[self.prior..]
    }

    pub fn into_generated(mut self) -> Vec<f64> {
        self.times.drain(..self.prior);
        self.times
    }
}
