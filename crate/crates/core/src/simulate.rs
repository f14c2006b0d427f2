//! Exact simulation on `[−M, T]`, started empty at `−M`.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::intensity::{EventSeries, ExpState, Params};
use crate::kernels::Shape;
use crate::rng::stream;
use crate::timechange::RecursiveInverter;

/// Default burn-in length `M`.
pub const DEFAULT_BURN_IN: f64 = 500.0;

fn check_inputs(horizon: f64, burn_in: f64) -> Result<()> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidParameter(alloc::format!("horizon must be > 0, got {horizon}")));
    }
    if !(burn_in.is_finite() && burn_in >= 0.0) {
        return Err(Error::InvalidParameter(alloc::format!("burn-in must be >= 0, got {burn_in}")));
    }
    Ok(())
}

fn split_at_zero(times: Vec<f64>, horizon: f64, burn_in: f64) -> Result<EventSeries> {
    let cut = times.partition_point(|&t| t < 0.0);
    let mut pre = times;
    let events = pre.split_off(cut);
    EventSeries::with_start(pre, events, horizon, -burn_in)
}

/// Ogata thinning with the intensity just after the current point as the
/// dominating rate (valid because `λ` only decays between events).
pub fn simulate_thinning(theta: &Params, horizon: f64, burn_in: f64, seed: u64) -> Result<EventSeries> {
    simulate_thinning_with(theta, horizon, burn_in, &mut stream(seed, 0))
}

pub fn simulate_thinning_with<R: Rng + ?Sized>(
    theta: &Params,
    horizon: f64,
    burn_in: f64,
    rng: &mut R,
) -> Result<EventSeries> {
    check_inputs(horizon, burn_in)?;
    let mu = theta.mu();
    let mut t = -burn_in;
    let mut times = Vec::new();
    match theta.kernel().shape() {
        Shape::None => loop {
            let e: f64 = Exp1.sample(rng);
            t += e / mu;
            if t > horizon {
                break;
            }
            times.push(t);
        },
        Shape::Exponential { alpha, beta } => {
            let mut state = ExpState::empty(t);
            loop {
                let bound = mu + alpha * state.decayed(beta, t);
                let e: f64 = Exp1.sample(rng);
                let u = t + e / bound;
                if u > horizon {
                    break;
                }
                let rate = mu + alpha * state.decayed(beta, u);
                debug_assert!(rate <= bound * (1.0 + 1e-12));
                let accept: f64 = rng.random();
                if accept * bound <= rate {
                    state.push_event(beta, u);
                    times.push(u);
                }
                t = u;
            }
        }
        Shape::PowerLaw { .. } => {
            let k = theta.kernel();
            let rate_at = |times: &[f64], x: f64| mu + times.iter().map(|&tj| k.value_unchecked(x - tj)).sum::<f64>();
            loop {
                let bound = rate_at(&times, t);
                let e: f64 = Exp1.sample(rng);
                let u = t + e / bound;
                if u > horizon {
                    break;
                }
                let rate = rate_at(&times, u);
                debug_assert!(rate <= bound * (1.0 + 1e-12));
                let accept: f64 = rng.random();
                if accept * bound <= rate {
                    times.push(u);
                }
                t = u;
            }
        }
    }
    split_at_zero(times, horizon, burn_in)
}

/// Simulation by inverting the integrated intensity: i.i.d. `Exp(1)`
/// transformed waits mapped recursively back to the original time scale.
pub fn simulate_timechange(theta: &Params, horizon: f64, burn_in: f64, seed: u64) -> Result<EventSeries> {
    simulate_timechange_with(theta, horizon, burn_in, &mut stream(seed, 0))
}

pub fn simulate_timechange_with<R: Rng + ?Sized>(
    theta: &Params,
    horizon: f64,
    burn_in: f64,
    rng: &mut R,
) -> Result<EventSeries> {
    check_inputs(horizon, burn_in)?;
    let mut gen = RecursiveInverter::new(theta, &[], -burn_in, horizon);
    loop {
        let v: f64 = Exp1.sample(rng);
        if gen.next(v)?.is_none() {
            break;
        }
    }
    split_at_zero(gen.into_generated(), horizon, burn_in)
}
