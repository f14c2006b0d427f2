//! Thread-parallel drivers. Results never depend on the thread count:
//! each replication owns its RNG stream and outcomes are gathered in
//! index order.

use rayon::prelude::*;

use hawkesboot_core::bootstrap::{BootstrapContext, BootstrapRun, Scheme};
use hawkesboot_core::likelihood::FitResult;
use hawkesboot_core::{EventSeries, Result};

pub fn run_bootstrap(h: &EventSeries, fit: &FitResult, scheme: Scheme, replications: usize, seed: u64) -> Result<BootstrapRun> {
    let ctx = BootstrapContext::new(h, fit, scheme, seed)?;
    let outcomes = (0..replications).into_par_iter().map(|b| ctx.replicate(b)).collect();
    Ok(ctx.collect(outcomes))
}

/// Runs `f` on a pool of `threads` workers (0 = rayon's default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}
