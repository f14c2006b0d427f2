//! IO, parallel drivers, Monte Carlo experiments and output formats for
//! `hawkesboot-core`.

pub mod cli;
pub mod critical;
pub mod diagnose;
pub mod export;
pub mod io;
pub mod montecarlo;
pub mod parallel;
pub mod report;
