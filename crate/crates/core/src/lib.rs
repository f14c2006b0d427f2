#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod bootstrap;
pub mod diagnostics;
pub mod error;
pub mod intensity;
pub mod kernels;
pub mod likelihood;
pub mod linalg;
pub mod rng;
pub mod simulate;
pub mod timechange;

pub use error::{Error, Result};
pub use intensity::{EventSeries, Params};
pub use kernels::{Kernel, KernelFamily};
