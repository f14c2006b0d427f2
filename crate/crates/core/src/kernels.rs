//! Excitation kernels and their closed-form antiderivatives.
//!
//! Two families are supported: the exponential kernel `α·exp(−βx)` and the
//! power-law kernel `α·(x+β)^(−δ)`. A third kernel,
//! [`Kernel::NONE`], stands for `γ ≡ 0` and turns the process into a homogeneous Poisson
//! process.

use alloc::format;

use crate::error::{Error, Result};

/// `|δ − 1|` below this uses the logarithmic antiderivative.
pub const POWER_LAW_LOG_BRANCH: f64 = 1e-8;

/// Parameters of a kernel, for inspection by `match`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// `γ ≡ 0`.
    None,
    Exponential { alpha: f64, beta: f64 },
    PowerLaw { alpha: f64, beta: f64, delta: f64 },
}

/// An excitation kernel `γ(x)` with validated parameters.
///
/// Only the checked constructors build one, so every kernel in circulation
/// has finite parameters, `β > 0` and (power law) `δ > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel(Shape);

/// Kernel family, used to select an estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    Poisson,
    Exponential,
    PowerLaw,
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")))
    }
}

impl Kernel {
    /// `γ ≡ 0` (homogeneous Poisson process).
    pub const NONE: Kernel = Kernel(Shape::None);

    pub fn shape(&self) -> Shape {
        self.0
    }

    pub fn exponential(alpha: f64, beta: f64) -> Result<Self> {
        check_finite("alpha", alpha)?;
        check_finite("beta", beta)?;
        if alpha < 0.0 {
            return Err(Error::InvalidParameter(format!("alpha must be >= 0, got {alpha}")));
        }
        if beta <= 0.0 {
            return Err(Error::InvalidParameter(format!("beta must be > 0, got {beta}")));
        }
        Ok(Kernel(Shape::Exponential { alpha, beta }))
    }

    /// Exponential kernel from the branching ratio `a = α/β`.
    pub fn exponential_branching(a: f64, beta: f64) -> Result<Self> {
        Self::exponential(a * beta, beta)
    }

    pub fn power_law(alpha: f64, beta: f64, delta: f64) -> Result<Self> {
        check_finite("alpha", alpha)?;
        check_finite("beta", beta)?;
        check_finite("delta", delta)?;
        if alpha < 0.0 {
            return Err(Error::InvalidParameter(format!("alpha must be >= 0, got {alpha}")));
        }
        if beta <= 0.0 {
            return Err(Error::InvalidParameter(format!("beta must be > 0, got {beta}")));
        }
        if delta <= 0.0 {
            return Err(Error::InvalidParameter(format!("delta must be > 0, got {delta}")));
        }
        Ok(Kernel(Shape::PowerLaw { alpha, beta, delta }))
    }

    pub fn family(&self) -> KernelFamily {
        match self.0 {
            Shape::None => KernelFamily::Poisson,
            Shape::Exponential { .. } => KernelFamily::Exponential,
            Shape::PowerLaw { .. } => KernelFamily::PowerLaw,
        }
    }

    /// Jump size `α` (zero for [`Kernel::NONE`]).
    pub fn alpha(&self) -> f64 {
        match self.0 {
            Shape::None => 0.0,
            Shape::Exponential { alpha, .. } | Shape::PowerLaw { alpha, .. } => alpha,
        }
    }

    /// `γ(x)` for `x ≥ 0`.
    pub fn value(&self, x: f64) -> Result<f64> {
        check_elapsed(x)?;
        Ok(self.value_unchecked(x))
    }

    /// `∫₀ˣ γ(u) du` for `x ≥ 0`.
    pub fn integral(&self, x: f64) -> Result<f64> {
        check_elapsed(x)?;
        Ok(self.integral_unchecked(x))
    }

    #[inline]
    pub(crate) fn value_unchecked(&self, x: f64) -> f64 {
        match self.0 {
            Shape::None => 0.0,
            Shape::Exponential { alpha, beta } => alpha * libm::exp(-beta * x),
            Shape::PowerLaw { alpha, beta, delta } => alpha * libm::pow(x + beta, -delta),
        }
    }

    #[inline]
    pub(crate) fn integral_unchecked(&self, x: f64) -> f64 {
        match self.0 {
            Shape::None => 0.0,
            Shape::Exponential { alpha, beta } => {
                if x.is_infinite() {
                    alpha / beta
                } else {
                    -(alpha / beta) * libm::expm1(-beta * x)
                }
            }
            Shape::PowerLaw { alpha, beta, delta } => {
                let log_ratio = libm::log1p(x / beta);
                if (delta - 1.0).abs() < POWER_LAW_LOG_BRANCH {
                    alpha * log_ratio
                } else {
                    // α β^{1−δ} (1 − (1+x/β)^{1−δ}) / (δ−1)
                    let eps = 1.0 - delta;
                    alpha * libm::pow(beta, eps) * libm::expm1(eps * log_ratio) / eps
                }
            }
        }
    }

    /// `∫₀^∞ γ(u) du`; `+∞` for power-law kernels with `δ ≤ 1`.
    pub fn branching_ratio(&self) -> f64 {
        match self.0 {
            Shape::None => 0.0,
            Shape::Exponential { alpha, beta } => alpha / beta,
            Shape::PowerLaw { alpha, beta, delta } => {
                if alpha == 0.0 {
                    0.0
                } else if delta > 1.0 {
                    alpha * libm::pow(beta, 1.0 - delta) / (delta - 1.0)
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

fn check_elapsed(x: f64) -> Result<()> {
    if x >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            value: x,
            lower: 0.0,
            upper: f64::INFINITY,
        })
    }
}
