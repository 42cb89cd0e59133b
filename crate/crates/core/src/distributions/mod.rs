//! The free GIG law `μ(λ, α, β)` and the Marchenko–Pastur (free Poisson) law.
//!
//! `μ(λ,α,β)` has density `(1/2π)·√((x−a)(b−x))·(α/x + β/(√(ab)·x²))` on
//! `[a, b]`, where `0 < a < b` solve
//!
//! ```text
//! 1 − λ + α√(ab) − β(a+b)/(2ab) = 0
//! 1 + λ + β/√(ab) − α(a+b)/2    = 0
//! ```

mod fgig;
mod mp;
mod support;

pub use fgig::{fgig_cauchy, fgig_density, fgig_moment, fgig_rtransform, gamma_const, sample_spectrum, FreeGig, GammaConst};
pub use mp::{mp_density, mp_rtransform, MarchenkoPastur};
pub use support::{solve_support, support_residuals, SupportInterval};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeGigParams {
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl FreeGigParams {
    pub fn new(lambda: f64, alpha: f64, beta: f64) -> Result<Self> {
        let p = Self { lambda, alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() {
            return Err(Error::Parameter(format!("lambda must be finite, got {}", self.lambda)));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::Parameter(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::Parameter(format!("beta must be > 0, got {}", self.beta)));
        }
        Ok(())
    }
}

/// `X ~ μ(λ,α,β)` implies `X⁻¹ ~ μ(−λ,β,α)`.
pub fn invert_params(p: FreeGigParams) -> FreeGigParams {
    FreeGigParams {
        lambda: -p.lambda,
        alpha: p.beta,
        beta: p.alpha,
    }
}

/// Rate `λ` and jump `γ`; cumulants are `R_n = γⁿλ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarchenkoPasturParams {
    pub rate: f64,
    pub jump: f64,
}

impl MarchenkoPasturParams {
    pub fn new(rate: f64, jump: f64) -> Result<Self> {
        let p = Self { rate, jump };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate.is_finite() && self.rate >= 0.0) {
            return Err(Error::Parameter(format!("rate must be >= 0, got {}", self.rate)));
        }
        if !(self.jump.is_finite() && self.jump > 0.0) {
            return Err(Error::Parameter(format!("jump must be > 0, got {}", self.jump)));
        }
        Ok(())
    }

    /// `[γ(1−√λ)², γ(1+√λ)²]`.
    pub fn edges(&self) -> (f64, f64) {
        let r = self.rate.sqrt();
        (self.jump * (1.0 - r).powi(2), self.jump * (1.0 + r).powi(2))
    }

    pub fn atom(&self) -> f64 {
        (1.0 - self.rate).max(0.0)
    }
}

/// `√(z−a)·√(z−b)` with principal roots: analytic off `[a, b]` and `~ z` at
/// infinity.
pub(crate) fn edge_sqrt(z: crate::Complex64, a: f64, b: f64) -> crate::Complex64 {
    (z - a).sqrt() * (z - b).sqrt()
}
