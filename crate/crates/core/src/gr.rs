//! Regularizer gradients for `L̃ = L + (γ/2)‖∇L‖²`.
//!
//! `∇‖∇L‖²/2 = H∇L` is computed three ways:
//!
//! - forward difference `ΔR_F(ε) = (∇L(θ + ε∇L) − ∇L(θ)) / ε`
//! - backward difference `ΔR_B(ε) = ΔR_F(−ε)`
//! - double backprop, the exact Hessian-vector product `H(θ)∇L(θ)`
//!
//! The finite differences use one extra gradient evaluation each. Below
//! `ε ≈ 1e−8` the difference `∇L(θ') − ∇L(θ)` loses most of its significant
//! digits to cancellation (relative error grows like `u/ε` with `u` the unit
//! roundoff); nothing here guards against that, use [`delta_r_db`] for the limit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{Objective, ParamVector};

/// How the regularizer gradient is computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", content = "epsilon", rename_all = "snake_case")]
pub enum GrMethod {
    None,
    ForwardFd(f64),
    BackwardFd(f64),
    DoubleBackprop,
}

impl GrMethod {
    pub fn forward(eps: f64) -> Result<Self> {
        check_positive_eps(eps)?;
        Ok(Self::ForwardFd(eps))
    }

    pub fn backward(eps: f64) -> Result<Self> {
        check_positive_eps(eps)?;
        Ok(Self::BackwardFd(eps))
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::ForwardFd(e) | Self::BackwardFd(e) => check_positive_eps(e),
            Self::None | Self::DoubleBackprop => Ok(()),
        }
    }

    /// Ascent step with its sign: `ε` for forward, `−ε` for backward, `0` otherwise.
    pub fn signed_epsilon(&self) -> f64 {
        match *self {
            Self::ForwardFd(e) => e,
            Self::BackwardFd(e) => -e,
            Self::None | Self::DoubleBackprop => 0.0,
        }
    }

    /// Short tag used in tables: `none`, `fgr`, `bgr`, `db`.
    pub fn tag(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::ForwardFd(_) => "fgr",
            Self::BackwardFd(_) => "bgr",
            Self::DoubleBackprop => "db",
        }
    }
}

fn check_positive_eps(eps: f64) -> Result<()> {
    if eps.is_finite() && eps > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "finite-difference step must be positive and finite, got {eps}"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrConfig {
    pub method: GrMethod,
    pub gamma: f64,
}

impl GrConfig {
    pub fn new(method: GrMethod, gamma: f64) -> Result<Self> {
        let cfg = Self { method, gamma };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn plain() -> Self {
        Self { method: GrMethod::None, gamma: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        self.method.validate()?;
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be finite and nonnegative, got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// `(∇L(θ + ε∇L(θ)) − ∇L(θ)) / ε` for any nonzero `ε`.
pub fn delta_r_forward(obj: &dyn Objective, theta: &ParamVector, eps: f64) -> Result<ParamVector> {
    let g = obj.gradient(theta)?;
    delta_r_forward_at(obj, theta, &g, eps)
}

/// Same as [`delta_r_forward`] with `∇L(θ)` already evaluated.
pub fn delta_r_forward_at(
    obj: &dyn Objective,
    theta: &ParamVector,
    grad: &ParamVector,
    eps: f64,
) -> Result<ParamVector> {
    if eps == 0.0 || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "finite-difference step must be nonzero and finite, got {eps}; use delta_r_db for the limit"
        )));
    }
    let shifted = obj.gradient(&theta.add_scaled(eps, grad)?)?;
    grad.diff_quotient(&shifted, eps)
}

/// `(∇L(θ) − ∇L(θ − ε∇L(θ))) / ε`, evaluated as `ΔR_F(−ε)`.
pub fn delta_r_backward(obj: &dyn Objective, theta: &ParamVector, eps: f64) -> Result<ParamVector> {
    check_positive_eps(eps)?;
    delta_r_forward(obj, theta, -eps)
}

/// `H(θ)∇L(θ)`.
pub fn delta_r_db(obj: &dyn Objective, theta: &ParamVector) -> Result<ParamVector> {
    let g = obj.gradient(theta)?;
    obj.hvp(theta, &g)
}

/// `∇L(θ) + γ·ΔR(θ)` for the configured method.
pub fn regularized_gradient(obj: &dyn Objective, theta: &ParamVector, cfg: &GrConfig) -> Result<ParamVector> {
    let g = obj.gradient(theta)?;
    regularized_direction(obj, theta, &g, cfg)
}

/// [`regularized_gradient`] with `∇L(θ)` already evaluated.
///
/// Finite-difference variants are combined as `(1 − γ/ε)∇L(θ) + (γ/ε)∇L(θ')`,
/// which is algebraically `∇L + γΔR_F(ε)` and reduces to exactly `∇L(θ')`
/// when `γ = ε`.
pub fn regularized_direction(
    obj: &dyn Objective,
    theta: &ParamVector,
    grad: &ParamVector,
    cfg: &GrConfig,
) -> Result<ParamVector> {
    cfg.validate()?;
    if cfg.gamma == 0.0 {
        return Ok(grad.clone());
    }
    match cfg.method {
        GrMethod::None => Ok(grad.clone()),
        GrMethod::DoubleBackprop => grad.add_scaled(cfg.gamma, &obj.hvp(theta, grad)?),
        GrMethod::ForwardFd(_) | GrMethod::BackwardFd(_) => {
            let eps = cfg.method.signed_epsilon();
            let shifted = obj.gradient(&theta.add_scaled(eps, grad)?)?;
            let q2 = cfg.gamma / eps;
            let q1 = 1.0 - q2;
            ParamVector::from_dvector(grad.as_dvector() * q1 + shifted.as_dvector() * q2)
        }
    }
}

/// Composite-midpoint estimate of `(1/ε)∫₀^ε H(θ + s∇L(θ))∇L(θ) ds` with `k` nodes.
///
/// The integral equals `ΔR_F(ε)` exactly, so this serves as an independent
/// check on the finite difference.
pub fn avg_hessian_quadrature(obj: &dyn Objective, theta: &ParamVector, eps: f64, k: usize) -> Result<ParamVector> {
    if k < 1 {
        return Err(Error::InvalidParameter("quadrature needs at least one node".into()));
    }
    if !eps.is_finite() {
        return Err(Error::NonFinite("quadrature interval"));
    }
    let g = obj.gradient(theta)?;
    let h = eps / k as f64;
    let mut acc = nalgebra::DVector::zeros(g.len());
    for j in 0..k {
        let s = (j as f64 + 0.5) * h;
        acc += obj.hvp(&theta.add_scaled(s, &g)?, &g)?.as_dvector();
    }
    ParamVector::from_dvector(acc / k as f64)
}
