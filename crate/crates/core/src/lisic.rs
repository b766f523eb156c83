//! Low-interference blending of performance and safety controls.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{grad_psi_agent, safe_control_from_gradient, PotentialParams};
use crate::types::{ControlInput, SwarmState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LisicParams {
    /// Saturation offset of the activation.
    pub rho: f64,
}

impl LisicParams {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(Error::Config("rho must be non-negative".into()));
        }
        Ok(LisicParams { rho })
    }
}

impl Default for LisicParams {
    fn default() -> Self {
        LisicParams { rho: 2.0 }
    }
}

/// Convex weights `(c1, c2)` on the safety and performance controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlendWeights {
    pub c1: f64,
    pub c2: f64,
}

impl BlendWeights {
    pub const SAFETY: BlendWeights = BlendWeights { c1: 1.0, c2: 0.0 };
    pub const PERFORMANCE: BlendWeights = BlendWeights { c1: 0.0, c2: 1.0 };

    pub fn from_c1(c1: f64) -> Result<Self> {
        let w = BlendWeights { c1, c2: 1.0 - c1 };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |c: f64| (0.0..=1.0).contains(&c);
        if unit(self.c1) && unit(self.c2) && self.c1 + self.c2 == 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "blend weights ({}, {}) must lie in [0,1] and sum to 1",
                self.c1, self.c2
            )))
        }
    }
}

/// Safety activation `c1 = e^g / (e^g + e^ρ)`, evaluated as the logistic
/// `1 / (1 + e^(ρ − g))` so large gradients saturate instead of overflowing.
pub fn alpha_weight(grad_norm: f64, params: &LisicParams) -> Result<BlendWeights> {
    if !(grad_norm >= 0.0) || !grad_norm.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "gradient norm must be finite and non-negative, got {grad_norm}"
        )));
    }
    let c1 = 1.0 / (1.0 + (params.rho - grad_norm).exp());
    Ok(BlendWeights { c1, c2: 1.0 - c1 })
}

/// `u = c1 · u_safe + c2 · u_perf`.
pub fn blend(
    u_perf: ControlInput,
    u_safe: ControlInput,
    weights: BlendWeights,
) -> Result<ControlInput> {
    weights.validate()?;
    let u = ControlInput::new(u_safe.vector * weights.c1 + u_perf.vector * weights.c2);
    debug_assert!(u.norm() <= u_perf.norm().max(u_safe.norm()) * (1.0 + 1e-12) + 1e-15);
    Ok(u)
}

/// Per-agent intermediate values of one blending step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LisicStep {
    pub control: ControlInput,
    pub u_safe: ControlInput,
    pub weights: BlendWeights,
    pub grad_norm: f64,
}

pub fn lisic_policy_detailed(
    swarm: &SwarmState,
    u_perf_all: &[ControlInput],
    pot: &PotentialParams,
    params: &LisicParams,
    u_max: f64,
) -> Result<Vec<LisicStep>> {
    if u_perf_all.len() != swarm.len() {
        return Err(Error::InvalidArgument(format!(
            "{} performance inputs for {} agents",
            u_perf_all.len(),
            swarm.len()
        )));
    }
    (0..swarm.len())
        .map(|i| {
            let g = grad_psi_agent(&swarm.positions, &swarm.sigma, pot, i)?;
            let grad_norm = g.norm();
            let u_safe = safe_control_from_gradient(g, pot, u_max);
            let weights = alpha_weight(grad_norm, params)?;
            let control = blend(u_perf_all[i], u_safe, weights)?;
            Ok(LisicStep {
                control,
                u_safe,
                weights,
                grad_norm,
            })
        })
        .collect()
}

pub fn lisic_policy(
    swarm: &SwarmState,
    u_perf_all: &[ControlInput],
    pot: &PotentialParams,
    params: &LisicParams,
    u_max: f64,
) -> Result<Vec<ControlInput>> {
    Ok(lisic_policy_detailed(swarm, u_perf_all, pot, params, u_max)?
        .into_iter()
        .map(|s| s.control)
        .collect())
}
