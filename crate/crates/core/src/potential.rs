//! Flocking-style safety layer: the pairwise potential `ψ`, its gradient and
//! the normalised safety control.
//!
//! `ψ` switches on the hysteresis edge state of each pair:
//!
//! ```text
//! σ = 1:  ψ(z) = κ R / (z (R − z))        bowl with minimum at R/2
//! σ = 0:  ψ(z) = sqrt(z − R + ε)          weak attraction from outside range
//! ```
//!
//! All lengths are expressed in units of [`PotentialParams::length_scale`]
//! before evaluation, so `ψ` and its gradient magnitudes do not depend on the
//! metre scale of the simulation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SigmaMatrix;
use crate::types::{ControlInput, SimConfig, Vec2};

pub const DEFAULT_GRAD_CAP: f64 = 1e6;
pub const DEFAULT_ZERO_GRAD_TOL: f64 = 1e-12;
/// Potentials are evaluated in kilometres by default.
pub const DEFAULT_LENGTH_SCALE: f64 = 1_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialParams {
    pub kappa: f64,
    /// m
    pub r_com: f64,
    /// m
    pub epsilon: f64,
    /// Ceiling on the per-pair `|dψ/dz|`.
    pub grad_cap: f64,
    /// Summed gradients below this norm yield a zero safety control.
    pub zero_grad_tol: f64,
    /// Metres per potential length unit.
    pub length_scale: f64,
}

impl PotentialParams {
    pub fn new(kappa: f64, r_com: f64, epsilon: f64) -> Result<Self> {
        let p = PotentialParams {
            kappa,
            r_com,
            epsilon,
            grad_cap: DEFAULT_GRAD_CAP,
            zero_grad_tol: DEFAULT_ZERO_GRAD_TOL,
            length_scale: DEFAULT_LENGTH_SCALE,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn from_config(config: &SimConfig) -> Self {
        PotentialParams {
            kappa: config.kappa,
            r_com: config.r_com,
            epsilon: config.epsilon,
            grad_cap: DEFAULT_GRAD_CAP,
            zero_grad_tol: DEFAULT_ZERO_GRAD_TOL,
            length_scale: DEFAULT_LENGTH_SCALE,
        }
    }

    pub fn with_length_scale(self, length_scale: f64) -> Self {
        PotentialParams {
            length_scale,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.kappa > 0.0) {
            return bad("kappa must be positive");
        }
        if !(self.epsilon > 0.0 && self.epsilon < self.r_com) {
            return bad("epsilon must lie in (0, r_com)");
        }
        if !(self.grad_cap > 0.0) {
            return bad("grad_cap must be positive");
        }
        if !(self.zero_grad_tol >= 0.0) {
            return bad("zero_grad_tol must be non-negative");
        }
        if !(self.length_scale > 0.0 && self.length_scale.is_finite()) {
            return bad("length_scale must be positive");
        }
        Ok(())
    }

    /// Value ceiling matching the gradient cap: near either singularity
    /// `ψ ≈ κ/δ` and `|ψ'| ≈ κ/δ²`, so `|ψ'| = cap` at `ψ = sqrt(κ · cap)`.
    pub fn psi_max(&self) -> f64 {
        (self.kappa * self.grad_cap).sqrt()
    }

    fn scaled(&self, z: f64) -> (f64, f64, f64) {
        let l = self.length_scale;
        (z / l, self.r_com / l, self.epsilon / l)
    }
}

fn check_pair(z: f64, sigma: bool, params: &PotentialParams) -> Result<()> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::NonPositiveDistance(z));
    }
    let consistent = if sigma {
        z < params.r_com
    } else {
        z >= params.r_com - params.epsilon
    };
    if !consistent {
        return Err(Error::InconsistentSigma {
            sigma: u8::from(sigma),
            distance: z,
        });
    }
    Ok(())
}

/// Pair potential at distance `z` (metres) under edge state `sigma`.
pub fn psi(z: f64, sigma: bool, params: &PotentialParams) -> Result<f64> {
    check_pair(z, sigma, params)?;
    let (z, r, eps) = params.scaled(z);
    let raw = if sigma {
        params.kappa * r / (z * (r - z))
    } else {
        (z - r + eps).max(0.0).sqrt()
    };
    let cap = params.psi_max();
    if raw > cap {
        log::debug!("psi clamped at z={z} (raw {raw:e} > {cap:e})");
        Ok(cap)
    } else {
        Ok(raw)
    }
}

/// `dψ/dz` in potential units, clamped to `±grad_cap`.
pub fn dpsi_dz(z: f64, sigma: bool, params: &PotentialParams) -> Result<f64> {
    check_pair(z, sigma, params)?;
    let (z, r, eps) = params.scaled(z);
    let raw = if sigma {
        let denom = z * (r - z);
        params.kappa * r * (2.0 * z - r) / (denom * denom)
    } else {
        let root = (z - r + eps).max(0.0).sqrt();
        1.0 / (2.0 * root)
    };
    let cap = params.grad_cap;
    if raw.abs() > cap {
        log::debug!("dpsi/dz clamped at z={z} (raw {raw:e})");
        Ok(cap.copysign(raw))
    } else {
        Ok(raw)
    }
}

/// `Σ_j ∇_{q_i} ψ(‖q_i − q_j‖)`, in potential units per length unit.
pub fn grad_psi_agent(
    positions: &[Vec2],
    sigma: &SigmaMatrix,
    params: &PotentialParams,
    i: usize,
) -> Result<Vec2> {
    let qi = positions[i];
    let mut g = Vec2::ZERO;
    for (j, &qj) in positions.iter().enumerate() {
        if j == i {
            continue;
        }
        let diff = qi - qj;
        let z = diff.norm();
        if z == 0.0 {
            return Err(Error::CoincidentAgents(i.min(j), i.max(j)));
        }
        let d = dpsi_dz(z, sigma.get(i, j), params)?;
        g += diff * (d / z);
    }
    Ok(g)
}

/// Full-thrust step down the summed potential gradient; zero when the
/// gradient norm is below `zero_grad_tol`.
pub fn safe_control_from_gradient(
    gradient: Vec2,
    params: &PotentialParams,
    u_max: f64,
) -> ControlInput {
    let n = gradient.norm();
    if n < params.zero_grad_tol || n == 0.0 {
        ControlInput::ZERO
    } else {
        ControlInput::new(gradient * (-u_max / n))
    }
}

pub fn safe_control(
    positions: &[Vec2],
    sigma: &SigmaMatrix,
    params: &PotentialParams,
    i: usize,
    u_max: f64,
) -> Result<ControlInput> {
    let g = grad_psi_agent(positions, sigma, params, i)?;
    Ok(safe_control_from_gradient(g, params, u_max))
}
