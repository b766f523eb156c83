//! Shared domain types: planar vectors, swarm state, controls and the
//! simulation configuration.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SigmaMatrix;

/// Planar vector in metres (positions) or metres per second (velocities).
/// `x` points east, `y` north.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Counter-clockwise rotation by `angle` radians.
    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, rhs: Vec2) -> Vec2 {
        rhs * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x / rhs, self.y / rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// A single agent: index within the swarm plus its position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    pub id: usize,
    pub position: Vec2,
}

/// Positions of all agents at one instant together with the persistent
/// hysteresis edge state.
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState {
    pub time: f64,
    pub positions: Vec<Vec2>,
    pub sigma: SigmaMatrix,
}

impl SwarmState {
    /// Builds the state at mission start. Edges are initialised from the raw
    /// disk graph (`d < r_com`) without applying the hysteresis band.
    pub fn new(time: f64, positions: Vec<Vec2>, r_com: f64) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "a swarm needs at least 2 agents, got {}",
                positions.len()
            )));
        }
        if let Some(p) = positions.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite position ({}, {})",
                p.x, p.y
            )));
        }
        let sigma = SigmaMatrix::from_positions(&positions, r_com);
        Ok(SwarmState {
            time,
            positions,
            sigma,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentState> + '_ {
        self.positions
            .iter()
            .enumerate()
            .map(|(id, &position)| AgentState { id, position })
    }

    pub fn centroid(&self) -> Vec2 {
        centroid(&self.positions)
    }
}

pub fn centroid(positions: &[Vec2]) -> Vec2 {
    let sum = positions.iter().fold(Vec2::ZERO, |acc, &p| acc + p);
    sum / positions.len() as f64
}

/// Symmetric matrix of pairwise euclidean distances.
pub fn distance_matrix(positions: &[Vec2]) -> Vec<Vec<f64>> {
    let n = positions.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let dij = positions[i].distance(positions[j]);
            d[i][j] = dij;
            d[j][i] = dij;
        }
    }
    d
}

/// A velocity command in m/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub vector: Vec2,
}

impl ControlInput {
    pub const ZERO: ControlInput = ControlInput { vector: Vec2::ZERO };

    pub fn new(vector: Vec2) -> Self {
        ControlInput { vector }
    }

    pub fn norm(&self) -> f64 {
        self.vector.norm()
    }

    /// Whether the command lies in the bounded control set.
    pub fn within(&self, u_max: f64) -> bool {
        self.norm() <= u_max + 1e-9
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Euler,
    #[default]
    Rk4,
}

/// Simulation tunables. Serialises to a flat JSON object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_agents: usize,
    /// m/s
    pub u_max: f64,
    /// m
    pub r_com: f64,
    /// m
    pub r_coll: f64,
    /// hysteresis band, m
    pub epsilon: f64,
    pub kappa: f64,
    /// softmax saturation offset
    pub rho: f64,
    /// s
    pub dt: f64,
    /// s
    pub timeout: f64,
    /// m
    pub target_radius: f64,
    pub integrator: Integrator,
}

/// Planar stand-in for a 0.1 degree target radius.
pub const TARGET_RADIUS_M: f64 = 11_100.0;

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_agents: 30,
            u_max: 0.1,
            r_com: 9_000.0,
            r_coll: 100.0,
            epsilon: 300.0,
            kappa: 2.0,
            rho: 2.0,
            dt: 600.0,
            timeout: 144.0 * 3600.0,
            target_radius: TARGET_RADIUS_M,
            integrator: Integrator::Rk4,
        }
    }
}

impl SimConfig {
    /// Small-scale defaults used for desk experiments: 10 agents, 48 h.
    pub fn desk() -> Self {
        SimConfig {
            n_agents: 10,
            timeout: 48.0 * 3600.0,
            ..SimConfig::default()
        }
    }
}

fn require(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Config(msg.to_string()))
    }
}

/// Returns the config unchanged iff every field invariant holds; otherwise an
/// error naming the offending field.
pub fn validate_config(raw: SimConfig) -> Result<SimConfig> {
    let finite = [
        ("u_max", raw.u_max),
        ("r_com", raw.r_com),
        ("r_coll", raw.r_coll),
        ("epsilon", raw.epsilon),
        ("kappa", raw.kappa),
        ("rho", raw.rho),
        ("dt", raw.dt),
        ("timeout", raw.timeout),
        ("target_radius", raw.target_radius),
    ];
    for (name, value) in finite {
        if !value.is_finite() {
            return Err(Error::Config(format!("{name} must be finite")));
        }
    }
    require(raw.n_agents >= 2, "n_agents must be at least 2")?;
    require(raw.u_max > 0.0, "u_max must be positive")?;
    require(raw.r_com > 0.0, "r_com must be positive")?;
    require(raw.r_coll > 0.0, "r_coll must be positive")?;
    require(raw.r_coll < raw.r_com, "r_coll must be < r_com")?;
    require(raw.epsilon > 0.0, "epsilon must be positive")?;
    require(raw.epsilon < raw.r_com, "epsilon must be < r_com")?;
    require(raw.kappa > 0.0, "kappa must be positive")?;
    require(raw.rho >= 0.0, "rho must be non-negative")?;
    require(raw.dt > 0.0, "dt must be positive")?;
    require(raw.timeout > 0.0, "timeout must be positive")?;
    require(raw.target_radius > 0.0, "target_radius must be positive")?;
    Ok(raw)
}
