//! Performance controllers and the comparison safe-interaction policies.

mod value_grid;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use value_grid::{
    compute_value_grid, edge_time, value_grid_control, GridSpec, ValueGrid, SPEED_FLOOR,
};

use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::graph::adjacency_from_positions;
use crate::potential::PotentialParams;
use crate::types::{centroid, ControlInput, SwarmState, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetDisc {
    pub center: Vec2,
    /// m
    pub radius: f64,
}

impl TargetDisc {
    pub fn new(center: Vec2, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() || !center.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "target radius must be positive, got {radius}"
            )));
        }
        Ok(TargetDisc { center, radius })
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.distance(self.center) <= self.radius
    }

    /// Distance from `p` to the disc, zero inside.
    pub fn distance_to(&self, p: Vec2) -> f64 {
        (p.distance(self.center) - self.radius).max(0.0)
    }
}

/// Full thrust straight at the target centre; zero inside the disc.
pub fn naive_to_target(position: Vec2, target: &TargetDisc, u_max: f64) -> ControlInput {
    if target.contains(position) {
        return ControlInput::ZERO;
    }
    let d = target.center - position;
    ControlInput::new(d / d.norm() * u_max)
}

/// Which safe-interaction layer sits on top of the performance controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Performance control only.
    Baseline,
    /// Three-mode reactive connectivity controller.
    Reactive,
    /// Potential-based blending of safety and performance.
    Flocking,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Baseline, PolicyKind::Reactive, PolicyKind::Flocking];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Baseline => "baseline",
            PolicyKind::Reactive => "reactive",
            PolicyKind::Flocking => "flocking",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown policy `{s}`")))
    }
}

/// Single-agent performance controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerfKind {
    Naive,
    #[default]
    #[serde(rename = "valuegrid")]
    ValueGrid,
}

impl PerfKind {
    pub fn name(self) -> &'static str {
        match self {
            PerfKind::Naive => "naive",
            PerfKind::ValueGrid => "valuegrid",
        }
    }
}

impl fmt::Display for PerfKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PerfKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(PerfKind::Naive),
            "valuegrid" => Ok(PerfKind::ValueGrid),
            _ => Err(Error::InvalidArgument(format!("unknown perf controller `{s}`"))),
        }
    }
}

/// Stateful performance layer: holds the planning field and the current
/// value grid, recomputed every `replan_interval` seconds.
#[derive(Debug, Clone)]
pub struct PerfPlanner {
    pub kind: PerfKind,
    pub target: TargetDisc,
    pub u_max: f64,
    pub replan_interval: f64,
    plan_field: Arc<dyn FlowField>,
    grid: Option<ValueGrid>,
    next_replan: f64,
    /// Number of per-agent fallbacks to the naive controller.
    pub fallbacks: usize,
}

impl PerfPlanner {
    pub fn new(
        kind: PerfKind,
        plan_field: Arc<dyn FlowField>,
        target: TargetDisc,
        u_max: f64,
        replan_interval: f64,
    ) -> Result<Self> {
        if !(replan_interval > 0.0) {
            return Err(Error::Config("replan interval must be positive".into()));
        }
        Ok(PerfPlanner {
            kind,
            target,
            u_max,
            replan_interval,
            plan_field,
            grid: None,
            next_replan: f64::NEG_INFINITY,
            fallbacks: 0,
        })
    }

    pub fn grid(&self) -> Option<&ValueGrid> {
        self.grid.as_ref()
    }

    /// Recomputes the value grid when a replan is due.
    pub fn replan_if_due(&mut self, positions: &[Vec2], time: f64) -> Result<bool> {
        if self.kind != PerfKind::ValueGrid || time < self.next_replan {
            return Ok(false);
        }
        let spec = GridSpec::for_mission(positions, &self.target);
        self.grid = Some(compute_value_grid(
            self.plan_field.as_ref(),
            time,
            &self.target,
            &spec,
            self.u_max,
        )?);
        self.next_replan = time + self.replan_interval;
        Ok(true)
    }

    /// Per-agent performance controls. Agents without value-grid guidance
    /// fall back to the naive controller.
    pub fn controls(&mut self, positions: &[Vec2]) -> Result<Vec<ControlInput>> {
        let mut out = Vec::with_capacity(positions.len());
        for &p in positions {
            let u = match &self.grid {
                Some(g) => match value_grid_control(g, p, self.u_max) {
                    Ok(u) => u,
                    Err(Error::NoGuidance { .. }) => {
                        self.fallbacks += 1;
                        naive_to_target(p, &self.target, self.u_max)
                    }
                    Err(e) => return Err(e),
                },
                None => naive_to_target(p, &self.target, self.u_max),
            };
            out.push(u);
        }
        Ok(out)
    }
}

/// Identity: each agent follows its own performance control.
pub fn baseline_policy(_swarm: &SwarmState, u_perf_all: &[ControlInput]) -> Vec<ControlInput> {
    u_perf_all.to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReactiveMode {
    AchieveConnectivity,
    MaintainConnectivity,
    GoToGoal,
}

fn thrust_towards(from: Vec2, to: Vec2, u_max: f64) -> ControlInput {
    let d = to - from;
    let n = d.norm();
    if n > 0.0 {
        ControlInput::new(d / n * u_max)
    } else {
        ControlInput::ZERO
    }
}

/// Mode selection and control for agent `i` on the raw disk graph.
pub fn reactive_step(
    swarm: &SwarmState,
    i: usize,
    pot: &PotentialParams,
    u_max: f64,
    u_perf_i: ControlInput,
) -> (ReactiveMode, ControlInput) {
    let q = &swarm.positions;
    let me = q[i];
    let linked: Vec<usize> = (0..q.len())
        .filter(|&j| j != i && me.distance(q[j]) < pot.r_com)
        .collect();
    if linked.is_empty() {
        let nearest = (0..q.len())
            .filter(|&j| j != i)
            .min_by(|&a, &b| me.distance(q[a]).total_cmp(&me.distance(q[b])))
            .expect("swarm has at least two agents");
        return (
            ReactiveMode::AchieveConnectivity,
            thrust_towards(me, q[nearest], u_max),
        );
    }
    let endangered: Vec<Vec2> = linked
        .iter()
        .map(|&j| q[j])
        .filter(|p| me.distance(*p) >= pot.r_com - pot.epsilon)
        .collect();
    if !endangered.is_empty() {
        return (
            ReactiveMode::MaintainConnectivity,
            thrust_towards(me, centroid(&endangered), u_max),
        );
    }
    (ReactiveMode::GoToGoal, u_perf_i)
}

pub fn reactive_policy(
    swarm: &SwarmState,
    i: usize,
    pot: &PotentialParams,
    u_max: f64,
    u_perf_i: ControlInput,
) -> ControlInput {
    reactive_step(swarm, i, pot, u_max, u_perf_i).1
}

/// Number of agents with degree zero in the raw disk graph.
pub fn isolated_count(positions: &[Vec2], r_com: f64) -> usize {
    let a = adjacency_from_positions(positions, r_com);
    (0..positions.len()).filter(|&i| a.degree(i) == 0).count()
}
