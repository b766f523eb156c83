//! Fixed-step closed-loop simulation `q̇_i = v(q_i, t) + u_i` with per-step
//! logging and the tension-energy monitor.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::graph::{
    adjacency_from_positions, fiedler_value, is_connected, laplacian, update_sigma, Adjacency,
    SigmaMatrix, CONNECTIVITY_EPS,
};
use crate::lisic::{lisic_policy_detailed, BlendWeights, LisicParams};
use crate::missions::MissionSpec;
use crate::policies::{baseline_policy, reactive_step, PerfKind, PerfPlanner, PolicyKind, ReactiveMode};
use crate::potential::{psi, PotentialParams};
use crate::types::{distance_matrix, ControlInput, Integrator, SimConfig, SwarmState, Vec2};

/// Rounds to 9 significant digits so text output is stable across platforms.
pub fn round_sig9(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

/// Text form of [`round_sig9`].
pub fn fmt_sig9(x: f64) -> String {
    format!("{}", round_sig9(x))
}

/// Advances every agent by one step with controls held constant, then
/// updates the hysteresis edge state on the new distances.
pub fn step(
    state: &SwarmState,
    controls: &[ControlInput],
    field: &dyn FlowField,
    config: &SimConfig,
) -> Result<SwarmState> {
    if controls.len() != state.len() {
        return Err(Error::InvalidArgument(format!(
            "{} controls for {} agents",
            controls.len(),
            state.len()
        )));
    }
    let dt = config.dt;
    if !(dt > 0.0) {
        return Err(Error::Config("dt must be positive".into()));
    }
    let t = state.time;
    let rate = |q: Vec2, s: f64, u: Vec2| -> Result<Vec2> { Ok(field.sample(q, s)? + u) };
    let mut next = Vec::with_capacity(state.len());
    for (&q, c) in state.positions.iter().zip(controls) {
        let u = c.vector;
        let q1 = match config.integrator {
            Integrator::Euler => q + rate(q, t, u)? * dt,
            Integrator::Rk4 => {
                let h = 0.5 * dt;
                let k1 = rate(q, t, u)?;
                let k2 = rate(q + k1 * h, t + h, u)?;
                let k3 = rate(q + k2 * h, t + h, u)?;
                let k4 = rate(q + k3 * dt, t + dt, u)?;
                q + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
            }
        };
        next.push(q1);
    }
    let sigma = update_sigma(
        &state.sigma,
        &distance_matrix(&next),
        config.r_com,
        config.epsilon,
    )?;
    Ok(SwarmState {
        time: t + dt,
        positions: next,
        sigma,
    })
}

/// `H = ½ Σ_i Σ_{j≠i} ψ(‖q_ij‖)`.
pub fn tension_energy(positions: &[Vec2], sigma: &SigmaMatrix, pot: &PotentialParams) -> Result<f64> {
    let mut h = 0.0;
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            h += psi(positions[i].distance(positions[j]), sigma.get(i, j), pot)?;
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub holds: bool,
    /// `LHS − RHS`, m/s.
    pub residual: f64,
}

/// Sufficient condition for agent `i` not to increase the tension energy:
/// `‖c2_i·u_perf_i + v(q_i) − ave(v_N) − ave(u_N)‖ ≤ c1_i·u_max` with
/// `N = V ∖ {i}`.
pub fn energy_condition(
    state: &SwarmState,
    controls: &[ControlInput],
    weights: &[BlendWeights],
    u_perf: &[ControlInput],
    field: &dyn FlowField,
    u_max: f64,
    i: usize,
) -> Result<ConditionCheck> {
    let n = state.len();
    if controls.len() != n || weights.len() != n || u_perf.len() != n {
        return Err(Error::InvalidArgument("monitor inputs must be sized N".into()));
    }
    let t = state.time;
    let vi = field.sample(state.positions[i], t)?;
    // ave over j of (v_i − v_j) so identical flows cancel exactly
    let mut dv = Vec2::ZERO;
    let mut u_sum = Vec2::ZERO;
    for j in (0..n).filter(|&j| j != i) {
        dv += vi - field.sample(state.positions[j], t)?;
        u_sum += controls[j].vector;
    }
    let m = (n - 1) as f64;
    let lhs = (u_perf[i].vector * weights[i].c2 + dv / m - u_sum / m).norm();
    let residual = lhs - weights[i].c1 * u_max;
    Ok(ConditionCheck {
        holds: residual <= 0.0,
        residual,
    })
}

/// Controls for one step together with the blend weights the energy monitor
/// should attribute to each agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Composed {
    pub controls: Vec<ControlInput>,
    pub weights: Vec<BlendWeights>,
}

/// Safe-interaction layer: turns performance controls into applied controls.
pub trait SwarmController: Send + Sync {
    fn name(&self) -> String;
    fn compose(&self, swarm: &SwarmState, u_perf: &[ControlInput]) -> Result<Composed>;
}

/// The three comparison policies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyController {
    pub kind: PolicyKind,
    pub pot: PotentialParams,
    pub lisic: LisicParams,
    pub u_max: f64,
}

impl PolicyController {
    pub fn new(kind: PolicyKind, config: &SimConfig) -> Self {
        PolicyController {
            kind,
            pot: PotentialParams::from_config(config),
            lisic: LisicParams { rho: config.rho },
            u_max: config.u_max,
        }
    }
}

impl SwarmController for PolicyController {
    fn name(&self) -> String {
        self.kind.to_string()
    }

    fn compose(&self, swarm: &SwarmState, u_perf: &[ControlInput]) -> Result<Composed> {
        let n = swarm.len();
        Ok(match self.kind {
            PolicyKind::Baseline => Composed {
                controls: baseline_policy(swarm, u_perf),
                weights: vec![BlendWeights::PERFORMANCE; n],
            },
            PolicyKind::Reactive => {
                let (controls, weights) = (0..n)
                    .map(|i| {
                        let (mode, u) = reactive_step(swarm, i, &self.pot, self.u_max, u_perf[i]);
                        let w = match mode {
                            ReactiveMode::GoToGoal => BlendWeights::PERFORMANCE,
                            _ => BlendWeights::SAFETY,
                        };
                        (u, w)
                    })
                    .unzip();
                Composed { controls, weights }
            }
            PolicyKind::Flocking => {
                let steps = lisic_policy_detailed(swarm, u_perf, &self.pot, &self.lisic, self.u_max)?;
                Composed {
                    controls: steps.iter().map(|s| s.control).collect(),
                    weights: steps.iter().map(|s| s.weights).collect(),
                }
            }
        })
    }
}

/// Why a mission loop stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "reason", content = "detail")]
pub enum Termination {
    Timeout,
    AllInTarget,
    Aborted(String),
}

/// Post-step snapshot. Controls are those applied during the step that ended
/// at `time`; the condition residuals are evaluated at the state the
/// controls were computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub time: f64,
    pub positions: Vec<Vec2>,
    pub controls: Vec<ControlInput>,
    pub sigma: SigmaMatrix,
    pub adjacency: Adjacency,
    pub collision: bool,
    pub disconnected: bool,
    pub lambda2: f64,
    pub tension: f64,
    pub residuals: Vec<f64>,
    /// Pairs whose edge state switched on / off during the step.
    pub edges_added: Vec<(usize, usize)>,
    pub edges_removed: Vec<(usize, usize)>,
}

impl StepRecord {
    pub fn isolated_count(&self) -> usize {
        (0..self.positions.len())
            .filter(|&i| self.adjacency.degree(i) == 0)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionLog {
    pub mission_id: String,
    pub policy: String,
    pub perf: PerfKind,
    pub config: SimConfig,
    pub start_time: f64,
    pub records: Vec<StepRecord>,
    pub termination: Termination,
    /// Agent-steps that fell back from the value grid to the naive controller.
    pub fallbacks: usize,
}

impl MissionLog {
    pub fn duration(&self) -> f64 {
        self.records.len() as f64 * self.config.dt
    }
}

/// Everything the mission loop needs besides the mission itself.
#[derive(Clone)]
pub struct RunSetup {
    pub config: SimConfig,
    pub perf: PerfKind,
    pub sim_field: Arc<dyn FlowField>,
    pub plan_field: Arc<dyn FlowField>,
    /// s
    pub replan_interval: f64,
}

pub const DEFAULT_REPLAN_INTERVAL: f64 = 24.0 * 3600.0;

fn edge_changes(prev: &SigmaMatrix, next: &SigmaMatrix) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
    let mut added = Vec::new();
    let mut removed = Vec::new();
    for i in 0..prev.dim() {
        for j in (i + 1)..prev.dim() {
            match (prev.get(i, j), next.get(i, j)) {
                (false, true) => added.push((i, j)),
                (true, false) => removed.push((i, j)),
                _ => {}
            }
        }
    }
    (added, removed)
}

/// Runs one mission to timeout or arrival. Failures inside the loop end the
/// mission with [`Termination::Aborted`]; only invalid inputs are errors.
pub fn run_mission(
    mission: &MissionSpec,
    controller: &dyn SwarmController,
    setup: &RunSetup,
) -> Result<MissionLog> {
    let config = crate::types::validate_config(setup.config)?;
    let pot = PotentialParams::from_config(&config);
    let state = SwarmState::new(mission.start_time, mission.start_positions.clone(), config.r_com)?;
    if !is_connected(&adjacency_from_positions(&state.positions, config.r_com)) {
        return Err(Error::InitiallyDisconnected);
    }
    let mut planner = PerfPlanner::new(
        setup.perf,
        setup.plan_field.clone(),
        mission.target,
        config.u_max,
        setup.replan_interval,
    )?;
    let max_steps = ((mission.timeout / config.dt) - 1e-9).ceil().max(1.0) as usize;
    let mut log = MissionLog {
        mission_id: mission.id.clone(),
        policy: controller.name(),
        perf: setup.perf,
        config,
        start_time: mission.start_time,
        records: Vec::with_capacity(max_steps),
        termination: Termination::Timeout,
        fallbacks: 0,
    };

    let mut state = state;
    for k in 0..max_steps {
        match advance(&state, controller, &mut planner, setup, &config, &pot) {
            Ok((mut next, record)) => {
                // pin the clock to the nominal grid
                next.time = mission.start_time + (k + 1) as f64 * config.dt;
                let mut record = record;
                record.time = next.time;
                log.records.push(record);
                state = next;
            }
            Err(e) => {
                log::warn!("mission {} ({}) aborted: {e}", mission.id, log.policy);
                log.termination = Termination::Aborted(e.to_string());
                break;
            }
        }
        if state.positions.iter().all(|&p| mission.target.contains(p)) {
            log.termination = Termination::AllInTarget;
            break;
        }
    }
    log.fallbacks = planner.fallbacks;
    Ok(log)
}

fn advance(
    state: &SwarmState,
    controller: &dyn SwarmController,
    planner: &mut PerfPlanner,
    setup: &RunSetup,
    config: &SimConfig,
    pot: &PotentialParams,
) -> Result<(SwarmState, StepRecord)> {
    planner.replan_if_due(&state.positions, state.time)?;
    let u_perf = planner.controls(&state.positions)?;
    let composed = controller.compose(state, &u_perf)?;
    if let Some(bad) = composed.controls.iter().find(|u| !u.within(config.u_max)) {
        return Err(Error::InvalidArgument(format!(
            "controller `{}` exceeded u_max: {}",
            controller.name(),
            bad.norm()
        )));
    }
    let residuals = (0..state.len())
        .map(|i| {
            energy_condition(
                state,
                &composed.controls,
                &composed.weights,
                &u_perf,
                setup.sim_field.as_ref(),
                config.u_max,
                i,
            )
            .map(|c| c.residual)
        })
        .collect::<Result<Vec<_>>>()?;

    let next = step(state, &composed.controls, setup.sim_field.as_ref(), config)?;
    let adjacency = adjacency_from_positions(&next.positions, config.r_com);
    let lambda2 = fiedler_value(&laplacian(&adjacency))?;
    let collision = next.positions.iter().enumerate().any(|(i, p)| {
        next.positions[i + 1..]
            .iter()
            .any(|q| p.distance(*q) < config.r_coll)
    });
    let tension = tension_energy(&next.positions, &next.sigma, pot)?;
    let (edges_added, edges_removed) = edge_changes(&state.sigma, &next.sigma);
    let record = StepRecord {
        time: next.time,
        positions: next.positions.clone(),
        controls: composed.controls,
        sigma: next.sigma.clone(),
        adjacency,
        collision,
        disconnected: lambda2 <= CONNECTIVITY_EPS,
        lambda2,
        tension,
        residuals,
        edges_added,
        edges_removed,
    };
    Ok((next, record))
}

/// Per-step flag bits in the CSV log.
pub const FLAG_COLLISION: u8 = 1;
pub const FLAG_DISCONNECTED: u8 = 2;

pub const LOG_CSV_HEADER: &str = "step,time,agent,x,y,ux,uy,deg,flags";

/// One row per step and agent.
pub fn log_to_csv(log: &MissionLog) -> String {
    let mut out = String::from(LOG_CSV_HEADER);
    out.push('\n');
    for (k, r) in log.records.iter().enumerate() {
        let flags = u8::from(r.collision) * FLAG_COLLISION + u8::from(r.disconnected) * FLAG_DISCONNECTED;
        for (i, (p, u)) in r.positions.iter().zip(&r.controls).enumerate() {
            let _ = writeln!(
                out,
                "{k},{},{i},{},{},{},{},{},{flags}",
                fmt_sig9(r.time),
                fmt_sig9(p.x),
                fmt_sig9(p.y),
                fmt_sig9(u.vector.x),
                fmt_sig9(u.vector.y),
                r.adjacency.degree(i),
            );
        }
    }
    out
}

/// JSON sidecar written next to each CSV log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogSidecar {
    pub mission_id: String,
    pub policy: String,
    pub perf: PerfKind,
    pub config: SimConfig,
    pub start_time: f64,
    pub termination: Termination,
    pub steps: usize,
    pub fallbacks: usize,
    pub time: Vec<f64>,
    pub tension: Vec<f64>,
    pub lambda2: Vec<f64>,
    /// Largest condition residual over agents at each step.
    pub max_residual: Vec<f64>,
    /// σ=1 pairs before the first step; later frames follow from the
    /// per-step additions and removals.
    pub initial_sigma: Vec<[usize; 2]>,
    pub edges_added: Vec<Vec<[usize; 2]>>,
    pub edges_removed: Vec<Vec<[usize; 2]>>,
}

impl LogSidecar {
    pub fn from_log(log: &MissionLog) -> Self {
        let r9 = |it: &mut dyn Iterator<Item = f64>| it.map(round_sig9).collect::<Vec<_>>();
        LogSidecar {
            mission_id: log.mission_id.clone(),
            policy: log.policy.clone(),
            perf: log.perf,
            config: log.config,
            start_time: log.start_time,
            termination: log.termination.clone(),
            steps: log.records.len(),
            fallbacks: log.fallbacks,
            time: r9(&mut log.records.iter().map(|r| r.time)),
            tension: r9(&mut log.records.iter().map(|r| r.tension)),
            lambda2: r9(&mut log.records.iter().map(|r| r.lambda2)),
            max_residual: r9(&mut log
                .records
                .iter()
                .map(|r| r.residuals.iter().copied().fold(f64::NEG_INFINITY, f64::max))),
            initial_sigma: initial_sigma(log),
            edges_added: log.records.iter().map(|r| pairs(&r.edges_added)).collect(),
            edges_removed: log.records.iter().map(|r| pairs(&r.edges_removed)).collect(),
        }
    }
}

fn pairs(edges: &[(usize, usize)]) -> Vec<[usize; 2]> {
    edges.iter().map(|&(i, j)| [i, j]).collect()
}

fn initial_sigma(log: &MissionLog) -> Vec<[usize; 2]> {
    let Some(first) = log.records.first() else {
        return Vec::new();
    };
    let mut sigma = first.sigma.clone();
    for &(i, j) in &first.edges_added {
        sigma.set(i, j, false);
    }
    for &(i, j) in &first.edges_removed {
        sigma.set(i, j, true);
    }
    let n = sigma.dim();
    (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .filter(|&(i, j)| sigma.get(i, j))
        .map(|(i, j)| [i, j])
        .collect()
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn write_log(log: &MissionLog, dir: &Path, stem: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv = dir.join(format!("{stem}.csv"));
    fs::write(&csv, log_to_csv(log)).map_err(|e| Error::io(&csv, e))?;
    let json = dir.join(format!("{stem}.json"));
    let text = serde_json::to_string_pretty(&LogSidecar::from_log(log)).map_err(|e| Error::json(&json, e))?;
    fs::write(&json, text + "\n").map_err(|e| Error::io(&json, e))?;
    Ok(())
}
