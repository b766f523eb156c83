//! Mission generation and the paired batch runner.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{AnalyticField, FlowField, FlowSpec, Rect, DEFAULT_GYRE_DOMAIN};
use crate::graph::{adjacency_from_positions, is_connected};
use crate::metrics::{aggregate_batch, batch_report_csv, compute_metrics, rounded, BatchReport, MetricsReport};
use crate::policies::{compute_value_grid, GridSpec, PerfKind, PolicyKind, TargetDisc};
use crate::sim::{fmt_sig9, run_mission, write_log, PolicyController, RunSetup, Termination};
use crate::types::{validate_config, SimConfig, Vec2};

/// Maximum number of rejected candidates per mission.
pub const SAMPLING_BUDGET: usize = 10_000;
/// Centroid draws per sampled target before the target is redrawn.
const CENTROID_TRIES: usize = 100;
/// Nodes per side of the domain-wide feasibility grid.
const FEASIBILITY_NODES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionSpec {
    pub id: String,
    pub seed: u64,
    /// s
    pub start_time: f64,
    pub start_positions: Vec<Vec2>,
    pub target: TargetDisc,
    /// s
    pub timeout: f64,
}

impl MissionSpec {
    /// Checks the start-configuration invariants: connected, collision-free
    /// and inside `region`.
    pub fn validate(&self, config: &SimConfig, region: &Rect) -> Result<()> {
        let q = &self.start_positions;
        if !is_connected(&adjacency_from_positions(q, config.r_com)) {
            return Err(Error::InitiallyDisconnected);
        }
        for (i, p) in q.iter().enumerate() {
            if !inside(region, *p) {
                return Err(Error::InvalidArgument(format!(
                    "mission {}: agent {i} starts outside the domain",
                    self.id
                )));
            }
            if let Some(j) = q[i + 1..].iter().position(|r| p.distance(*r) <= config.r_coll) {
                return Err(Error::InvalidArgument(format!(
                    "mission {}: agents {i} and {} start in collision",
                    self.id,
                    i + 1 + j
                )));
            }
        }
        Ok(())
    }
}

fn inside(r: &Rect, p: Vec2) -> bool {
    p.x >= r.x_min && p.x <= r.x_max() && p.y >= r.y_min && p.y <= r.y_max()
}

fn default_batch_id() -> String {
    "batch".into()
}

fn default_replan_hours() -> f64 {
    24.0
}

/// Batch description, read from JSON. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSpec {
    #[serde(default = "default_batch_id")]
    pub batch_id: String,
    pub missions: usize,
    #[serde(default)]
    pub seed: u64,
    /// Field the swarm is simulated in.
    pub flow: FlowSpec,
    /// Field the value-grid planner sees; defaults to `flow`.
    #[serde(default)]
    pub plan_flow: Option<FlowSpec>,
    pub policies: Vec<PolicyKind>,
    #[serde(default)]
    pub perf: PerfKind,
    #[serde(default = "default_replan_hours")]
    pub replan_hours: f64,
    pub config: SimConfig,
    /// Sampling region; defaults to the flow bounds, or a square scaled to
    /// the reachable distance for unbounded fields.
    #[serde(default)]
    pub region: Option<Rect>,
    /// Feasibility window on the centroid time-to-reach, hours. Defaults to
    /// `[0.5, 1.0] × timeout`.
    #[serde(default)]
    pub feasibility_hours: Option<[f64; 2]>,
}

impl Default for BatchSpec {
    fn default() -> Self {
        BatchSpec {
            batch_id: default_batch_id(),
            missions: 50,
            seed: 0,
            flow: FlowSpec::Analytic(AnalyticField::DoubleGyre {
                amplitude: 0.5,
                perturbation: 0.25,
                omega: 2.0 * PI / (10.0 * 86_400.0),
                domain: DEFAULT_GYRE_DOMAIN,
            }),
            plan_flow: None,
            policies: PolicyKind::ALL.to_vec(),
            perf: PerfKind::ValueGrid,
            replan_hours: default_replan_hours(),
            config: SimConfig::desk(),
            region: None,
            feasibility_hours: None,
        }
    }
}

impl BatchSpec {
    pub fn validate(&self) -> Result<()> {
        validate_config(self.config)?;
        if self.missions == 0 {
            return Err(Error::Config("missions must be at least 1".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::Config("policies must not be empty".into()));
        }
        if !(self.replan_hours > 0.0) {
            return Err(Error::Config("replan_hours must be positive".into()));
        }
        if let Some([lo, hi]) = self.feasibility_hours {
            if !(lo >= 0.0 && hi > lo) {
                return Err(Error::Config("feasibility_hours must satisfy 0 <= lo < hi".into()));
            }
        }
        Ok(())
    }

    pub fn plan_flow(&self) -> &FlowSpec {
        self.plan_flow.as_ref().unwrap_or(&self.flow)
    }

    /// Feasibility window in seconds.
    pub fn feasibility_window(&self) -> (f64, f64) {
        match self.feasibility_hours {
            Some([lo, hi]) => (lo * 3600.0, hi * 3600.0),
            None => (0.5 * self.config.timeout, self.config.timeout),
        }
    }

    pub fn sampling_region(&self, field: &dyn FlowField) -> Rect {
        if let Some(r) = self.region {
            return r;
        }
        let b = field.bounds();
        if b.is_finite() {
            return Rect::new(b.x_min, b.y_min, b.x_max - b.x_min, b.y_max - b.y_min);
        }
        let half = 1.5 * (self.config.u_max * self.config.timeout).max(self.config.r_com);
        Rect::new(-half, -half, 2.0 * half, 2.0 * half)
    }
}

/// Jittered sunflower disc: `n` points within `radius` of `centroid`,
/// each perturbed by up to `jitter` per axis.
fn jittered_disc(rng: &mut impl Rng, centroid: Vec2, n: usize, radius: f64, jitter: f64) -> Vec<Vec2> {
    let golden = PI * (3.0 - 5f64.sqrt());
    let turn = rng.gen_range(0.0..2.0 * PI);
    (0..n)
        .map(|k| {
            let r = radius * ((k as f64 + 0.5) / n as f64).sqrt();
            let a = turn + golden * k as f64;
            let j = Vec2::new(rng.gen_range(-jitter..=jitter), rng.gen_range(-jitter..=jitter));
            centroid + Vec2::new(r * a.cos(), r * a.sin()) + j
        })
        .collect()
}

#[derive(Default)]
struct Rejections(BTreeMap<&'static str, usize>);

impl Rejections {
    fn add(&mut self, why: &'static str) {
        *self.0.entry(why).or_default() += 1;
    }

    fn total(&self) -> usize {
        self.0.values().sum()
    }

    fn histogram(&self) -> String {
        self.0
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

fn sample_mission(
    batch: &BatchSpec,
    field: &dyn FlowField,
    region: &Rect,
    id: String,
    seed: u64,
) -> Result<MissionSpec> {
    let c = &batch.config;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (t_lo, t_hi) = batch.feasibility_window();
    let footprint = 0.3 * c.r_com;
    let jitter = 0.05 * c.r_com;
    let margin = footprint + 2.0 * jitter;
    let mut rejected = Rejections::default();
    let uniform_in = |rng: &mut ChaCha8Rng, pad: f64| -> Option<Vec2> {
        let (w, h) = (region.width - 2.0 * pad, region.height - 2.0 * pad);
        (w > 0.0 && h > 0.0).then(|| {
            Vec2::new(
                region.x_min + pad + rng.gen::<f64>() * w,
                region.y_min + pad + rng.gen::<f64>() * h,
            )
        })
    };

    while rejected.total() < SAMPLING_BUDGET {
        let start_time = field.period().map_or(0.0, |p| rng.gen::<f64>() * p);
        let center = uniform_in(&mut rng, c.target_radius).ok_or_else(|| {
            Error::Config("sampling region is smaller than the target disc".into())
        })?;
        let target = TargetDisc::new(center, c.target_radius)?;
        let spec = GridSpec {
            nx: FEASIBILITY_NODES,
            ny: FEASIBILITY_NODES,
            x_min: region.x_min,
            x_max: region.x_max(),
            y_min: region.y_min,
            y_max: region.y_max(),
        };
        let grid = match compute_value_grid(field, start_time, &target, &spec, c.u_max) {
            Ok(g) => g,
            Err(Error::EmptyTarget) => {
                rejected.add("empty_target");
                continue;
            }
            Err(e) => return Err(e),
        };
        for _ in 0..CENTROID_TRIES {
            if rejected.total() >= SAMPLING_BUDGET {
                break;
            }
            let centroid = uniform_in(&mut rng, margin).ok_or_else(|| {
                Error::Config("sampling region is smaller than the swarm footprint".into())
            })?;
            match grid.interpolate(centroid) {
                Some(t) if t.is_finite() => {
                    if t < t_lo {
                        rejected.add("too_close");
                        continue;
                    }
                    if t > t_hi {
                        rejected.add("too_far");
                        continue;
                    }
                }
                _ => {
                    rejected.add("unreachable");
                    continue;
                }
            }
            let q = jittered_disc(&mut rng, centroid, c.n_agents, footprint, jitter);
            let mut spacing_ok = true;
            for (i, p) in q.iter().enumerate() {
                for r in &q[i + 1..] {
                    let d = p.distance(*r);
                    spacing_ok &= d > 2.0 * c.r_coll && d < 0.8 * c.r_com;
                }
            }
            if !spacing_ok {
                rejected.add("spacing");
                continue;
            }
            let m = MissionSpec {
                id: id.clone(),
                seed,
                start_time,
                start_positions: q,
                target,
                timeout: c.timeout,
            };
            match m.validate(c, region) {
                Ok(()) => return Ok(m),
                Err(Error::InitiallyDisconnected) => rejected.add("disconnected"),
                Err(_) => rejected.add("collision_or_bounds"),
            }
        }
    }
    Err(Error::SamplingExhausted {
        attempts: rejected.total(),
        histogram: rejected.histogram(),
    })
}

/// Draws `batch.missions` missions; mission `k` uses its own seed derived
/// from `rng_seed`, so the list is reproducible.
pub fn generate_missions(batch: &BatchSpec, rng_seed: u64) -> Result<Vec<MissionSpec>> {
    batch.validate()?;
    let field = batch.flow.build()?;
    let region = batch.sampling_region(field.as_ref());
    let mut master = ChaCha8Rng::seed_from_u64(rng_seed);
    let seeds: Vec<u64> = (0..batch.missions).map(|_| master.gen()).collect();
    seeds
        .into_par_iter()
        .enumerate()
        .map(|(k, seed)| sample_mission(batch, field.as_ref(), &region, format!("m{k:04}"), seed))
        .collect()
}

pub fn write_missions(missions: &[MissionSpec], path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(missions).map_err(|e| Error::json(path, e))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_missions(path: &Path) -> Result<Vec<MissionSpec>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

/// Metrics of one (mission, policy) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub mission: String,
    pub policy: PolicyKind,
    pub metrics: MetricsReport,
    pub termination: Termination,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub mission: String,
    pub policy: PolicyKind,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct BatchOutcome {
    pub missions: Vec<MissionSpec>,
    pub rows: Vec<MetricsRow>,
    pub failures: Vec<RunFailure>,
    pub report: BatchReport,
    /// Directory holding the artifacts, when written.
    pub dir: Option<PathBuf>,
}

pub const METRICS_CSV_HEADER: &str =
    "mission,policy,collision,disconnection,lambda2_min,ipm,d_min,arrival_time,termination,steps";

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let m = &r.metrics;
        let term = match &r.termination {
            Termination::Timeout => "timeout",
            Termination::AllInTarget => "all_in_target",
            Termination::Aborted(_) => "aborted",
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{term},{}",
            r.mission,
            r.policy,
            u8::from(m.collision),
            u8::from(m.disconnection),
            fmt_sig9(m.lambda2_min),
            fmt_sig9(m.ipm),
            fmt_sig9(m.d_min_target),
            m.arrival_time.map(fmt_sig9).unwrap_or_default(),
            r.steps,
        );
    }
    out
}

/// Runs every (mission, policy) pair on `missions` with up to `workers`
/// threads. When `out_dir` is given, artifacts go to `out_dir/<batch_id>/`.
pub fn run_missions(
    batch: &BatchSpec,
    missions: Vec<MissionSpec>,
    workers: usize,
    out_dir: Option<&Path>,
) -> Result<BatchOutcome> {
    batch.validate()?;
    let sim_field: Arc<dyn FlowField> = batch.flow.build()?;
    let plan_field: Arc<dyn FlowField> = if batch.plan_flow.is_some() {
        batch.plan_flow().build()?
    } else {
        sim_field.clone()
    };
    let setup = RunSetup {
        config: batch.config,
        perf: batch.perf,
        sim_field,
        plan_field,
        replan_interval: batch.replan_hours * 3600.0,
    };
    let dir = out_dir.map(|d| d.join(&batch.batch_id));
    if let Some(d) = &dir {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        write_missions(&missions, &d.join("missions.json"))?;
    }

    let jobs: Vec<(usize, PolicyKind)> = (0..missions.len())
        .flat_map(|m| batch.policies.iter().map(move |&p| (m, p)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let results: Vec<std::result::Result<MetricsRow, RunFailure>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(m, policy)| {
                let mission = &missions[m];
                let fail = |e: Error| RunFailure {
                    mission: mission.id.clone(),
                    policy,
                    error: e.to_string(),
                };
                let controller = PolicyController::new(policy, &batch.config);
                let log = run_mission(mission, &controller, &setup).map_err(fail)?;
                if let Some(d) = &dir {
                    write_log(&log, &d.join(&mission.id), policy.name()).map_err(fail)?;
                }
                let metrics = compute_metrics(&log, batch.config.r_coll, batch.config.r_com, &mission.target)
                    .map_err(fail)?;
                Ok(MetricsRow {
                    mission: mission.id.clone(),
                    policy,
                    metrics,
                    termination: log.termination.clone(),
                    steps: log.records.len(),
                })
            })
            .collect()
    });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(f) => {
                log::warn!("{} / {}: {}", f.mission, f.policy, f.error);
                failures.push(f);
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::BatchFailed(missions.len()));
    }
    let report = aggregate_batch(&rows.iter().map(|r| (r.policy, r.metrics)).collect::<Vec<_>>())?;

    if let Some(d) = &dir {
        write_text(&d.join("metrics.csv"), &metrics_csv(&rows))?;
        write_report(&report, d)?;
        if !failures.is_empty() {
            let p = d.join("failures.json");
            let text = serde_json::to_string_pretty(&failures).map_err(|e| Error::json(&p, e))?;
            write_text(&p, &(text + "\n"))?;
        }
    }
    Ok(BatchOutcome {
        missions,
        rows,
        failures,
        report,
        dir,
    })
}

/// Generates missions from `batch.seed` and runs them.
pub fn run_batch(batch: &BatchSpec, workers: usize, out_dir: Option<&Path>) -> Result<BatchOutcome> {
    let missions = generate_missions(batch, batch.seed)?;
    run_missions(batch, missions, workers, out_dir)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `batch_report.csv` and `batch_report.json` into `dir`.
pub fn write_report(report: &BatchReport, dir: &Path) -> Result<()> {
    write_text(&dir.join("batch_report.csv"), &batch_report_csv(report))?;
    let p = dir.join("batch_report.json");
    let text = serde_json::to_string_pretty(&rounded(report)).map_err(|e| Error::json(&p, e))?;
    write_text(&p, &(text + "\n"))
}

/// Re-aggregates a `metrics.csv` written by a previous batch.
pub fn read_metrics_csv(path: &Path) -> Result<Vec<(PolicyKind, MetricsReport)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(METRICS_CSV_HEADER) {
        return Err(Error::InvalidArgument(format!(
            "{}: expected header `{METRICS_CSV_HEADER}`",
            path.display()
        )));
    }
    let bad = |n: usize, what: &str| {
        Error::InvalidArgument(format!("{}:{}: bad {what}", path.display(), n + 2))
    };
    lines
        .enumerate()
        .map(|(n, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 10 {
                return Err(bad(n, "column count"));
            }
            let num = |s: &str, what| s.parse::<f64>().map_err(|_| bad(n, what));
            Ok((
                f[1].parse::<PolicyKind>().map_err(|_| bad(n, "policy"))?,
                MetricsReport {
                    collision: f[2] == "1",
                    disconnection: f[3] == "1",
                    lambda2_min: num(f[4], "lambda2_min")?,
                    ipm: num(f[5], "ipm")?,
                    d_min_target: num(f[6], "d_min")?,
                    arrival_time: if f[7].is_empty() { None } else { Some(num(f[7], "arrival_time")?) },
                },
            ))
        })
        .collect()
}
