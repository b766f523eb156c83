use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;

use swarm_lisic::error::{Error, Result};
use swarm_lisic::flow::{FlowField, FlowSpec};
use swarm_lisic::metrics::aggregate_batch;
use swarm_lisic::missions::{
    generate_missions, read_metrics_csv, run_missions, write_missions, write_report, BatchSpec,
    MissionSpec,
};
use swarm_lisic::policies::{PerfKind, PolicyKind};
use swarm_lisic::sim::{run_mission, write_log, PolicyController, RunSetup, Termination};
use swarm_lisic::types::{validate_config, Integrator, SimConfig};

#[derive(Parser)]
#[command(name = "swarm-lisic", version, about = "Safe-interaction swarm control in flow fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one mission under one policy
    Run(RunArgs),
    /// Generate missions and compare policies on all of them
    Batch(BatchArgs),
    /// Generate missions only and write them as JSON
    GenMissions(GenArgs),
    /// Re-aggregate a metrics.csv into batch_report.{csv,json}
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Baseline,
    Reactive,
    Flocking,
}

impl From<PolicyArg> for PolicyKind {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Baseline => PolicyKind::Baseline,
            PolicyArg::Reactive => PolicyKind::Reactive,
            PolicyArg::Flocking => PolicyKind::Flocking,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PerfArg {
    Naive,
    Valuegrid,
}

impl From<PerfArg> for PerfKind {
    fn from(p: PerfArg) -> Self {
        match p {
            PerfArg::Naive => PerfKind::Naive,
            PerfArg::Valuegrid => PerfKind::ValueGrid,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum IntegratorArg {
    Euler,
    Rk4,
}

/// Scalar overrides applied on top of the configuration file.
#[derive(Args, Default)]
struct ConfigOverrides {
    /// Number of agents
    #[arg(long)]
    n_agents: Option<usize>,
    /// Maximum thrust speed, m/s
    #[arg(long)]
    u_max: Option<f64>,
    /// Communication range, m
    #[arg(long)]
    r_com: Option<f64>,
    /// Collision radius, m
    #[arg(long)]
    r_coll: Option<f64>,
    /// Hysteresis band, m
    #[arg(long)]
    epsilon: Option<f64>,
    /// Potential gain
    #[arg(long)]
    kappa: Option<f64>,
    /// Activation offset of the safety weight
    #[arg(long)]
    rho: Option<f64>,
    /// Time step, s
    #[arg(long)]
    dt: Option<f64>,
    /// Mission timeout, hours
    #[arg(long)]
    timeout_hours: Option<f64>,
    /// Target radius, m
    #[arg(long)]
    target_radius: Option<f64>,
    /// Integration scheme
    #[arg(long, value_enum)]
    integrator: Option<IntegratorArg>,
}

impl ConfigOverrides {
    fn apply(&self, mut c: SimConfig) -> SimConfig {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        set!(n_agents, u_max, r_com, r_coll, epsilon, kappa, rho, dt, target_radius);
        if let Some(h) = self.timeout_hours {
            c.timeout = h * 3600.0;
        }
        if let Some(i) = self.integrator {
            c.integrator = match i {
                IntegratorArg::Euler => Integrator::Euler,
                IntegratorArg::Rk4 => Integrator::Rk4,
            };
        }
        c
    }
}

#[derive(Args)]
struct RunArgs {
    /// Simulation config (JSON); defaults to the desk-scale config
    #[arg(long)]
    config: Option<PathBuf>,
    /// Mission file: one mission object or a list as written by gen-missions
    #[arg(long)]
    mission: Option<PathBuf>,
    /// Index into a mission list
    #[arg(long, default_value_t = 0)]
    mission_index: usize,
    /// Simulated flow, e.g. `double-gyre:0.5,0.25,7.27e-6` or `grid:flow.json`
    #[arg(long, default_value = "uniform:0,0")]
    flow: FlowSpec,
    /// Flow seen by the planner; defaults to --flow
    #[arg(long)]
    plan_flow: Option<FlowSpec>,
    #[arg(long, value_enum, default_value = "flocking")]
    policy: PolicyArg,
    #[arg(long, value_enum, default_value = "valuegrid")]
    perf: PerfArg,
    /// Value-grid replanning interval, hours
    #[arg(long, default_value_t = 24.0)]
    replan_hours: f64,
    /// Seed used to generate a mission when --mission is absent
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output root
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Subdirectory of the output root
    #[arg(long, default_value = "run")]
    run_id: String,
    #[command(flatten)]
    overrides: ConfigOverrides,
}

#[derive(Args)]
struct BatchSource {
    /// Batch spec (JSON); defaults to the desk-scale double-gyre batch
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Number of missions
    #[arg(long)]
    missions: Option<usize>,
    /// Mission-generation seed
    #[arg(long)]
    seed: Option<u64>,
    /// Simulated flow
    #[arg(long)]
    flow: Option<FlowSpec>,
    /// Flow seen by the planner
    #[arg(long)]
    plan_flow: Option<FlowSpec>,
    /// Feasibility window on the time-to-reach, hours: LO,HI
    #[arg(long, value_name = "LO,HI", value_delimiter = ',')]
    feasibility_hours: Option<Vec<f64>>,
    #[command(flatten)]
    overrides: ConfigOverrides,
}

impl BatchSource {
    fn load(&self) -> Result<BatchSpec> {
        let mut b: BatchSpec = match &self.spec {
            Some(p) => read_json(p)?,
            None => BatchSpec::default(),
        };
        if let Some(m) = self.missions {
            b.missions = m;
        }
        if let Some(s) = self.seed {
            b.seed = s;
        }
        if let Some(f) = &self.flow {
            b.flow = f.clone();
        }
        if let Some(f) = &self.plan_flow {
            b.plan_flow = Some(f.clone());
        }
        if let Some(w) = &self.feasibility_hours {
            let [lo, hi] = w[..] else {
                return Err(Error::Config(format!(
                    "--feasibility-hours takes LO,HI, got {} values",
                    w.len()
                )));
            };
            b.feasibility_hours = Some([lo, hi]);
        }
        b.config = self.overrides.apply(b.config);
        b.validate()?;
        Ok(b)
    }
}

#[derive(Args)]
struct BatchArgs {
    #[command(flatten)]
    source: BatchSource,
    /// Policies to compare
    #[arg(long, value_enum, value_delimiter = ',')]
    policies: Option<Vec<PolicyArg>>,
    #[arg(long, value_enum)]
    perf: Option<PerfArg>,
    /// Value-grid replanning interval, hours
    #[arg(long)]
    replan_hours: Option<f64>,
    /// Read missions from this file instead of generating them
    #[arg(long)]
    missions_file: Option<PathBuf>,
    /// Parallel mission workers; defaults to the available parallelism
    #[arg(long)]
    workers: Option<usize>,
    /// Output root
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Subdirectory of the output root
    #[arg(long)]
    batch_id: Option<String>,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    source: BatchSource,
    /// Output file
    #[arg(long, default_value = "missions.json")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// metrics.csv written by a batch
    #[arg(long)]
    metrics: PathBuf,
    /// Directory for batch_report.{csv,json}; defaults to the metrics directory
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn load_mission(path: &Path, index: usize) -> Result<MissionSpec> {
    let value: serde_json::Value = read_json(path)?;
    let parsed = if value.is_array() {
        serde_json::from_value::<Vec<MissionSpec>>(value).map(|v| v.into_iter().nth(index))
    } else {
        serde_json::from_value::<MissionSpec>(value).map(Some)
    };
    parsed
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        .ok_or_else(|| Error::Config(format!("{}: no mission at index {index}", path.display())))
}

fn cmd_run(a: RunArgs) -> Result<ExitCode> {
    let base = match &a.config {
        Some(p) => read_json(p)?,
        None => SimConfig::desk(),
    };
    let config = validate_config(a.overrides.apply(base))?;
    let sim_field: Arc<dyn FlowField> = a.flow.build()?;
    let plan_field = match &a.plan_flow {
        Some(f) => f.build()?,
        None => sim_field.clone(),
    };
    let mission = match &a.mission {
        Some(p) => load_mission(p, a.mission_index)?,
        None => {
            let b = BatchSpec {
                missions: 1,
                flow: a.flow.clone(),
                config,
                ..BatchSpec::default()
            };
            generate_missions(&b, a.seed)?.remove(0)
        }
    };
    let setup = RunSetup {
        config,
        perf: a.perf.into(),
        sim_field,
        plan_field,
        replan_interval: a.replan_hours * 3600.0,
    };
    let policy: PolicyKind = a.policy.into();
    let log = run_mission(&mission, &PolicyController::new(policy, &config), &setup)?;
    let dir = a.out.join(&a.run_id).join(&mission.id);
    write_log(&log, &dir, policy.name())?;
    println!(
        "{} {}: {} records, termination {:?} -> {}",
        mission.id,
        policy,
        log.records.len(),
        log.termination,
        dir.display()
    );
    Ok(match log.termination {
        Termination::Aborted(_) => ExitCode::from(4),
        _ => ExitCode::SUCCESS,
    })
}

fn cmd_batch(a: BatchArgs) -> Result<ExitCode> {
    let mut b = a.source.load()?;
    if let Some(p) = &a.policies {
        b.policies = p.iter().map(|&p| p.into()).collect();
    }
    if let Some(p) = a.perf {
        b.perf = p.into();
    }
    if let Some(h) = a.replan_hours {
        b.replan_hours = h;
    }
    if let Some(id) = &a.batch_id {
        b.batch_id = id.clone();
    }
    b.validate()?;
    let workers = a
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let missions = match &a.missions_file {
        Some(p) => read_json(p)?,
        None => generate_missions(&b, b.seed)?,
    };
    let out = run_missions(&b, missions, workers, Some(&a.out))?;
    for s in &out.report.policies {
        println!(
            "{:<9} coll {:.3}  disconn {:.3}  ipm {:.4}  lambda2_min {:.4}  d_min {:.0} m",
            s.policy.name(),
            s.collision_rate,
            s.disconnection_rate,
            s.ipm.mean,
            s.lambda2_min.mean,
            s.d_min.mean
        );
    }
    if let Some(d) = &out.dir {
        println!("artifacts in {}", d.display());
    }
    Ok(if out.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("{} runs failed; see failures.json", out.failures.len());
        ExitCode::from(4)
    })
}

fn cmd_gen(a: GenArgs) -> Result<ExitCode> {
    let b = a.source.load()?;
    let missions = generate_missions(&b, b.seed)?;
    write_missions(&missions, &a.out)?;
    println!("{} missions -> {}", missions.len(), a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_report(a: ReportArgs) -> Result<ExitCode> {
    let rows = read_metrics_csv(&a.metrics)?;
    let report = aggregate_batch(&rows)?;
    let dir = match a.out {
        Some(d) => d,
        None => a
            .metrics
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    fs::create_dir_all(&dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    write_report(&report, &dir)?;
    println!("report -> {}", dir.display());
    Ok(ExitCode::SUCCESS)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 3,
        Error::BatchFailed(_) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Batch(a) => cmd_batch(a),
        Command::GenMissions(a) => cmd_gen(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
