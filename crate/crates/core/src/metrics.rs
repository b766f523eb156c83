//! Per-mission constraint-violation metrics and their batch aggregation.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{adjacency_from_positions, fiedler_value, laplacian, CONNECTIVITY_EPS};
use crate::policies::{PolicyKind, TargetDisc};
use crate::sim::{fmt_sig9, round_sig9, MissionLog};
use crate::stats::{mean, sample_variance, two_proportion_z_test, welch_t_test, WelchTest, ZTest};
use crate::types::{centroid, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub collision: bool,
    pub disconnection: bool,
    pub lambda2_min: f64,
    /// Time-averaged number of isolated agents.
    pub ipm: f64,
    /// Closest approach of the swarm centroid to the target disc, m.
    pub d_min_target: f64,
    /// Seconds from mission start until every agent was inside the target.
    pub arrival_time: Option<f64>,
}

/// `(Σ_k count_k · dt) / (K · dt)`: left-endpoint integral of the
/// isolated-agent count over the log duration.
pub fn ipm_from_counts(counts: &[usize], dt: f64) -> f64 {
    let horizon = counts.len() as f64 * dt;
    let integral: f64 = counts.iter().map(|&c| c as f64 * dt).sum();
    integral / horizon
}

fn any_pair_closer(positions: &[Vec2], r: f64) -> bool {
    positions
        .iter()
        .enumerate()
        .any(|(i, p)| positions[i + 1..].iter().any(|q| p.distance(*q) < r))
}

/// Recomputes every metric from logged positions on the raw disk graph.
pub fn compute_metrics(
    log: &MissionLog,
    r_coll: f64,
    r_com: f64,
    target: &TargetDisc,
) -> Result<MetricsReport> {
    if log.records.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "mission {} has an empty log",
            log.mission_id
        )));
    }
    let mut collision = false;
    let mut lambda2_min = f64::INFINITY;
    let mut d_min = f64::INFINITY;
    let mut arrival_time = None;
    let mut counts = Vec::with_capacity(log.records.len());
    for r in &log.records {
        let q = &r.positions;
        collision |= any_pair_closer(q, r_coll);
        let a = adjacency_from_positions(q, r_com);
        lambda2_min = lambda2_min.min(fiedler_value(&laplacian(&a))?);
        counts.push((0..q.len()).filter(|&i| a.degree(i) == 0).count());
        d_min = d_min.min(target.distance_to(centroid(q)));
        if arrival_time.is_none() && q.iter().all(|&p| target.contains(p)) {
            arrival_time = Some(r.time - log.start_time);
        }
    }
    Ok(MetricsReport {
        collision,
        disconnection: lambda2_min <= CONNECTIVITY_EPS,
        lambda2_min,
        ipm: ipm_from_counts(&counts, log.config.dt),
        d_min_target: d_min,
        arrival_time,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation (zero for a single value).
    pub std: f64,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Self {
        MeanStd {
            mean: mean(xs),
            std: sample_variance(xs).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: PolicyKind,
    pub missions: usize,
    pub collisions: usize,
    pub disconnections: usize,
    pub collision_rate: f64,
    pub disconnection_rate: f64,
    pub arrival_rate: f64,
    pub ipm: MeanStd,
    pub lambda2_min: MeanStd,
    pub d_min: MeanStd,
}

/// Tests of policy `a` against policy `b`. z-tests take `a` as group 1, so a
/// small p supports "a violates less often than b"; Welch tests report both
/// one-sided alternatives for `mean(a) − mean(b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: PolicyKind,
    pub b: PolicyKind,
    pub collision: ZTest,
    pub disconnection: ZTest,
    pub ipm: Option<WelchTest>,
    pub lambda2_min: Option<WelchTest>,
    pub d_min: Option<WelchTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub policies: Vec<PolicySummary>,
    pub comparisons: Vec<Comparison>,
}

impl BatchReport {
    pub fn summary(&self, policy: PolicyKind) -> Option<&PolicySummary> {
        self.policies.iter().find(|s| s.policy == policy)
    }
}

fn summarize(policy: PolicyKind, reports: &[MetricsReport]) -> PolicySummary {
    let n = reports.len();
    let collisions = reports.iter().filter(|r| r.collision).count();
    let disconnections = reports.iter().filter(|r| r.disconnection).count();
    let arrivals = reports.iter().filter(|r| r.arrival_time.is_some()).count();
    let col = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).collect::<Vec<_>>();
    PolicySummary {
        policy,
        missions: n,
        collisions,
        disconnections,
        collision_rate: collisions as f64 / n as f64,
        disconnection_rate: disconnections as f64 / n as f64,
        arrival_rate: arrivals as f64 / n as f64,
        ipm: MeanStd::of(&col(|r| r.ipm)),
        lambda2_min: MeanStd::of(&col(|r| r.lambda2_min)),
        d_min: MeanStd::of(&col(|r| r.d_min_target)),
    }
}

fn compare(
    a: PolicyKind,
    ra: &[MetricsReport],
    b: PolicyKind,
    rb: &[MetricsReport],
) -> Result<Comparison> {
    let count = |rs: &[MetricsReport], f: fn(&MetricsReport) -> bool| rs.iter().filter(|r| f(r)).count() as u64;
    let (na, nb) = (ra.len() as u64, rb.len() as u64);
    let col = |rs: &[MetricsReport], f: fn(&MetricsReport) -> f64| rs.iter().map(f).collect::<Vec<_>>();
    let welch = |f: fn(&MetricsReport) -> f64| welch_t_test(&col(ra, f), &col(rb, f)).ok();
    Ok(Comparison {
        a,
        b,
        collision: two_proportion_z_test(count(ra, |r| r.collision), na, count(rb, |r| r.collision), nb)?,
        disconnection: two_proportion_z_test(
            count(ra, |r| r.disconnection),
            na,
            count(rb, |r| r.disconnection),
            nb,
        )?,
        ipm: welch(|r| r.ipm),
        lambda2_min: welch(|r| r.lambda2_min),
        d_min: welch(|r| r.d_min_target),
    })
}

/// Per-policy rates and moments, plus flocking-versus-other tests whenever
/// flocking and at least one other policy are present.
pub fn aggregate_batch(reports: &[(PolicyKind, MetricsReport)]) -> Result<BatchReport> {
    let mut groups: Vec<(PolicyKind, Vec<MetricsReport>)> = Vec::new();
    for kind in PolicyKind::ALL {
        let rs: Vec<MetricsReport> = reports.iter().filter(|(p, _)| *p == kind).map(|(_, r)| *r).collect();
        if !rs.is_empty() {
            groups.push((kind, rs));
        }
    }
    if groups.is_empty() {
        return Err(Error::InvalidArgument("no metrics to aggregate".into()));
    }
    let policies = groups.iter().map(|(k, rs)| summarize(*k, rs)).collect();
    let mut comparisons = Vec::new();
    if let Some((_, flock)) = groups.iter().find(|(k, _)| *k == PolicyKind::Flocking) {
        // reactive first: it is the primary comparison
        for other in [PolicyKind::Reactive, PolicyKind::Baseline] {
            if let Some((_, rs)) = groups.iter().find(|(k, _)| *k == other) {
                comparisons.push(compare(PolicyKind::Flocking, flock, other, rs)?);
            }
        }
    }
    Ok(BatchReport {
        policies,
        comparisons,
    })
}

pub const BATCH_CSV_HEADER: &str = "policy,coll,disconn,mu_ipm,mu_lambda2_min,mu_d_min";

/// Table of per-policy rates and means (`d_min` in metres).
pub fn batch_report_csv(report: &BatchReport) -> String {
    let mut out = String::from(BATCH_CSV_HEADER);
    out.push('\n');
    for s in &report.policies {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            s.policy,
            fmt_sig9(s.collision_rate),
            fmt_sig9(s.disconnection_rate),
            fmt_sig9(s.ipm.mean),
            fmt_sig9(s.lambda2_min.mean),
            fmt_sig9(s.d_min.mean),
        );
    }
    out
}

/// Copy of `report` with every float rounded to 9 significant digits.
pub fn rounded(report: &BatchReport) -> BatchReport {
    let ms = |m: MeanStd| MeanStd {
        mean: round_sig9(m.mean),
        std: round_sig9(m.std),
    };
    let z = |t: ZTest| ZTest {
        z: round_sig9(t.z),
        p_one_sided: round_sig9(t.p_one_sided),
        log10_p_one_sided: round_sig9(t.log10_p_one_sided),
    };
    let w = |t: Option<WelchTest>| {
        t.map(|t| WelchTest {
            t: round_sig9(t.t),
            df: round_sig9(t.df),
            p_less: round_sig9(t.p_less),
            p_greater: round_sig9(t.p_greater),
        })
    };
    BatchReport {
        policies: report
            .policies
            .iter()
            .map(|s| PolicySummary {
                collision_rate: round_sig9(s.collision_rate),
                disconnection_rate: round_sig9(s.disconnection_rate),
                arrival_rate: round_sig9(s.arrival_rate),
                ipm: ms(s.ipm),
                lambda2_min: ms(s.lambda2_min),
                d_min: ms(s.d_min),
                ..s.clone()
            })
            .collect(),
        comparisons: report
            .comparisons
            .iter()
            .map(|c| Comparison {
                a: c.a,
                b: c.b,
                collision: z(c.collision),
                disconnection: z(c.disconnection),
                ipm: w(c.ipm),
                lambda2_min: w(c.lambda2_min),
                d_min: w(c.d_min),
            })
            .collect(),
    }
}
