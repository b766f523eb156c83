//! Frozen-flow time-to-reach planner: an 8-neighbour Dijkstra wavefront run
//! backwards from the target, followed by steepest descent on the result.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::TargetDisc;
use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::types::{ControlInput, Vec2};

/// Minimum effective speed along an edge, m/s.
pub const SPEED_FLOOR: f64 = 1e-4;

const NEIGHBOURS: [(isize, isize); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

/// Regular node lattice covering `[x_min, x_max] × [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl GridSpec {
    pub const DEFAULT_NODES: usize = 100;
    pub const DEFAULT_PADDING: f64 = 0.2;

    /// Bounding box of `points` and the target disc, padded on each side by
    /// `padding` times its extent.
    pub fn around(points: &[Vec2], target: &TargetDisc, nodes: usize, padding: f64) -> Self {
        let r = target.radius;
        let mut x_min = target.center.x - r;
        let mut x_max = target.center.x + r;
        let mut y_min = target.center.y - r;
        let mut y_max = target.center.y + r;
        for p in points {
            x_min = x_min.min(p.x);
            x_max = x_max.max(p.x);
            y_min = y_min.min(p.y);
            y_max = y_max.max(p.y);
        }
        let px = padding * (x_max - x_min);
        let py = padding * (y_max - y_min);
        GridSpec {
            nx: nodes,
            ny: nodes,
            x_min: x_min - px,
            x_max: x_max + px,
            y_min: y_min - py,
            y_max: y_max + py,
        }
    }

    /// Default planning lattice for a mission.
    pub fn for_mission(points: &[Vec2], target: &TargetDisc) -> Self {
        Self::around(points, target, Self::DEFAULT_NODES, Self::DEFAULT_PADDING)
    }

    fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 || !(self.x_max > self.x_min) || !(self.y_max > self.y_min) {
            return Err(Error::InvalidArgument(format!("degenerate grid spec {self:?}")));
        }
        Ok(())
    }

    fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        let h = (hi - lo) / (n - 1) as f64;
        (0..n).map(|k| lo + h * k as f64).collect()
    }
}

/// Time-to-reach values (s) on a lattice, `∞` where the target is unreachable.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueGrid {
    pub x_axis: Vec<f64>,
    pub y_axis: Vec<f64>,
    /// Row-major: `values[iy * nx + ix]`.
    pub values: Vec<f64>,
    pub snapshot_time: f64,
    pub target: TargetDisc,
}

impl ValueGrid {
    pub fn nx(&self) -> usize {
        self.x_axis.len()
    }

    pub fn ny(&self) -> usize {
        self.y_axis.len()
    }

    pub fn node(&self, ix: usize, iy: usize) -> Vec2 {
        Vec2::new(self.x_axis[ix], self.y_axis[iy])
    }

    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx() + ix]
    }

    /// Bilinear interpolation of the value; `None` outside the lattice.
    pub fn interpolate(&self, p: Vec2) -> Option<f64> {
        let (ix, iy, fx, fy) = self.locate(p)?;
        let v = |dx: usize, dy: usize| self.value(ix + dx, iy + dy);
        Some(
            (1.0 - fy) * ((1.0 - fx) * v(0, 0) + fx * v(1, 0))
                + fy * ((1.0 - fx) * v(0, 1) + fx * v(1, 1)),
        )
    }

    /// Lower-left cell index and fractional offsets of `p`.
    fn locate(&self, p: Vec2) -> Option<(usize, usize, f64, f64)> {
        let (ix, fx) = cell(&self.x_axis, p.x)?;
        let (iy, fy) = cell(&self.y_axis, p.y)?;
        Some((ix, iy, fx, fy))
    }

    /// Finite-difference gradient at a node: central where both neighbours
    /// are finite, one-sided where only one is, `None` otherwise.
    fn node_gradient(&self, ix: usize, iy: usize) -> Option<Vec2> {
        let c = self.value(ix, iy);
        if !c.is_finite() {
            return None;
        }
        let gx = axis_derivative(&self.x_axis, ix, c, |k| self.value(k, iy))?;
        let gy = axis_derivative(&self.y_axis, iy, c, |k| self.value(ix, k))?;
        Some(Vec2::new(gx, gy))
    }

    /// Bilinearly interpolated node gradients at `p`.
    pub fn gradient(&self, p: Vec2) -> Option<Vec2> {
        let (ix, iy, fx, fy) = self.locate(p)?;
        let g = |dx, dy| self.node_gradient(ix + dx, iy + dy);
        let (g00, g10, g01, g11) = (g(0, 0)?, g(1, 0)?, g(0, 1)?, g(1, 1)?);
        Some(((g00 * (1.0 - fx) + g10 * fx) * (1.0 - fy)) + ((g01 * (1.0 - fx) + g11 * fx) * fy))
    }
}

fn cell(axis: &[f64], v: f64) -> Option<(usize, f64)> {
    let n = axis.len();
    if !(v >= axis[0] && v <= axis[n - 1]) {
        return None;
    }
    let i = axis.partition_point(|&a| a <= v).saturating_sub(1).min(n - 2);
    Some((i, (v - axis[i]) / (axis[i + 1] - axis[i])))
}

fn axis_derivative(axis: &[f64], k: usize, c: f64, value: impl Fn(usize) -> f64) -> Option<f64> {
    let lo = (k > 0).then(|| value(k - 1)).filter(|v| v.is_finite());
    let hi = (k + 1 < axis.len()).then(|| value(k + 1)).filter(|v| v.is_finite());
    match (lo, hi) {
        (Some(l), Some(h)) => Some((h - l) / (axis[k + 1] - axis[k - 1])),
        (None, Some(h)) => Some((h - c) / (axis[k + 1] - axis[k])),
        (Some(l), None) => Some((c - l) / (axis[k] - axis[k - 1])),
        (None, None) => None,
    }
}

/// Travel time along the straight edge `from → to` with the flow frozen at
/// `time`. `None` when the flow opposes the edge at or beyond `u_max`, or the
/// midpoint lies outside a bounded field.
pub fn edge_time(
    field: &dyn FlowField,
    from: Vec2,
    to: Vec2,
    time: f64,
    u_max: f64,
) -> Result<Option<f64>> {
    let d = to - from;
    let len = d.norm();
    let mid = from + d * 0.5;
    let v = match field.sample(mid, time) {
        Ok(v) => v,
        Err(Error::OutOfDomain { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let speed = u_max + v.dot(d / len);
    if speed <= 0.0 {
        return Ok(None);
    }
    Ok(Some(len / speed.max(SPEED_FLOOR)))
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    // min-heap on time, ties broken by node index
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn compute_value_grid(
    field: &dyn FlowField,
    snapshot_time: f64,
    target: &TargetDisc,
    spec: &GridSpec,
    u_max: f64,
) -> Result<ValueGrid> {
    spec.validate()?;
    let x_axis = GridSpec::axis(spec.x_min, spec.x_max, spec.nx);
    let y_axis = GridSpec::axis(spec.y_min, spec.y_max, spec.ny);
    let (nx, ny) = (spec.nx, spec.ny);
    let node = |k: usize| Vec2::new(x_axis[k % nx], y_axis[k / nx]);

    let mut values = vec![f64::INFINITY; nx * ny];
    let mut heap = BinaryHeap::new();
    for (k, v) in values.iter_mut().enumerate() {
        if target.contains(node(k)) {
            *v = 0.0;
            heap.push(Entry(0.0, k));
        }
    }
    if heap.is_empty() {
        return Err(Error::EmptyTarget);
    }

    let mut done = vec![false; nx * ny];
    while let Some(Entry(t, k)) = heap.pop() {
        if done[k] {
            continue;
        }
        done[k] = true;
        let (ix, iy) = ((k % nx) as isize, (k / nx) as isize);
        for (dx, dy) in NEIGHBOURS {
            let (jx, jy) = (ix + dx, iy + dy);
            if jx < 0 || jy < 0 || jx >= nx as isize || jy >= ny as isize {
                continue;
            }
            let j = jy as usize * nx + jx as usize;
            if done[j] {
                continue;
            }
            // travel runs from the neighbour into the settled node
            if let Some(dt) = edge_time(field, node(j), node(k), snapshot_time, u_max)? {
                let cand = t + dt;
                if cand < values[j] {
                    values[j] = cand;
                    heap.push(Entry(cand, j));
                }
            }
        }
    }

    Ok(ValueGrid {
        x_axis,
        y_axis,
        values,
        snapshot_time,
        target: *target,
    })
}

/// Steepest descent on the value grid at full thrust; zero inside the target.
pub fn value_grid_control(grid: &ValueGrid, position: Vec2, u_max: f64) -> Result<ControlInput> {
    if grid.target.contains(position) {
        return Ok(ControlInput::ZERO);
    }
    let no_guidance = Error::NoGuidance {
        x: position.x,
        y: position.y,
    };
    match grid.gradient(position) {
        Some(g) if g.is_finite() && g.norm() > 0.0 => {
            Ok(ControlInput::new(g * (-u_max / g.norm())))
        }
        _ => Err(no_guidance),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::AnalyticField;

    const U: f64 = 0.1;

    fn still() -> AnalyticField {
        AnalyticField::Uniform { velocity: Vec2::ZERO }
    }

    fn square(n: usize, half: f64) -> GridSpec {
        GridSpec {
            nx: n,
            ny: n,
            x_min: -half,
            x_max: half,
            y_min: -half,
            y_max: half,
        }
    }

    fn pinpoint() -> TargetDisc {
        TargetDisc::new(Vec2::ZERO, 1.0).unwrap()
    }

    #[test]
    fn axis_values_are_cell_counts_over_speed() {
        // 21 nodes over [-10 km, 10 km]: spacing 1 km, centre node at the origin
        let g = compute_value_grid(&still(), 0.0, &pinpoint(), &square(21, 10_000.0), U).unwrap();
        assert_eq!(g.value(10, 10), 0.0);
        for k in 1..=10 {
            let expected = k as f64 * 1_000.0 / U;
            assert!((g.value(10 + k, 10) - expected).abs() < 1e-9);
            assert!((g.value(10, 10 - k) - expected).abs() < 1e-9);
        }
        let diag = 2f64.sqrt() * 3_000.0 / U;
        assert!((g.value(13, 13) - diag).abs() < 1e-9);
    }

    #[test]
    fn following_current_is_faster() {
        let target = TargetDisc::new(Vec2::new(8_000.0, 0.0), 1_500.0).unwrap();
        let spec = square(41, 10_000.0);
        let calm = compute_value_grid(&still(), 0.0, &target, &spec, U).unwrap();
        let east = AnalyticField::Uniform {
            velocity: Vec2::new(U / 2.0, 0.0),
        };
        let assisted = compute_value_grid(&east, 0.0, &target, &spec, U).unwrap();
        for ix in 0..10 {
            assert!(assisted.value(ix, 20) < calm.value(ix, 20));
        }
    }

    #[test]
    fn strong_headwind_makes_upstream_unreachable() {
        let west = AnalyticField::Uniform {
            velocity: Vec2::new(-2.0 * U, 0.0),
        };
        let g = compute_value_grid(&west, 0.0, &pinpoint(), &square(21, 10_000.0), U).unwrap();
        assert!(g.value(0, 10).is_infinite());
        assert!(g.value(20, 10).is_finite());
        assert!(matches!(
            value_grid_control(&g, Vec2::new(-9_500.0, 0.0), U),
            Err(Error::NoGuidance { .. })
        ));
    }

    #[test]
    fn empty_target_is_an_error() {
        let t = TargetDisc::new(Vec2::new(500.0, 500.0), 10.0).unwrap();
        assert!(matches!(
            compute_value_grid(&still(), 0.0, &t, &square(21, 10_000.0), U),
            Err(Error::EmptyTarget)
        ));
    }

    #[test]
    fn bellman_property_holds_on_the_graph() {
        let gyre = AnalyticField::DoubleGyre {
            amplitude: 0.3,
            perturbation: 0.2,
            omega: 1e-5,
            domain: crate::flow::Rect::new(-20_000.0, -10_000.0, 40_000.0, 20_000.0),
        };
        let target = TargetDisc::new(Vec2::new(3_000.0, 1_000.0), 2_500.0).unwrap();
        let g = compute_value_grid(&gyre, 500.0, &target, &square(31, 15_000.0), U).unwrap();
        let mut finite = 0;
        for iy in 0..g.ny() {
            for ix in 0..g.nx() {
                let v = g.value(ix, iy);
                if !v.is_finite() || v == 0.0 {
                    continue;
                }
                finite += 1;
                let mut best = f64::INFINITY;
                for (dx, dy) in NEIGHBOURS {
                    let (jx, jy) = (ix as isize + dx, iy as isize + dy);
                    if jx < 0 || jy < 0 || jx >= g.nx() as isize || jy >= g.ny() as isize {
                        continue;
                    }
                    let (jx, jy) = (jx as usize, jy as usize);
                    if let Some(t) = edge_time(&gyre, g.node(ix, iy), g.node(jx, jy), 500.0, U).unwrap() {
                        best = best.min(g.value(jx, jy) + t);
                    }
                }
                assert!((v - best).abs() <= 1e-9 * v.max(1.0), "node ({ix},{iy}): {v} vs {best}");
            }
        }
        assert!(finite > 100);
    }

    #[test]
    fn larger_target_never_increases_values() {
        let flow = AnalyticField::Saddle {
            center: Vec2::new(1_000.0, -2_000.0),
            strain: 5e-6,
        };
        let spec = square(25, 12_000.0);
        let small = TargetDisc::new(Vec2::new(2_000.0, 0.0), 1_500.0).unwrap();
        let big = TargetDisc::new(Vec2::new(2_000.0, 0.0), 4_000.0).unwrap();
        let a = compute_value_grid(&flow, 0.0, &small, &spec, U).unwrap();
        let b = compute_value_grid(&flow, 0.0, &big, &spec, U).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!(y <= x);
        }
    }

    #[test]
    fn control_points_at_target_in_still_water() {
        let g = compute_value_grid(&still(), 0.0, &pinpoint(), &square(41, 20_000.0), U).unwrap();
        let mut checked = 0;
        // interior points at least 3 cells from the target and the boundary
        for &(x, y) in &[
            (-14_300.0, 3_700.0),
            (9_100.0, -12_600.0),
            (4_200.0, 15_100.0),
            (-7_777.0, -7_000.0),
            (12_345.0, 2_222.0),
        ] {
            let p = Vec2::new(x, y);
            let u = value_grid_control(&g, p, U).unwrap();
            assert!((u.norm() - U).abs() < 1e-12);
            let want = (Vec2::ZERO - p) / p.norm();
            let cos = u.vector.dot(want) / U;
            assert!(cos >= 30f64.to_radians().cos(), "{p:?}: cos={cos}");
            checked += 1;
        }
        assert_eq!(checked, 5);
        assert_eq!(value_grid_control(&g, Vec2::new(0.5, 0.0), U).unwrap(), ControlInput::ZERO);
    }

    #[test]
    fn interpolation_reproduces_nodes() {
        let g = compute_value_grid(&still(), 0.0, &pinpoint(), &square(11, 5_000.0), U).unwrap();
        for iy in 0..11 {
            for ix in 0..11 {
                assert_eq!(g.interpolate(g.node(ix, iy)).unwrap(), g.value(ix, iy));
            }
        }
        assert!(g.interpolate(Vec2::new(6_000.0, 0.0)).is_none());
    }
}
