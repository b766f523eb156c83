//! Gridded velocity fields and their on-disk formats.
//!
//! Two layouts are accepted:
//!
//! * `*.json` header plus a sidecar binary file holding little-endian `f32`
//!   arrays: all `u` samples followed by all `v` samples, each in `(t, y, x)`
//!   row-major order.
//! * `*.csv` with the header `t,x,y,u,v` and one row per grid node, for small
//!   test grids.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Bounds, FlowField};
use crate::error::{Error, Result};
use crate::types::Vec2;

pub const GRID_FORMAT: &str = "flowgrid-v1";

#[derive(Debug, Clone, PartialEq)]
pub struct GriddedField {
    x_axis: Vec<f64>,
    y_axis: Vec<f64>,
    t_axis: Vec<f64>,
    u_data: Vec<f64>,
    v_data: Vec<f64>,
}

/// JSON header of the binary layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridHeader {
    pub format: String,
    /// `[nt, ny, nx]`
    pub shape: [usize; 3],
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub t: Vec<f64>,
    pub units: GridUnits,
    /// Sidecar path, relative to the header's directory.
    pub data: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridUnits {
    pub x: String,
    pub y: String,
    pub t: String,
    pub velocity: String,
}

impl Default for GridUnits {
    fn default() -> Self {
        GridUnits {
            x: "m".into(),
            y: "m".into(),
            t: "s".into(),
            velocity: "m/s".into(),
        }
    }
}

fn check_axis(axis: &[f64], name: &'static str, min_len: usize) -> Result<()> {
    if axis.len() < min_len {
        return Err(Error::GridShape(format!(
            "axis `{name}` needs at least {min_len} entries, got {}",
            axis.len()
        )));
    }
    if axis.iter().any(|v| !v.is_finite()) || axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::GridAxis(name));
    }
    Ok(())
}

/// Locates `value` in `axis`: lower node index and fractional weight of the
/// upper node. A single-entry axis matches only its own value.
fn locate(axis: &[f64], value: f64) -> Option<(usize, f64)> {
    let n = axis.len();
    if n == 1 {
        return (value == axis[0]).then_some((0, 0.0));
    }
    if !(value >= axis[0] && value <= axis[n - 1]) {
        return None;
    }
    let upper = axis.partition_point(|&a| a <= value);
    let lo = upper.saturating_sub(1).min(n - 2);
    let w = (value - axis[lo]) / (axis[lo + 1] - axis[lo]);
    Some((lo, w))
}

impl GriddedField {
    pub fn new(
        x_axis: Vec<f64>,
        y_axis: Vec<f64>,
        t_axis: Vec<f64>,
        u_data: Vec<f64>,
        v_data: Vec<f64>,
    ) -> Result<Self> {
        check_axis(&x_axis, "x", 2)?;
        check_axis(&y_axis, "y", 2)?;
        check_axis(&t_axis, "t", 1)?;
        let len = x_axis.len() * y_axis.len() * t_axis.len();
        if u_data.len() != len || v_data.len() != len {
            return Err(Error::GridShape(format!(
                "expected {len} samples per component, got u={} v={}",
                u_data.len(),
                v_data.len()
            )));
        }
        if let Some(k) = u_data.iter().chain(&v_data).position(|v| !v.is_finite()) {
            return Err(Error::GridNonFinite(k));
        }
        Ok(GriddedField {
            x_axis,
            y_axis,
            t_axis,
            u_data,
            v_data,
        })
    }

    /// Samples an arbitrary field on the tensor grid of the given axes.
    pub fn from_fn(
        x_axis: Vec<f64>,
        y_axis: Vec<f64>,
        t_axis: Vec<f64>,
        f: impl Fn(Vec2, f64) -> Vec2,
    ) -> Result<Self> {
        let mut u = Vec::new();
        let mut v = Vec::new();
        for &t in &t_axis {
            for &y in &y_axis {
                for &x in &x_axis {
                    let s = f(Vec2::new(x, y), t);
                    u.push(s.x);
                    v.push(s.y);
                }
            }
        }
        Self::new(x_axis, y_axis, t_axis, u, v)
    }

    pub fn x_axis(&self) -> &[f64] {
        &self.x_axis
    }

    pub fn y_axis(&self) -> &[f64] {
        &self.y_axis
    }

    pub fn t_axis(&self) -> &[f64] {
        &self.t_axis
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.t_axis.len(), self.y_axis.len(), self.x_axis.len()]
    }

    #[inline]
    fn index(&self, it: usize, iy: usize, ix: usize) -> usize {
        (it * self.y_axis.len() + iy) * self.x_axis.len() + ix
    }

    /// Stored sample at a node.
    pub fn node(&self, it: usize, iy: usize, ix: usize) -> Vec2 {
        let k = self.index(it, iy, ix);
        Vec2::new(self.u_data[k], self.v_data[k])
    }

    /// Bilinear in space, linear in time; `u` and `v` independently.
    pub fn interpolate(&self, position: Vec2, time: f64) -> Result<Vec2> {
        let out = || Error::OutOfDomain {
            x: position.x,
            y: position.y,
            t: time,
        };
        let (ix, wx) = locate(&self.x_axis, position.x).ok_or_else(out)?;
        let (iy, wy) = locate(&self.y_axis, position.y).ok_or_else(out)?;
        let (it, wt) = locate(&self.t_axis, time).ok_or_else(out)?;

        let slice = |it: usize| {
            let c00 = self.node(it, iy, ix);
            let c10 = self.node(it, iy, ix + 1);
            let c01 = self.node(it, iy + 1, ix);
            let c11 = self.node(it, iy + 1, ix + 1);
            (c00 * (1.0 - wx) + c10 * wx) * (1.0 - wy) + (c01 * (1.0 - wx) + c11 * wx) * wy
        };
        let lower = slice(it);
        if wt == 0.0 {
            return Ok(lower);
        }
        let upper = slice(it + 1);
        Ok(lower * (1.0 - wt) + upper * wt)
    }

    /// Writes the JSON header at `path` and the sidecar `<stem>.bin` next to it.
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "flow".into());
        let data_name = format!("{stem}.bin");
        let header = GridHeader {
            format: GRID_FORMAT.into(),
            shape: self.shape(),
            x: self.x_axis.clone(),
            y: self.y_axis.clone(),
            t: self.t_axis.clone(),
            units: GridUnits::default(),
            data: data_name.clone(),
        };
        let json = serde_json::to_string_pretty(&header).map_err(|e| Error::json(path, e))?;
        fs::write(path, json).map_err(|e| Error::io(path, e))?;
        let mut bytes = Vec::with_capacity(8 * self.u_data.len());
        for v in self.u_data.iter().chain(&self.v_data) {
            bytes.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        let data_path = sibling(path, &data_name);
        fs::write(&data_path, bytes).map_err(|e| Error::io(data_path, e))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("t,x,y,u,v\n");
        for (it, &t) in self.t_axis.iter().enumerate() {
            for (iy, &y) in self.y_axis.iter().enumerate() {
                for (ix, &x) in self.x_axis.iter().enumerate() {
                    let s = self.node(it, iy, ix);
                    out.push_str(&format!("{t},{x},{y},{},{}\n", s.x, s.y));
                }
            }
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent()
        .map(|d| d.join(name))
        .unwrap_or_else(|| PathBuf::from(name))
}

impl FlowField for GriddedField {
    fn sample(&self, position: Vec2, time: f64) -> Result<Vec2> {
        self.interpolate(position, time)
    }

    fn bounds(&self) -> Bounds {
        Bounds {
            x_min: self.x_axis[0],
            x_max: *self.x_axis.last().unwrap(),
            y_min: self.y_axis[0],
            y_max: *self.y_axis.last().unwrap(),
            t_min: self.t_axis[0],
            t_max: *self.t_axis.last().unwrap(),
        }
    }

    fn is_bounded(&self) -> bool {
        true
    }
}

/// Loads a grid file, dispatching on the extension (`.csv`, otherwise JSON).
pub fn load_flow_grid(path: &Path) -> Result<GriddedField> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => parse_csv(&text),
        _ => load_json(path, &text),
    }
}

fn load_json(path: &Path, text: &str) -> Result<GriddedField> {
    let header: GridHeader =
        serde_json::from_str(text).map_err(|e| Error::GridHeader(e.to_string()))?;
    if header.format != GRID_FORMAT {
        return Err(Error::GridHeader(format!(
            "unsupported format `{}`",
            header.format
        )));
    }
    if header.units != GridUnits::default() {
        return Err(Error::GridHeader(format!(
            "unsupported units {:?}",
            header.units
        )));
    }
    let [nt, ny, nx] = header.shape;
    if header.t.len() != nt || header.y.len() != ny || header.x.len() != nx {
        return Err(Error::GridShape(format!(
            "shape {:?} disagrees with axes (t={}, y={}, x={})",
            header.shape,
            header.t.len(),
            header.y.len(),
            header.x.len()
        )));
    }
    let data_path = sibling(path, &header.data);
    let bytes = fs::read(&data_path).map_err(|e| Error::io(&data_path, e))?;
    let len = nt * ny * nx;
    if bytes.len() != 2 * len * 4 {
        return Err(Error::GridShape(format!(
            "sidecar holds {} bytes, expected {}",
            bytes.len(),
            2 * len * 4
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let (u, v) = values.split_at(len);
    GriddedField::new(header.x, header.y, header.t, u.to_vec(), v.to_vec())
}

fn parse_csv(text: &str) -> Result<GriddedField> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::GridHeader("empty file".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != ["t", "x", "y", "u", "v"] {
        return Err(Error::GridHeader(format!(
            "expected columns t,x,y,u,v, got `{header}`"
        )));
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let vals: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        match vals {
            Ok(v) if v.len() == 5 => rows.push([v[0], v[1], v[2], v[3], v[4]]),
            _ => {
                return Err(Error::GridShape(format!(
                    "row {} is not five numbers: `{line}`",
                    k + 2
                )))
            }
        }
    }
    let axis = |col: usize| {
        let mut a: Vec<f64> = rows.iter().map(|r| r[col]).collect();
        a.sort_by(f64::total_cmp);
        a.dedup();
        a
    };
    let (t_axis, x_axis, y_axis) = (axis(0), axis(1), axis(2));
    let len = t_axis.len() * y_axis.len() * x_axis.len();
    if rows.len() != len {
        return Err(Error::GridShape(format!(
            "{} rows do not form a full {}x{}x{} grid",
            rows.len(),
            t_axis.len(),
            y_axis.len(),
            x_axis.len()
        )));
    }
    let mut u = vec![f64::NAN; len];
    let mut v = vec![f64::NAN; len];
    let mut filled = vec![false; len];
    let find = |a: &[f64], x: f64| a.binary_search_by(|p| p.total_cmp(&x)).unwrap();
    for r in &rows {
        let k = (find(&t_axis, r[0]) * y_axis.len() + find(&y_axis, r[2])) * x_axis.len()
            + find(&x_axis, r[1]);
        if filled[k] {
            return Err(Error::GridShape(format!(
                "duplicate node t={} x={} y={}",
                r[0], r[1], r[2]
            )));
        }
        filled[k] = true;
        u[k] = r[3];
        v[k] = r[4];
    }
    GriddedField::new(x_axis, y_axis, t_axis, u, v)
}
