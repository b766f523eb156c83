//! Time-varying planar velocity fields `v(q, t)`.

mod analytic;
mod grid;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use analytic::{AnalyticField, Rect};
pub use grid::{load_flow_grid, GridHeader, GridUnits, GriddedField, GRID_FORMAT};

use crate::error::{Error, Result};
use crate::types::Vec2;

/// Spatial rectangle and time span over which a field is defined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl Bounds {
    pub fn unbounded() -> Self {
        Bounds {
            x_min: f64::NEG_INFINITY,
            x_max: f64::INFINITY,
            y_min: f64::NEG_INFINITY,
            y_max: f64::INFINITY,
            t_min: f64::NEG_INFINITY,
            t_max: f64::INFINITY,
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn is_finite(&self) -> bool {
        [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// A queryable velocity field. Sampling is deterministic and pure.
pub trait FlowField: Send + Sync + fmt::Debug {
    /// Velocity in m/s at `position` and `time`.
    fn sample(&self, position: Vec2, time: f64) -> Result<Vec2>;

    /// Nominal domain. Unbounded fields report infinite extents.
    fn bounds(&self) -> Bounds;

    /// Whether queries outside [`FlowField::bounds`] are errors.
    fn is_bounded(&self) -> bool;

    /// Temporal period in seconds, for time-periodic fields.
    fn period(&self) -> Option<f64> {
        None
    }
}

/// Default double-gyre domain: 100 km × 50 km with its origin at (0, 0).
pub const DEFAULT_GYRE_DOMAIN: Rect = Rect {
    x_min: 0.0,
    y_min: 0.0,
    width: 100_000.0,
    height: 50_000.0,
};

/// Textual flow description, as accepted on the command line:
///
/// * `uniform:VX,VY`
/// * `double-gyre:A,E,OMEGA[,WIDTH,HEIGHT]`
/// * `rotation:CX,CY,RATE`
/// * `saddle:CX,CY,STRAIN`
/// * `grid:PATH`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FlowSpec {
    Analytic(AnalyticField),
    Grid(PathBuf),
}

impl FlowSpec {
    pub fn zero() -> Self {
        FlowSpec::Analytic(AnalyticField::Uniform {
            velocity: Vec2::ZERO,
        })
    }

    /// Instantiates the field; grid files are read from disk here.
    pub fn build(&self) -> Result<Arc<dyn FlowField>> {
        Ok(match self {
            FlowSpec::Analytic(a) => Arc::new(*a),
            FlowSpec::Grid(path) => Arc::new(load_flow_grid(path)?),
        })
    }
}

fn parse_numbers(kind: &str, args: &str, allowed: &[usize]) -> Result<Vec<f64>> {
    let vals: std::result::Result<Vec<f64>, _> =
        args.split(',').map(|s| s.trim().parse::<f64>()).collect();
    match vals {
        Ok(v) if allowed.contains(&v.len()) && v.iter().all(|x| x.is_finite()) => Ok(v),
        _ => Err(Error::InvalidArgument(format!(
            "flow `{kind}` expects {allowed:?} comma-separated numbers, got `{args}`"
        ))),
    }
}

impl FromStr for FlowSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidArgument(format!("flow spec `{s}` lacks `kind:`")))?;
        let field = match kind {
            "uniform" => {
                let v = parse_numbers(kind, args, &[2])?;
                AnalyticField::Uniform {
                    velocity: Vec2::new(v[0], v[1]),
                }
            }
            "double-gyre" => {
                let v = parse_numbers(kind, args, &[3, 5])?;
                let domain = if v.len() == 5 {
                    if v[3] <= 0.0 || v[4] <= 0.0 {
                        return Err(Error::InvalidArgument(
                            "double-gyre domain must have positive size".into(),
                        ));
                    }
                    Rect::new(0.0, 0.0, v[3], v[4])
                } else {
                    DEFAULT_GYRE_DOMAIN
                };
                if v[0] <= 0.0 {
                    return Err(Error::InvalidArgument(
                        "double-gyre amplitude must be positive".into(),
                    ));
                }
                AnalyticField::DoubleGyre {
                    amplitude: v[0],
                    perturbation: v[1],
                    omega: v[2],
                    domain,
                }
            }
            "rotation" => {
                let v = parse_numbers(kind, args, &[3])?;
                AnalyticField::RigidRotation {
                    center: Vec2::new(v[0], v[1]),
                    rate: v[2],
                }
            }
            "saddle" => {
                let v = parse_numbers(kind, args, &[3])?;
                AnalyticField::Saddle {
                    center: Vec2::new(v[0], v[1]),
                    strain: v[2],
                }
            }
            "grid" if !args.is_empty() => return Ok(FlowSpec::Grid(PathBuf::from(args))),
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown flow spec `{s}`"
                )))
            }
        };
        Ok(FlowSpec::Analytic(field))
    }
}

impl fmt::Display for FlowSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowSpec::Grid(p) => write!(f, "grid:{}", p.display()),
            FlowSpec::Analytic(a) => match *a {
                AnalyticField::Uniform { velocity } => {
                    write!(f, "uniform:{},{}", velocity.x, velocity.y)
                }
                AnalyticField::DoubleGyre {
                    amplitude,
                    perturbation,
                    omega,
                    domain,
                } => {
                    write!(f, "double-gyre:{amplitude},{perturbation},{omega}")?;
                    if domain != DEFAULT_GYRE_DOMAIN {
                        write!(f, ",{},{}", domain.width, domain.height)?;
                    }
                    Ok(())
                }
                AnalyticField::RigidRotation { center, rate } => {
                    write!(f, "rotation:{},{},{rate}", center.x, center.y)
                }
                AnalyticField::Saddle { center, strain } => {
                    write!(f, "saddle:{},{},{strain}", center.x, center.y)
                }
            },
        }
    }
}

impl TryFrom<String> for FlowSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FlowSpec> for String {
    fn from(f: FlowSpec) -> String {
        f.to_string()
    }
}

/// Samples `field`, rejecting out-of-domain queries on bounded fields.
pub fn sample_flow(field: &dyn FlowField, position: Vec2, time: f64) -> Result<Vec2> {
    let v = field.sample(position, time)?;
    debug_assert!(v.is_finite());
    Ok(v)
}
