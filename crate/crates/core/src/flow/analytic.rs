use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Bounds, FlowField};
use crate::error::Result;
use crate::types::Vec2;

/// Axis-aligned rectangle in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub y_min: f64,
    pub width: f64,
    pub height: f64,
}

impl Rect {
    pub fn new(x_min: f64, y_min: f64, width: f64, height: f64) -> Self {
        Rect {
            x_min,
            y_min,
            width,
            height,
        }
    }

    pub fn x_max(&self) -> f64 {
        self.x_min + self.width
    }

    pub fn y_max(&self) -> f64 {
        self.y_min + self.height
    }
}

/// Closed-form velocity fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticField {
    Uniform {
        velocity: Vec2,
    },
    /// Solid-body rotation, counter-clockwise for positive `rate` (rad/s).
    RigidRotation {
        center: Vec2,
        rate: f64,
    },
    /// Time-periodic double gyre over `domain`: two counter-rotating gyres
    /// side by side, the separatrix at the horizontal midpoint. `amplitude`
    /// is the peak speed of the unperturbed flow when
    /// `domain.width = 2 * domain.height`.
    DoubleGyre {
        amplitude: f64,
        perturbation: f64,
        omega: f64,
        domain: Rect,
    },
    /// Hyperbolic point: stretching along x, compression along y.
    Saddle {
        center: Vec2,
        strain: f64,
    },
}

impl AnalyticField {
    /// Stream function (m²/s): `u = -∂ψ/∂y`, `v = ∂ψ/∂x`.
    pub fn stream_function(&self, p: Vec2, t: f64) -> f64 {
        match *self {
            AnalyticField::DoubleGyre {
                amplitude,
                perturbation,
                omega,
                domain,
            } => {
                let (xi, eta) = gyre_coords(p, &domain);
                let (a, b) = gyre_ab(perturbation, omega, t);
                let f = a * xi * xi + b * xi;
                amplitude * domain.height / PI * (PI * f).sin() * (PI * eta).sin()
            }
            AnalyticField::Saddle { center, strain } => {
                let d = p - center;
                -strain * d.x * d.y
            }
            AnalyticField::RigidRotation { center, rate } => {
                let d = p - center;
                0.5 * rate * d.dot(d)
            }
            AnalyticField::Uniform { velocity } => velocity.y * p.x - velocity.x * p.y,
        }
    }

    fn velocity(&self, p: Vec2, t: f64) -> Vec2 {
        match *self {
            AnalyticField::Uniform { velocity } => velocity,
            AnalyticField::RigidRotation { center, rate } => {
                let d = p - center;
                Vec2::new(-rate * d.y, rate * d.x)
            }
            AnalyticField::DoubleGyre {
                amplitude,
                perturbation,
                omega,
                domain,
            } => {
                let (xi, eta) = gyre_coords(p, &domain);
                let (a, b) = gyre_ab(perturbation, omega, t);
                let f = a * xi * xi + b * xi;
                let df = 2.0 * a * xi + b;
                let u = -amplitude * (PI * f).sin() * (PI * eta).cos();
                let v = amplitude * (2.0 * domain.height / domain.width)
                    * (PI * f).cos()
                    * df
                    * (PI * eta).sin();
                Vec2::new(u, v)
            }
            AnalyticField::Saddle { center, strain } => {
                let d = p - center;
                Vec2::new(strain * d.x, -strain * d.y)
            }
        }
    }
}

fn gyre_coords(p: Vec2, domain: &Rect) -> (f64, f64) {
    (
        2.0 * (p.x - domain.x_min) / domain.width,
        (p.y - domain.y_min) / domain.height,
    )
}

fn gyre_ab(perturbation: f64, omega: f64, t: f64) -> (f64, f64) {
    let s = perturbation * (omega * t).sin();
    (s, 1.0 - 2.0 * s)
}

impl FlowField for AnalyticField {
    fn sample(&self, position: Vec2, time: f64) -> Result<Vec2> {
        Ok(self.velocity(position, time))
    }

    fn bounds(&self) -> Bounds {
        match *self {
            AnalyticField::DoubleGyre { domain, .. } => Bounds {
                x_min: domain.x_min,
                x_max: domain.x_max(),
                y_min: domain.y_min,
                y_max: domain.y_max(),
                t_min: f64::NEG_INFINITY,
                t_max: f64::INFINITY,
            },
            _ => Bounds::unbounded(),
        }
    }

    fn is_bounded(&self) -> bool {
        false
    }

    fn period(&self) -> Option<f64> {
        match *self {
            AnalyticField::DoubleGyre {
                perturbation, omega, ..
            } if perturbation != 0.0 && omega != 0.0 => Some(2.0 * PI / omega.abs()),
            _ => None,
        }
    }
}
