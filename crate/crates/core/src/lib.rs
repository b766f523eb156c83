//! Hierarchical safe-interaction control for underactuated swarms drifting in flow fields.
//!
//! Layers, bottom up: geometry and configuration ([`types`]), flow fields
//! ([`flow`]), communication graphs ([`graph`], [`eigen`]), the pairwise
//! potential ([`potential`]), the blended controller ([`lisic`]), performance
//! and comparison policies ([`policies`]), the closed-loop simulator
//! ([`sim`]), metrics and statistics ([`metrics`], [`stats`]) and batch
//! experiments ([`missions`]).

pub mod eigen;
pub mod error;
pub mod flow;
pub mod graph;
pub mod lisic;
pub mod metrics;
pub mod missions;
pub mod policies;
pub mod potential;
pub mod sim;
pub mod stats;
pub mod types;

pub use error::{Error, Result};
pub use types::{ControlInput, SimConfig, SwarmState, Vec2};
