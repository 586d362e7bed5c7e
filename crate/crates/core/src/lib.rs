//! Timer-based hybrid coverage control of mobile sensors in a convex
//! workspace, with a continuous Lloyd benchmark and a self-triggered baseline.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod control;
pub mod density;
pub mod engine;
pub mod geometry;
pub mod output;
pub mod scenario;

pub use control::ControllerConfig;
pub use density::{DensityField, QuadratureSpec};
pub use engine::{run, Engine, RunOptions, SimulationTrace};
pub use geometry::{ConvexPolygon, Point2, Vec2};
pub use scenario::{preset, ScenarioConfig, Scenario};
