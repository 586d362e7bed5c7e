use std::fmt;

use serde::Serialize;

use crate::geometry::{Point2, Vec2};

/// Per-agent slice of the hybrid state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgentState {
    pub position: Point2,
    /// Velocity currently applied.
    pub control: Vec2,
    /// Time remaining until the agent's next event.
    pub timer: f64,
    /// Sampled centroid steering the agent between events. Only the
    /// self-triggered baseline uses it; its velocity varies along a flow.
    pub anchor: Option<Point2>,
}

/// Full hybrid state with its hybrid time `(t, j)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleState {
    pub agents: Vec<AgentState>,
    pub t: f64,
    pub j: u64,
}

impl EnsembleState {
    pub fn positions(&self) -> Vec<Point2> {
        self.agents.iter().map(|a| a.position).collect()
    }

    pub fn min_timer(&self) -> f64 {
        self.agents
            .iter()
            .map(|a| a.timer)
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether some timer has expired, i.e. a jump is possible.
    pub fn in_jump_set(&self) -> bool {
        self.agents.iter().any(|a| a.timer <= 0.0)
    }
}

/// One sampling event: agent `agent` measured `e_sample` at time `t` and
/// switched to control `eta_new` with timer `tau_new`.
///
/// The initial sample taken at `t = 0` to build the starting controls is
/// logged with `j_before = 0` and does not advance the jump counter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HybridEvent {
    pub t: f64,
    pub j_before: u64,
    pub agent: usize,
    pub e_sample: Vec2,
    pub eta_new: Vec2,
    pub tau_new: f64,
}

/// One violated clause of the admissible initial set.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "clause", rename_all = "snake_case")]
pub enum Violation {
    /// Position outside the workspace.
    PositionOutside { agent: usize },
    /// Control exceeds its bound.
    ControlTooLarge { agent: usize, norm: f64, bound: f64 },
    /// Timer outside its reset interval.
    TimerOutOfRange { agent: usize, timer: f64, lo: f64, hi: f64 },
    /// Two agents share a position.
    Coincident { p: usize, q: usize },
    /// Sample-and-hold error above its bound.
    SampleHoldTooLarge { agent: usize, norm: f64, bound: f64 },
    /// Cells could not be evaluated.
    Geometry { message: String },
}

impl Violation {
    /// Which of the three admissibility sets the clause belongs to (1, 2 or 3).
    pub fn set_index(&self) -> u8 {
        match self {
            Violation::PositionOutside { .. }
            | Violation::ControlTooLarge { .. }
            | Violation::TimerOutOfRange { .. } => 1,
            Violation::Coincident { .. } => 2,
            Violation::SampleHoldTooLarge { .. } | Violation::Geometry { .. } => 3,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = self.set_index();
        match self {
            Violation::PositionOutside { agent } => {
                write!(f, "Phi{k}: agent {agent} lies outside the workspace")
            }
            Violation::ControlTooLarge { agent, norm, bound } => {
                write!(f, "Phi{k}: agent {agent} control norm {norm} exceeds {bound}")
            }
            Violation::TimerOutOfRange { agent, timer, lo, hi } => {
                write!(f, "Phi{k}: agent {agent} timer {timer} outside [{lo}, {hi}]")
            }
            Violation::Coincident { p, q } => write!(f, "Phi{k}: agents {p} and {q} coincide"),
            Violation::SampleHoldTooLarge { agent, norm, bound } => write!(
                f,
                "Phi{k}: agent {agent} sample-and-hold error {norm} exceeds {bound}"
            ),
            Violation::Geometry { message } => write!(f, "Phi{k}: {message}"),
        }
    }
}

/// Outcome of the admissibility check; empty means admissible.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct InitialReport {
    pub violations: Vec<Violation>,
}

impl InitialReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for InitialReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "initial state is admissible");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}
