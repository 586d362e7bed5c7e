use serde::Serialize;

use super::state::{EnsembleState, HybridEvent};
use crate::geometry::Point2;

/// State diagnostics on the metrics grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSample {
    pub t: f64,
    pub j: u64,
    pub positions: Vec<Point2>,
    /// `|e_p|` per agent.
    pub error_norms: Vec<f64>,
    /// Distance between the applied control and the control law evaluated now.
    pub eta_tilde_norms: Vec<f64>,
    pub control_norms: Vec<f64>,
    pub timers: Vec<f64>,
    /// Locational cost, also the Lyapunov candidate.
    pub cost: f64,
    /// Every error norm is at most the coverage radius.
    pub covered: bool,
    /// Every error norm is at least the convergence-region threshold.
    pub in_u: bool,
}

impl MetricSample {
    pub fn max_error(&self) -> f64 {
        self.error_norms.iter().copied().fold(0.0, f64::max)
    }
}

/// Everything recorded along one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationTrace {
    pub controller: String,
    pub agent_count: usize,
    pub t_final: f64,
    pub metrics_dt: f64,
    pub coverage_nu: f64,
    /// Threshold `eta_tilde_max * nu_tilde / k1` for the timer controller.
    pub u_threshold: Option<f64>,
    /// Applied-control bound (`k1` for the timer controller, `v` for the
    /// self-triggered baseline).
    pub control_bound: Option<f64>,
    /// Reset intervals `[lo, hi]` per agent.
    pub timer_bounds: Vec<(f64, f64)>,
    pub initial_state: EnsembleState,
    pub final_state: EnsembleState,
    pub events: Vec<HybridEvent>,
    pub samples: Vec<MetricSample>,
}

impl SimulationTrace {
    /// Event times of one agent, in order.
    pub fn event_times(&self, agent: usize) -> Vec<f64> {
        self.events
            .iter()
            .filter(|e| e.agent == agent)
            .map(|e| e.t)
            .collect()
    }

    /// Number of logged events per agent (initial samples included).
    pub fn events_per_agent(&self) -> Vec<usize> {
        let mut counts = vec![0; self.agent_count];
        for e in &self.events {
            counts[e.agent] += 1;
        }
        counts
    }

    /// Realized gaps between consecutive events of one agent.
    pub fn inter_event_gaps(&self, agent: usize) -> Vec<f64> {
        self.event_times(agent).windows(2).map(|w| w[1] - w[0]).collect()
    }
}
