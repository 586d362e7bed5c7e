//! Post-run evaluation of traces: coverage, sample-and-hold audit, cost
//! trends and cross-controller resource comparison.

use std::fmt::Write as _;

use serde::Serialize;

use crate::control::{max_dwell_time, TimerControllerParams};
use crate::engine::SimulationTrace;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub nu: f64,
    /// Earliest sample time from which every later sample is covered.
    pub first_time_covered: Option<f64>,
    pub final_max_error: f64,
    pub per_agent_final_error: Vec<f64>,
}

/// Scans the metric samples for `nu`-approximate coverage.
pub fn coverage_report(trace: &SimulationTrace, nu: f64) -> CoverageReport {
    let mut first = None;
    for m in trace.samples.iter().rev() {
        if m.error_norms.iter().all(|&e| e <= nu) {
            first = Some(m.t);
        } else {
            break;
        }
    }
    let last = trace.samples.last();
    CoverageReport {
        nu,
        first_time_covered: first,
        final_max_error: last.map_or(0.0, |m| m.max_error()),
        per_agent_final_error: last.map_or_else(Vec::new, |m| m.error_norms.clone()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtaTildeViolation {
    pub t: f64,
    pub j: u64,
    pub agent: usize,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtaTildeAudit {
    pub max: f64,
    pub bound: f64,
    /// Whether every agent's T2 respects the maximum dwell time.
    pub dwell_condition_holds: bool,
    pub violations: Vec<EtaTildeViolation>,
}

/// Largest sample-and-hold error over the metric samples, with every sample
/// exceeding `eta_tilde_max`.
pub fn eta_tilde_audit(trace: &SimulationTrace, params: &TimerControllerParams) -> EtaTildeAudit {
    let n = trace.agent_count;
    let t2_max = max_dwell_time(params, n);
    let dwell_condition_holds = params.timers.all(n).iter().all(|t| t.t2 <= t2_max);
    let mut max: f64 = 0.0;
    let mut violations = Vec::new();
    for m in &trace.samples {
        for (agent, &norm) in m.eta_tilde_norms.iter().enumerate() {
            max = max.max(norm);
            if norm > params.eta_tilde_max {
                violations.push(EtaTildeViolation { t: m.t, j: m.j, agent, norm });
            }
        }
    }
    EtaTildeAudit {
        max,
        bound: params.eta_tilde_max,
        dwell_condition_holds,
        violations,
    }
}

/// Consecutive-sample increases of the cost beyond a relative slack.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub pairs_checked: usize,
    /// Largest `(V[k+1] - V[k]) / |V[k]|` among checked pairs (may be negative).
    pub max_relative_increase: f64,
    /// Times `t[k+1]` of pairs whose increase exceeds the slack.
    pub violations: Vec<f64>,
}

fn monotonicity<F>(trace: &SimulationTrace, slack: f64, mut include: F) -> MonotonicityReport
where
    F: FnMut(usize) -> bool,
{
    let mut pairs_checked = 0;
    let mut max_relative_increase = f64::NEG_INFINITY;
    let mut violations = Vec::new();
    for (k, w) in trace.samples.windows(2).enumerate() {
        if !include(k) {
            continue;
        }
        pairs_checked += 1;
        let rel = (w[1].cost - w[0].cost) / w[0].cost.abs().max(f64::MIN_POSITIVE);
        max_relative_increase = max_relative_increase.max(rel);
        if rel > slack {
            violations.push(w[1].t);
        }
    }
    MonotonicityReport {
        pairs_checked,
        max_relative_increase,
        violations,
    }
}

/// Cost monotonicity on samples with `t >= t_from`.
pub fn cost_monotonicity(trace: &SimulationTrace, t_from: f64, slack: f64) -> MonotonicityReport {
    let s = &trace.samples;
    monotonicity(trace, slack, |k| s[k].t >= t_from)
}

/// Cost monotonicity on consecutive samples that both lie in the region
/// where every error norm is at least the timer controller's threshold.
pub fn lyapunov_audit(trace: &SimulationTrace, slack: f64) -> MonotonicityReport {
    let s = &trace.samples;
    monotonicity(trace, slack, |k| s[k].in_u && s[k + 1].in_u)
}

/// `(max V - min V) / |V(t_final)|` over samples in the last `window` seconds.
pub fn cost_stationarity(trace: &SimulationTrace, window: f64) -> f64 {
    let Some(last) = trace.samples.last() else {
        return 0.0;
    };
    let from = last.t - window;
    let (lo, hi) = trace
        .samples
        .iter()
        .filter(|m| m.t >= from - 1e-9)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| {
            (lo.min(m.cost), hi.max(m.cost))
        });
    (hi - lo) / last.cost.abs().max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResourceReport {
    pub controller: String,
    pub per_agent_event_count: Vec<usize>,
    /// One cell computation per logged event.
    pub per_agent_voronoi_computations: Vec<usize>,
    /// Sum of computations with unit cost each.
    pub total_cost_units: f64,
    /// Set for the self-triggered baseline, whose trigger-function work is
    /// not modeled.
    pub undercount: bool,
}

pub fn resource_report(trace: &SimulationTrace) -> ResourceReport {
    let counts = trace.events_per_agent();
    ResourceReport {
        controller: trace.controller.clone(),
        total_cost_units: counts.iter().sum::<usize>() as f64,
        per_agent_voronoi_computations: counts.clone(),
        per_agent_event_count: counts,
        undercount: trace.controller == "selftrig",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub label: String,
    pub resources: ResourceReport,
    pub coverage: CoverageReport,
    pub final_cost: f64,
    /// Total cost units relative to the Lloyd run, when one is present.
    pub ratio_vs_lloyd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub t_final: f64,
    pub rows: Vec<ComparisonRow>,
}

/// Side-by-side resource and coverage summary of labelled traces.
pub fn compare(traces: &[(String, &SimulationTrace)], nu: f64) -> ComparisonTable {
    let lloyd_total = traces
        .iter()
        .find(|(_, t)| t.controller == "lloyd")
        .map(|(_, t)| resource_report(t).total_cost_units);
    let rows = traces
        .iter()
        .map(|(label, trace)| {
            let resources = resource_report(trace);
            let ratio_vs_lloyd = lloyd_total
                .filter(|&l| l > 0.0)
                .map(|l| resources.total_cost_units / l);
            ComparisonRow {
                label: label.clone(),
                coverage: coverage_report(trace, nu),
                final_cost: trace.samples.last().map_or(f64::NAN, |m| m.cost),
                resources,
                ratio_vs_lloyd,
            }
        })
        .collect();
    ComparisonTable {
        t_final: traces.first().map_or(0.0, |(_, t)| t.t_final),
        rows,
    }
}

impl ComparisonTable {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<24} {:>10} {:>10} {:>10} {:>12} {:>10} {:>12} {:>12}",
            "run", "events/min", "events/max", "total", "vs lloyd", "covered@", "final max e", "final V"
        );
        for r in &self.rows {
            let counts = &r.resources.per_agent_event_count;
            let min = counts.iter().min().copied().unwrap_or(0);
            let max = counts.iter().max().copied().unwrap_or(0);
            let ratio = r.ratio_vs_lloyd.map_or("-".to_string(), |x| format!("{x:.4}"));
            let covered = r
                .coverage
                .first_time_covered
                .map_or("never".to_string(), |t| format!("{t:.2}"));
            let mark = if r.resources.undercount { "*" } else { "" };
            let _ = writeln!(
                out,
                "{:<24} {:>10} {:>10} {:>10} {:>12} {:>10} {:>12.3e} {:>12.6}",
                format!("{}{mark}", r.label),
                min,
                max,
                r.resources.total_cost_units,
                ratio,
                covered,
                r.coverage.final_max_error,
                r.final_cost
            );
        }
        if self.rows.iter().any(|r| r.resources.undercount) {
            let _ = writeln!(
                out,
                "* counts events only; trigger-function evaluations are not modeled"
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{EnsembleState, HybridEvent, MetricSample};
    use crate::geometry::{Point2, Vec2};

    fn sample(t: f64, errors: &[f64], cost: f64, in_u: bool) -> MetricSample {
        MetricSample {
            t,
            j: 0,
            positions: vec![Point2::ZERO; errors.len()],
            error_norms: errors.to_vec(),
            eta_tilde_norms: vec![0.0; errors.len()],
            control_norms: vec![0.0; errors.len()],
            timers: vec![0.0; errors.len()],
            cost,
            covered: false,
            in_u,
        }
    }

    fn trace(controller: &str, samples: Vec<MetricSample>, events: Vec<(f64, usize)>) -> SimulationTrace {
        let state = EnsembleState { agents: vec![], t: 0.0, j: 0 };
        SimulationTrace {
            controller: controller.into(),
            agent_count: 2,
            t_final: 1.0,
            metrics_dt: 0.5,
            coverage_nu: 0.5,
            u_threshold: None,
            control_bound: None,
            timer_bounds: vec![],
            initial_state: state.clone(),
            final_state: state,
            events: events
                .into_iter()
                .map(|(t, agent)| HybridEvent {
                    t,
                    j_before: 0,
                    agent,
                    e_sample: Vec2::ZERO,
                    eta_new: Vec2::ZERO,
                    tau_new: 0.1,
                })
                .collect(),
            samples,
        }
    }

    #[test]
    fn coverage_needs_every_later_sample() {
        let tr = trace(
            "timer",
            vec![
                sample(0.0, &[0.1, 0.2], 1.0, false),
                sample(0.5, &[0.9, 0.2], 1.0, false),
                sample(1.0, &[0.3, 0.2], 1.0, false),
            ],
            vec![],
        );
        let r = coverage_report(&tr, 0.5);
        assert_eq!(r.first_time_covered, Some(1.0));
        assert_eq!(r.final_max_error, 0.3);
        assert_eq!(coverage_report(&tr, 1.0).first_time_covered, Some(0.0));
        assert_eq!(coverage_report(&tr, 0.0).first_time_covered, None);
    }

    #[test]
    fn monotonicity_and_u_filter() {
        let tr = trace(
            "timer",
            vec![
                sample(0.0, &[1.0], 10.0, true),
                sample(0.5, &[1.0], 11.0, false),
                sample(1.0, &[1.0], 10.5, true),
                sample(1.5, &[1.0], 10.6, true),
            ],
            vec![],
        );
        let all = cost_monotonicity(&tr, 0.0, 1e-6);
        assert_eq!(all.pairs_checked, 3);
        assert_eq!(all.violations, vec![0.5, 1.5]);
        let u = lyapunov_audit(&tr, 1e-6);
        assert_eq!(u.pairs_checked, 1);
        assert_eq!(u.violations, vec![1.5]);
        let late = cost_monotonicity(&tr, 0.5, 1e-6);
        assert_eq!(late.pairs_checked, 2);
        assert!((cost_stationarity(&tr, 0.5) - 0.1 / 10.6).abs() < 1e-15);
    }

    #[test]
    fn resource_ratios_against_lloyd() {
        let timer = trace("timer", vec![sample(0.0, &[0.0], 1.0, false)], vec![(0.0, 0), (0.0, 1), (0.5, 0)]);
        let lloyd = trace(
            "lloyd",
            vec![sample(0.0, &[0.0], 1.0, false)],
            (0..6).map(|k| (k as f64 * 0.1, k % 2)).collect(),
        );
        let st = trace("selftrig", vec![sample(0.0, &[0.0], 1.0, false)], vec![(0.0, 0)]);
        let table = compare(
            &[("timer".into(), &timer), ("lloyd".into(), &lloyd), ("selftrig".into(), &st)],
            0.5,
        );
        assert_eq!(table.rows[0].resources.per_agent_event_count, vec![2, 1]);
        assert_eq!(table.rows[0].ratio_vs_lloyd, Some(0.5));
        assert_eq!(table.rows[1].ratio_vs_lloyd, Some(1.0));
        assert!(table.rows[2].resources.undercount);
        let text = table.to_text();
        assert!(text.contains("selftrig*"), "{text}");
        assert_eq!(text.lines().count(), 5);
    }
}
