//! Deterministic execution of the hybrid closed loop.
//!
//! Between events every controller here has an exactly integrable flow
//! (constant velocity, or straight-then-exponential approach for the
//! self-triggered baseline), so the engine jumps from one timer expiry to the
//! next without an ODE solver. Metrics are taken on a fixed grid by evaluating
//! the flow at the grid times.
//!
//! Simultaneous expiries are processed as successive jumps in ascending agent
//! index. Jumps leave positions untouched and only rewrite the jumping agent's
//! control and timer, so the order does not affect the resulting state.

mod state;
mod trace;

use thiserror::Error;

pub use state::{AgentState, EnsembleState, HybridEvent, InitialReport, Violation};
pub use trace::{MetricSample, SimulationTrace};

use crate::control::{
    clamp_sat, selftrig_control, ControllerConfig, EventPolicy, ResetStream,
};
use crate::density::{cell_moments, CellMoments, IntegrationError};
use crate::geometry::{cell_unchecked, validate_configuration, Point2, Vec2};
use crate::scenario::Scenario;

/// Timers within this distance of zero count as expired.
const TIMER_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("flow step {dt} exceeds the smallest timer {min_timer}")]
    FlowOvershoot { dt: f64, min_timer: f64 },
    #[error("no timer has expired; the state is not in the jump set")]
    NotInJumpSet,
    #[error("initial state is not admissible:\n{0}")]
    Inadmissible(InitialReport),
    #[error("cell evaluation failed at t={t}, j={j}: {source}\npositions: {positions:?}")]
    Evaluation {
        t: f64,
        j: u64,
        positions: Vec<Point2>,
        #[source]
        source: IntegrationError,
    },
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Run even when the initial state is not admissible.
    pub allow_inadmissible: bool,
}

/// Constant-velocity flow of every agent for `dt`; timers count down.
pub fn flow(state: &EnsembleState, dt: f64) -> Result<EnsembleState, EngineError> {
    let min_timer = state.min_timer();
    if dt > min_timer + TIMER_EPS || dt < 0.0 {
        return Err(EngineError::FlowOvershoot { dt, min_timer });
    }
    let mut next = state.clone();
    for a in &mut next.agents {
        a.position += a.control * dt;
        a.timer = expire(a.timer - dt);
    }
    next.t += dt;
    Ok(next)
}

#[inline]
fn expire(timer: f64) -> f64 {
    if timer <= TIMER_EPS {
        0.0
    } else {
        timer
    }
}

/// Checks membership of `state` in the admissible initial set: positions in
/// the workspace, bounded controls and timers in their reset intervals;
/// pairwise distinct positions; bounded sample-and-hold error.
pub fn validate_initial(state: &EnsembleState, scenario: &Scenario) -> InitialReport {
    let mut violations = Vec::new();
    let n = state.agents.len();
    let positions = state.positions();
    let bound = scenario.controller.control_bound();
    for (p, a) in state.agents.iter().enumerate() {
        if !a.position.is_finite() || !scenario.workspace.contains(a.position, crate::geometry::EPS_GEOM) {
            violations.push(Violation::PositionOutside { agent: p });
        }
        if let Some(b) = bound {
            let norm = a.control.norm();
            if norm > b * (1.0 + 1e-12) {
                violations.push(Violation::ControlTooLarge { agent: p, norm, bound: b });
            }
        }
        let (lo, hi) = scenario.controller.timer_bounds(p);
        if !(a.timer >= lo - TIMER_EPS && a.timer <= hi + TIMER_EPS) {
            violations.push(Violation::TimerOutOfRange { agent: p, timer: a.timer, lo, hi });
        }
    }
    for p in 0..n {
        for q in p + 1..n {
            if positions[p].distance(positions[q]) <= crate::geometry::EPS_GEOM {
                violations.push(Violation::Coincident { p, q });
            }
        }
    }
    if let ControllerConfig::Timer(params) = &scenario.controller {
        if violations.is_empty() {
            for (p, a) in state.agents.iter().enumerate() {
                let cell = cell_unchecked(&positions, p, &scenario.workspace);
                match cell_moments(&cell.polygon, &scenario.density, &scenario.quad, a.position) {
                    Ok(m) => {
                        let e = m.first / m.mass;
                        let norm = (a.control - params.law(e)).norm();
                        if norm > params.eta_tilde_max * (1.0 + 1e-12) {
                            violations.push(Violation::SampleHoldTooLarge {
                                agent: p,
                                norm,
                                bound: params.eta_tilde_max,
                            });
                        }
                    }
                    Err(err) => violations.push(Violation::Geometry {
                        message: format!("agent {p}: {err}"),
                    }),
                }
            }
        }
    }
    InitialReport { violations }
}

/// Runs a scenario to its horizon, refusing inadmissible initial states.
pub fn run(scenario: &Scenario) -> Result<SimulationTrace, EngineError> {
    Engine::new(scenario).run(RunOptions::default())
}

/// Stateful executor for one scenario: owns the reset streams, the event
/// policy and a per-configuration cache of cell moments.
pub struct Engine<'a> {
    scenario: &'a Scenario,
    resets: Vec<ResetStream>,
    policy: Option<Box<dyn EventPolicy>>,
    cache: Vec<Option<CellMoments>>,
    positions: Vec<Point2>,
    stale: bool,
}

impl<'a> Engine<'a> {
    pub fn new(scenario: &'a Scenario) -> Self {
        let n = scenario.agent_count();
        let resets = match &scenario.controller {
            ControllerConfig::Timer(p) => (0..n).map(|a| p.timers.for_agent(a).stream(a)).collect(),
            _ => Vec::new(),
        };
        let policy = match &scenario.controller {
            ControllerConfig::Selftrig(p) => Some(p.build_policy()),
            _ => None,
        };
        Self {
            scenario,
            resets,
            policy,
            cache: vec![None; n],
            positions: Vec::with_capacity(n),
            stale: true,
        }
    }

    /// Replaces the self-triggered baseline's event policy.
    pub fn with_event_policy(mut self, policy: Box<dyn EventPolicy>) -> Self {
        self.policy = Some(policy);
        self
    }

    fn evaluation_error(state: &EnsembleState, source: IntegrationError) -> EngineError {
        EngineError::Evaluation {
            t: state.t,
            j: state.j,
            positions: state.positions(),
            source,
        }
    }

    /// Invalidates the cache unless it was built for exactly these positions.
    fn sync(&mut self, state: &EnsembleState) {
        if !self.stale
            && (self.positions.len() != state.agents.len()
                || self.positions.iter().zip(&state.agents).any(|(x, a)| *x != a.position))
        {
            self.stale = true;
        }
    }

    /// Cell moments of agent `p` about its position, cached until the next flow.
    fn moments(&mut self, state: &EnsembleState, p: usize) -> Result<CellMoments, EngineError> {
        if self.stale {
            self.positions.clear();
            self.positions.extend(state.agents.iter().map(|a| a.position));
            self.cache.iter_mut().for_each(|c| *c = None);
            validate_configuration(&self.positions, &self.scenario.workspace)
                .map_err(|e| Self::evaluation_error(state, e.into()))?;
            self.stale = false;
        }
        if let Some(m) = self.cache[p] {
            return Ok(m);
        }
        let s = self.scenario;
        let cell = cell_unchecked(&self.positions, p, &s.workspace);
        let m = cell_moments(&cell.polygon, &s.density, &s.quad, self.positions[p])
            .map_err(|e| Self::evaluation_error(state, e))?;
        self.cache[p] = Some(m);
        Ok(m)
    }

    /// New control, timer and anchor of agent `p` after sampling `e`.
    fn sample(&mut self, p: usize, t: f64, x: Point2, e: Vec2) -> (Vec2, f64, Option<Point2>) {
        match &self.scenario.controller {
            ControllerConfig::Timer(params) => (params.law(e), self.resets[p].next_reset(), None),
            ControllerConfig::Lloyd(params) => (e * params.k2, params.dt, None),
            ControllerConfig::Selftrig(params) => {
                let c = x + e;
                let gap = self
                    .policy
                    .as_mut()
                    .expect("self-triggered engine has a policy")
                    .next_gap(p, t, e)
                    .clamp(params.tau_min, params.tau_max);
                (selftrig_control(c, x, params), gap, Some(c))
            }
        }
    }

    /// Control law evaluated at the current error, for the sample-and-hold gap.
    fn fresh_control(&self, e: Vec2) -> Vec2 {
        match &self.scenario.controller {
            ControllerConfig::Timer(params) => params.law(e),
            ControllerConfig::Lloyd(params) => e * params.k2,
            ControllerConfig::Selftrig(params) => clamp_sat(e, params.v / params.kappa) * params.kappa,
        }
    }

    /// Builds the state at `t = 0`. Without explicit initial controls every
    /// agent samples once, which is logged as an event.
    pub fn initial_state(&mut self) -> Result<(EnsembleState, Vec<HybridEvent>), EngineError> {
        let s = self.scenario;
        let mut state = EnsembleState {
            agents: s
                .initial_positions
                .iter()
                .map(|&position| AgentState {
                    position,
                    control: Vec2::ZERO,
                    timer: 0.0,
                    anchor: None,
                })
                .collect(),
            t: 0.0,
            j: 0,
        };
        self.stale = true;
        let mut events = Vec::new();
        if let Some(init) = &s.initial_state {
            for (p, a) in state.agents.iter_mut().enumerate() {
                a.control = init.eta[p];
                a.timer = init.tau[p];
            }
            return Ok((state, events));
        }
        for p in 0..state.agents.len() {
            let m = self.moments(&state, p)?;
            let x = state.agents[p].position;
            let e = m.first / m.mass;
            let (control, timer, anchor) = self.sample(p, 0.0, x, e);
            state.agents[p] = AgentState { position: x, control, timer, anchor };
            events.push(HybridEvent {
                t: 0.0,
                j_before: 0,
                agent: p,
                e_sample: e,
                eta_new: control,
                tau_new: timer,
            });
        }
        Ok((state, events))
    }

    /// Applies one jump per expired timer, in ascending agent order.
    pub fn jump(&mut self, state: &mut EnsembleState) -> Result<Vec<HybridEvent>, EngineError> {
        if !state.in_jump_set() {
            return Err(EngineError::NotInJumpSet);
        }
        self.sync(state);
        let mut events = Vec::new();
        for p in 0..state.agents.len() {
            if state.agents[p].timer > 0.0 {
                continue;
            }
            let m = self.moments(state, p)?;
            let x = state.agents[p].position;
            let e = m.first / m.mass;
            let (control, timer, anchor) = self.sample(p, state.t, x, e);
            let agent = &mut state.agents[p];
            agent.control = control;
            agent.timer = timer;
            agent.anchor = anchor;
            events.push(HybridEvent {
                t: state.t,
                j_before: state.j,
                agent: p,
                e_sample: e,
                eta_new: control,
                tau_new: timer,
            });
            state.j += 1;
        }
        Ok(events)
    }

    fn flow_agent(&self, a: &AgentState, dt: f64) -> AgentState {
        let mut next = *a;
        match (&self.scenario.controller, a.anchor) {
            (ControllerConfig::Selftrig(params), Some(target)) => {
                next.position = params.flow(a.position, target, dt);
                next.control = selftrig_control(target, next.position, params);
            }
            _ => next.position += a.control * dt,
        }
        next.timer = expire(a.timer - dt);
        next
    }

    /// Flows the state for `dt` under the scenario's controller.
    pub fn flow(&mut self, state: &mut EnsembleState, dt: f64) -> Result<(), EngineError> {
        let min_timer = state.min_timer();
        if dt > min_timer + TIMER_EPS || dt < 0.0 {
            return Err(EngineError::FlowOvershoot { dt, min_timer });
        }
        for p in 0..state.agents.len() {
            state.agents[p] = self.flow_agent(&state.agents[p], dt);
        }
        state.t += dt;
        self.stale = true;
        Ok(())
    }

    fn flowed(&self, state: &EnsembleState, dt: f64) -> EnsembleState {
        EnsembleState {
            agents: state.agents.iter().map(|a| self.flow_agent(a, dt)).collect(),
            t: state.t + dt,
            j: state.j,
        }
    }

    /// Diagnostics of `state`, stamped with grid time `t`.
    pub fn measure(&mut self, state: &EnsembleState, t: f64) -> Result<MetricSample, EngineError> {
        self.sync(state);
        let s = self.scenario;
        let n = state.agents.len();
        let mut error_norms = Vec::with_capacity(n);
        let mut eta_tilde_norms = Vec::with_capacity(n);
        let mut cost = 0.0;
        for p in 0..n {
            let m = self.moments(state, p)?;
            let e = m.first / m.mass;
            error_norms.push(e.norm());
            eta_tilde_norms.push((state.agents[p].control - self.fresh_control(e)).norm());
            cost += m.cost();
        }
        let covered = error_norms.iter().all(|&e| e <= s.coverage_nu);
        let in_u = match s.controller.u_threshold() {
            Some(th) => error_norms.iter().all(|&e| e >= th),
            None => false,
        };
        Ok(MetricSample {
            t,
            j: state.j,
            positions: state.positions(),
            error_norms,
            eta_tilde_norms,
            control_norms: state.agents.iter().map(|a| a.control.norm()).collect(),
            timers: state.agents.iter().map(|a| a.timer).collect(),
            cost,
            covered,
            in_u,
        })
    }

    /// Alternates exact flows to the next timer expiry with jumps until the
    /// horizon. Events are processed on `[0, t_final)`.
    pub fn run(mut self, options: RunOptions) -> Result<SimulationTrace, EngineError> {
        let s = self.scenario;
        let (mut state, mut events) = self.initial_state()?;
        let report = validate_initial(&state, s);
        if !report.is_ok() && !options.allow_inadmissible {
            return Err(EngineError::Inadmissible(report));
        }
        let initial_state = state.clone();

        let tol = 1e-9 * s.t_final.max(1.0);
        let last_sample = (s.t_final / s.metrics_dt + 1e-9).floor() as usize;
        let grid = |i: usize| i as f64 * s.metrics_dt;
        let mut samples = Vec::with_capacity(last_sample + 1);
        let mut next = 0;

        while next <= last_sample && grid(next) <= state.t + tol {
            samples.push(self.measure(&state, grid(next))?);
            next += 1;
        }
        while state.t < s.t_final - tol {
            let step = state.min_timer().min(s.t_final - state.t);
            let t_end = state.t + step;
            while next <= last_sample && grid(next) < t_end - tol {
                let probe = self.flowed(&state, grid(next) - state.t);
                samples.push(self.measure(&probe, grid(next))?);
                next += 1;
            }
            self.flow(&mut state, step)?;
            if state.t < s.t_final - tol && state.in_jump_set() {
                events.extend(self.jump(&mut state)?);
            }
            while next <= last_sample && grid(next) <= state.t + tol {
                samples.push(self.measure(&state, grid(next))?);
                next += 1;
            }
        }
        while next <= last_sample {
            let probe = self.flowed(&state, (grid(next) - state.t).max(0.0));
            samples.push(self.measure(&probe, grid(next))?);
            next += 1;
        }

        let n = s.agent_count();
        Ok(SimulationTrace {
            controller: s.controller.name().to_string(),
            agent_count: n,
            t_final: s.t_final,
            metrics_dt: s.metrics_dt,
            coverage_nu: s.coverage_nu,
            u_threshold: s.controller.u_threshold(),
            control_bound: s.controller.control_bound(),
            timer_bounds: (0..n).map(|p| s.controller.timer_bounds(p)).collect(),
            initial_state,
            final_state: state,
            events,
            samples,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agent(x: f64, y: f64, cx: f64, cy: f64, timer: f64) -> AgentState {
        AgentState {
            position: Point2::new(x, y),
            control: Vec2::new(cx, cy),
            timer,
            anchor: None,
        }
    }

    #[test]
    fn flow_is_constant_velocity() {
        let s = EnsembleState {
            agents: vec![agent(0.0, 0.0, 1.0, 0.0, 1.0), agent(1.0, 1.0, 0.0, -2.0, 0.7)],
            t: 2.0,
            j: 3,
        };
        let f = flow(&s, 0.5).unwrap();
        assert_eq!(f.agents[0].position, Point2::new(0.5, 0.0));
        assert_eq!(f.agents[1].position, Point2::new(1.0, 0.0));
        assert_eq!(f.agents[0].timer, 0.5);
        assert_eq!((f.t, f.j), (2.5, 3));
        assert_eq!(f.agents[0].control, s.agents[0].control);

        let landed = flow(&s, 0.7).unwrap();
        assert_eq!(landed.agents[1].timer, 0.0);
        assert!(landed.in_jump_set());

        let halves = flow(&flow(&s, 0.35).unwrap(), 0.35).unwrap();
        for (a, b) in halves.agents.iter().zip(&landed.agents) {
            assert!(a.position.distance(b.position) <= 1e-15);
        }
    }

    #[test]
    fn flow_rejects_overshoot() {
        let s = EnsembleState {
            agents: vec![agent(0.0, 0.0, 1.0, 0.0, 0.2)],
            t: 0.0,
            j: 0,
        };
        assert!(matches!(flow(&s, 0.3), Err(EngineError::FlowOvershoot { .. })));
    }
}
