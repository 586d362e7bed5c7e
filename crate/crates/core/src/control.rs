//! Control laws: the timer-based sample-and-hold controller with its
//! dwell-time and gain design formulas, the continuous Lloyd benchmark and the
//! self-triggered baseline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::density::{cell_moments, DensityField, IntegrationError, QuadratureSpec};
use crate::geometry::{labeled_cell, ConvexPolygon, Point2, Vec2};

/// `x / c` inside the ball of radius `c`, `x / |x|` outside. Output norm is at most 1.
pub fn sat(x: Vec2, c: f64) -> Vec2 {
    debug_assert!(c > 0.0);
    let n = x.norm();
    if n <= c {
        x / c
    } else {
        x / n
    }
}

/// Clamping saturation: `s` inside the ball of radius `a`, `a s / |s|` outside.
pub fn clamp_sat(s: Vec2, a: f64) -> Vec2 {
    let n = s.norm();
    if n <= a {
        s
    } else {
        s * (a / n)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum ResetPolicy {
    #[default]
    AlwaysT2,
    /// Uniform draw on `[T1, T2)` from a per-agent stream of a seeded generator.
    UniformRandom { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimerParams {
    pub t1: f64,
    pub t2: f64,
    #[serde(default)]
    pub reset: ResetPolicy,
}

impl TimerParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.t1 > 0.0 && self.t1.is_finite()) {
            return Err(format!("timer T1 must be positive, got {}", self.t1));
        }
        if !(self.t2 >= self.t1 && self.t2.is_finite()) {
            return Err(format!("timer requires T1 <= T2, got T1={} T2={}", self.t1, self.t2));
        }
        Ok(())
    }

    /// Reset stream for one agent.
    pub fn stream(&self, agent: usize) -> ResetStream {
        let rng = match self.reset {
            ResetPolicy::AlwaysT2 => None,
            ResetPolicy::UniformRandom { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(agent as u64);
                Some(rng)
            }
        };
        ResetStream { params: *self, rng }
    }
}

/// Source of post-jump timer values for one agent.
#[derive(Debug, Clone)]
pub struct ResetStream {
    params: TimerParams,
    rng: Option<ChaCha8Rng>,
}

impl ResetStream {
    pub fn next_reset(&mut self) -> f64 {
        let TimerParams { t1, t2, .. } = self.params;
        match &mut self.rng {
            None => t2,
            Some(rng) => {
                let u: f64 = rng.gen();
                (t1 + (t2 - t1) * u).clamp(t1, t2)
            }
        }
    }
}

/// Timer parameters shared by every agent or given per agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimerSchedule {
    Shared(TimerParams),
    PerAgent(Vec<TimerParams>),
}

impl TimerSchedule {
    pub fn for_agent(&self, p: usize) -> TimerParams {
        match self {
            TimerSchedule::Shared(t) => *t,
            TimerSchedule::PerAgent(v) => v[p],
        }
    }

    pub fn all(&self, n: usize) -> Vec<TimerParams> {
        (0..n).map(|p| self.for_agent(p)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimerControllerParams {
    pub k1: f64,
    pub nu: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub eta_tilde_max: f64,
    /// Assumed Lipschitz constant of the centroid map.
    #[serde(default = "default_lipschitz")]
    pub lipschitz: f64,
    pub timers: TimerSchedule,
}

fn default_epsilon() -> f64 {
    1e-8
}

fn default_lipschitz() -> f64 {
    5.0
}

impl TimerControllerParams {
    /// `(1 - epsilon) * nu`, the saturation radius of the control law.
    pub fn nu_tilde(&self) -> f64 {
        (1.0 - self.epsilon) * self.nu
    }

    /// Error-norm threshold of the convergence region: `eta_tilde_max * nu_tilde / k1`.
    pub fn u_threshold(&self) -> f64 {
        self.eta_tilde_max * self.nu_tilde() / self.k1
    }

    /// `k1 * sat(e, nu_tilde)`.
    pub fn law(&self, e: Vec2) -> Vec2 {
        sat(e, self.nu_tilde()) * self.k1
    }

    pub fn validate(&self, agent_count: usize) -> Vec<String> {
        let mut errs = Vec::new();
        let positive = |name: &str, v: f64, errs: &mut Vec<String>| {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(format!("controller.{name} must be positive, got {v}"));
            }
        };
        positive("k1", self.k1, &mut errs);
        positive("nu", self.nu, &mut errs);
        positive("eta_tilde_max", self.eta_tilde_max, &mut errs);
        positive("lipschitz", self.lipschitz, &mut errs);
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            errs.push(format!("controller.epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if self.eta_tilde_max >= self.k1 {
            errs.push(format!(
                "controller.eta_tilde_max ({}) must be smaller than k1 ({})",
                self.eta_tilde_max, self.k1
            ));
        }
        match &self.timers {
            TimerSchedule::Shared(t) => {
                if let Err(e) = t.validate() {
                    errs.push(format!("controller.timers: {e}"));
                }
            }
            TimerSchedule::PerAgent(v) => {
                if v.len() != agent_count {
                    errs.push(format!(
                        "controller.timers lists {} agents, expected {agent_count}",
                        v.len()
                    ));
                }
                for (p, t) in v.iter().enumerate() {
                    if let Err(e) = t.validate() {
                        errs.push(format!("controller.timers[{p}]: {e}"));
                    }
                }
            }
        }
        errs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LloydParams {
    pub k2: f64,
    /// Forward-Euler step of the benchmark emulation.
    #[serde(default = "default_lloyd_dt")]
    pub dt: f64,
}

fn default_lloyd_dt() -> f64 {
    0.01
}

/// Generator of inter-event gaps for the self-triggered baseline.
pub trait EventPolicy: Send {
    /// Gap until the next event of `agent`, sampled at time `t` where
    /// `offset = c_p - x_p`. The engine clamps it to `[tau_min, tau_max]`.
    fn next_gap(&mut self, agent: usize, t: f64, offset: Vec2) -> f64;
}

/// Samples every agent on a fixed period.
#[derive(Debug, Clone, Copy)]
pub struct Periodic {
    pub period: f64,
}

impl EventPolicy for Periodic {
    fn next_gap(&mut self, _agent: usize, _t: f64, _offset: Vec2) -> f64 {
        self.period
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventPolicyConfig {
    /// Fixed period; defaults to `tau_min`.
    Periodic {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        period: Option<f64>,
    },
}

impl Default for EventPolicyConfig {
    fn default() -> Self {
        EventPolicyConfig::Periodic { period: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelfTrigParams {
    pub kappa: f64,
    pub v: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    #[serde(default)]
    pub event_policy: EventPolicyConfig,
    /// Trigger-function parameter of the original design; recorded, not used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl SelfTrigParams {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        for (name, v) in [("kappa", self.kappa), ("v", self.v), ("tau_min", self.tau_min)] {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(format!("controller.{name} must be positive, got {v}"));
            }
        }
        if !(self.tau_max >= self.tau_min && self.tau_max.is_finite()) {
            errs.push(format!(
                "controller requires tau_min <= tau_max, got {} > {}",
                self.tau_min, self.tau_max
            ));
        }
        if let EventPolicyConfig::Periodic { period: Some(p) } = self.event_policy {
            if !(p > 0.0 && p.is_finite()) {
                errs.push(format!("controller.event_policy.period must be positive, got {p}"));
            }
        }
        errs
    }

    pub fn build_policy(&self) -> Box<dyn EventPolicy> {
        match self.event_policy {
            EventPolicyConfig::Periodic { period } => Box::new(Periodic {
                period: period.unwrap_or(self.tau_min),
            }),
        }
    }

    /// Exact position after moving for `dt` under `κ·clamp_sat(target - x, v/κ)`
    /// with `target` held fixed: straight-line travel at speed `v` until the
    /// distance drops to `v/κ`, exponential approach afterwards.
    pub fn flow(&self, x: Point2, target: Point2, dt: f64) -> Point2 {
        let d = target - x;
        let dist = d.norm();
        if dist == 0.0 || dt <= 0.0 {
            return x;
        }
        let dir = d / dist;
        let radius = self.v / self.kappa;
        let mut remaining = dt;
        let mut dist_now = dist;
        if dist_now > radius {
            let cruise = (dist_now - radius) / self.v;
            if remaining <= cruise {
                return x + dir * (self.v * remaining);
            }
            remaining -= cruise;
            dist_now = radius;
        }
        target - dir * (dist_now * (-self.kappa * remaining).exp())
    }
}

/// Controller choice of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControllerConfig {
    Timer(TimerControllerParams),
    Lloyd(LloydParams),
    Selftrig(SelfTrigParams),
}

impl ControllerConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ControllerConfig::Timer(_) => "timer",
            ControllerConfig::Lloyd(_) => "lloyd",
            ControllerConfig::Selftrig(_) => "selftrig",
        }
    }

    /// Reset interval `[lo, hi]` of agent `p`'s timer.
    pub fn timer_bounds(&self, p: usize) -> (f64, f64) {
        match self {
            ControllerConfig::Timer(params) => {
                let t = params.timers.for_agent(p);
                (t.t1, t.t2)
            }
            ControllerConfig::Lloyd(params) => (params.dt, params.dt),
            ControllerConfig::Selftrig(params) => (params.tau_min, params.tau_max),
        }
    }

    /// Bound on the applied control norm, when the law has one.
    pub fn control_bound(&self) -> Option<f64> {
        match self {
            ControllerConfig::Timer(params) => Some(params.k1),
            ControllerConfig::Lloyd(_) => None,
            ControllerConfig::Selftrig(params) => Some(params.v),
        }
    }

    pub fn u_threshold(&self) -> Option<f64> {
        match self {
            ControllerConfig::Timer(params) => Some(params.u_threshold()),
            _ => None,
        }
    }

    pub fn validate(&self, agent_count: usize) -> Vec<String> {
        match self {
            ControllerConfig::Timer(p) => p.validate(agent_count),
            ControllerConfig::Lloyd(params) => {
                let mut errs = Vec::new();
                if !(params.k2 > 0.0 && params.k2.is_finite()) {
                    errs.push(format!("controller.k2 must be positive, got {}", params.k2));
                }
                if !(params.dt > 0.0 && params.dt.is_finite()) {
                    errs.push(format!("controller.dt must be positive, got {}", params.dt));
                }
                errs
            }
            ControllerConfig::Selftrig(p) => p.validate(),
        }
    }
}

/// `e_p = c_p(x) - x_p` for agent `p`.
pub fn tracking_error(
    p: usize,
    config: &[Point2],
    workspace: &ConvexPolygon,
    phi: &DensityField,
    quad: &QuadratureSpec,
) -> Result<Vec2, IntegrationError> {
    let cell = labeled_cell(config, p, workspace)?;
    let m = cell_moments(&cell.polygon, phi, quad, config[p])?;
    Ok(m.first / m.mass)
}

/// Jump of the timer controller: fresh saturated control and a new timer value.
pub fn timer_controller_jump(
    e_p: Vec2,
    params: &TimerControllerParams,
    reset: &mut ResetStream,
) -> (Vec2, f64) {
    (params.law(e_p), reset.next_reset())
}

/// `eta_p - k1 * sat(e_p, nu_tilde)`.
pub fn sample_hold_error(eta_p: Vec2, e_p: Vec2, params: &TimerControllerParams) -> Vec2 {
    eta_p - params.law(e_p)
}

/// Largest `T2` keeping the sample-and-hold error below `eta_tilde_max`:
/// `eta_tilde_max * nu_tilde / (k1^2 (L sqrt(N) + 1))`.
pub fn max_dwell_time(params: &TimerControllerParams, n: usize) -> f64 {
    params.eta_tilde_max * params.nu_tilde()
        / (params.k1 * params.k1 * (params.lipschitz * (n as f64).sqrt() + 1.0))
}

/// Largest `k1` compatible with timer bound `t2`; inverse of [`max_dwell_time`].
pub fn max_gain(params: &TimerControllerParams, t2: f64, n: usize) -> f64 {
    (params.eta_tilde_max * params.nu_tilde()
        / (t2 * (params.lipschitz * (n as f64).sqrt() + 1.0)))
        .sqrt()
}

pub fn lloyd_control(e_p: Vec2, params: &LloydParams) -> Vec2 {
    e_p * params.k2
}

/// `κ·clamp_sat(c_sampled - x_p, v/κ)`; norm never exceeds `v`.
pub fn selftrig_control(c_sampled: Point2, x_p: Point2, params: &SelfTrigParams) -> Vec2 {
    clamp_sat(c_sampled - x_p, params.v / params.kappa) * params.kappa
}
