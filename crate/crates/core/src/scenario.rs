//! Scenario configuration files, presets, and resolution into a runnable
//! [`Scenario`].

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{
    ControllerConfig, EventPolicyConfig, LloydParams, ResetPolicy, SelfTrigParams,
    TimerControllerParams, TimerParams, TimerSchedule,
};
use crate::density::{DensityField, QuadratureSpec};
use crate::geometry::{ConvexPolygon, Point2, Vec2};

pub const SCHEMA_VERSION: u32 = 1;

/// Names accepted by [`preset`].
pub const PRESET_NAMES: [&str; 4] = [
    "validation30",
    "comparison12_lloyd",
    "comparison12_selftrig",
    "comparison12_timer",
];

/// Convex heptagon used by every preset. Only an approximation of the
/// workspace in the original study, whose vertices were published in figures
/// only; workspace-dependent numbers are therefore qualitative.
pub fn heptagon() -> ConvexPolygon {
    ConvexPolygon::new(
        [
            (0.0, 2.0),
            (4.0, 0.0),
            (11.0, 0.0),
            (15.0, 3.0),
            (14.0, 8.0),
            (7.0, 11.0),
            (1.0, 8.0),
        ]
        .into_iter()
        .map(|(x, y)| Point2::new(x, y))
        .collect(),
    )
    .expect("heptagon is convex")
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column} (field `{field}`): {message}")]
    Parse {
        line: usize,
        column: usize,
        field: String,
        message: String,
    },
    #[error("invalid scenario:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),
    #[error("unknown preset `{0}` (expected one of: validation30, comparison12_lloyd, comparison12_selftrig, comparison12_timer)")]
    UnknownPreset(String),
}

/// How initial positions are obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialPositions {
    Explicit(Vec<Point2>),
    /// Rejection sampling of uniform points in the workspace's bounding box.
    Sampled {
        seed: u64,
        #[serde(default = "default_margin")]
        margin: f64,
        #[serde(default = "default_margin")]
        min_separation: f64,
    },
}

fn default_margin() -> f64 {
    0.1
}

/// Explicit initial controls and timers, replacing the initial sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialControls {
    pub eta: Vec<Vec2>,
    pub tau: Vec<f64>,
}

/// On-disk scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    pub workspace: ConvexPolygon,
    pub density: DensityField,
    pub agent_count: usize,
    pub initial_positions: InitialPositions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<InitialControls>,
    pub controller: ControllerConfig,
    pub t_final: f64,
    #[serde(default = "default_metrics_dt")]
    pub metrics_dt: f64,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    /// Radius of the coverage flag; the timer controller's `nu` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage_nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_metrics_dt() -> f64 {
    0.01
}

/// Fully resolved, validated scenario ready for the engine.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub workspace: ConvexPolygon,
    pub density: DensityField,
    pub quad: QuadratureSpec,
    pub controller: ControllerConfig,
    pub initial_positions: Vec<Point2>,
    pub initial_state: Option<InitialControls>,
    pub t_final: f64,
    pub metrics_dt: f64,
    pub coverage_nu: f64,
}

impl Scenario {
    pub fn agent_count(&self) -> usize {
        self.initial_positions.len()
    }
}

/// Reads, parses and validates a scenario file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ScenarioConfig::from_json(&text)
}

/// Built-in scenario mirroring one of the reference simulations.
pub fn preset(name: &str) -> Result<ScenarioConfig, ConfigError> {
    let gaussian = DensityField::Gaussian {
        center: Point2::new(7.5, 4.5),
        coefficient: 0.03,
    };
    let base = |agent_count: usize, controller: ControllerConfig| ScenarioConfig {
        schema_version: SCHEMA_VERSION,
        name: Some(name.to_string()),
        notes: Some(
            "stand-in heptagon workspace; initial positions rejection-sampled from seed 42".into(),
        ),
        workspace: heptagon(),
        density: gaussian,
        agent_count,
        initial_positions: InitialPositions::Sampled {
            seed: 42,
            margin: 0.1,
            min_separation: 0.1,
        },
        initial_state: None,
        controller,
        t_final: 150.0,
        metrics_dt: 0.01,
        quadrature: QuadratureSpec::default(),
        coverage_nu: None,
        output_dir: None,
    };
    let cfg = match name {
        "validation30" => base(
            30,
            ControllerConfig::Timer(TimerControllerParams {
                k1: 0.525,
                nu: 0.7,
                epsilon: 1e-8,
                eta_tilde_max: 0.4,
                lipschitz: 5.0,
                timers: TimerSchedule::Shared(TimerParams {
                    t1: 0.01,
                    t2: 0.03,
                    reset: ResetPolicy::AlwaysT2,
                }),
            }),
        ),
        "comparison12_lloyd" => ScenarioConfig {
            coverage_nu: Some(0.5),
            ..base(12, ControllerConfig::Lloyd(LloydParams { k2: 1.0, dt: 0.01 }))
        },
        "comparison12_selftrig" => ScenarioConfig {
            coverage_nu: Some(0.5),
            ..base(
                12,
                ControllerConfig::Selftrig(SelfTrigParams {
                    kappa: 1.0,
                    v: 0.35,
                    tau_min: 0.01,
                    tau_max: 0.75,
                    event_policy: EventPolicyConfig::Periodic { period: None },
                    delta: Some(3.0),
                }),
            )
        },
        "comparison12_timer" => base(
            12,
            ControllerConfig::Timer(TimerControllerParams {
                k1: 0.5,
                nu: 0.5,
                epsilon: 1e-8,
                eta_tilde_max: 0.3,
                lipschitz: 5.0,
                timers: TimerSchedule::Shared(TimerParams {
                    t1: 0.2,
                    t2: 0.65,
                    reset: ResetPolicy::AlwaysT2,
                }),
            }),
        ),
        other => return Err(ConfigError::UnknownPreset(other.to_string())),
    };
    Ok(cfg)
}

impl ScenarioConfig {
    /// Parses and validates JSON text.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|err| {
            let field = err.path().to_string();
            let inner = err.into_inner();
            ConfigError::Parse {
                line: inner.line(),
                column: inner.column(),
                field,
                message: inner.to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut text = self.to_json();
        text.push('\n');
        std::fs::write(path, text)
    }

    /// Replaces every seed (positions and timer resets) with `seed`.
    pub fn reseed(&mut self, seed: u64) {
        if let InitialPositions::Sampled { seed: s, .. } = &mut self.initial_positions {
            *s = seed;
        }
        if let ControllerConfig::Timer(params) = &mut self.controller {
            let reseed = |t: &mut TimerParams| {
                if let ResetPolicy::UniformRandom { seed: s } = &mut t.reset {
                    *s = seed;
                }
            };
            match &mut params.timers {
                TimerSchedule::Shared(t) => reseed(t),
                TimerSchedule::PerAgent(v) => v.iter_mut().for_each(reseed),
            }
        }
    }

    /// Collects every violated invariant.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errs = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            errs.push(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.workspace.is_empty() {
            errs.push("workspace must not be empty".into());
        }
        if let Err(e) = self.density.validate() {
            errs.push(format!("density: {e}"));
        }
        if self.agent_count < 2 {
            errs.push(format!("agent_count must be at least 2, got {}", self.agent_count));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            errs.push(format!("t_final must be positive, got {}", self.t_final));
        }
        if !(self.metrics_dt > 0.0 && self.metrics_dt.is_finite()) {
            errs.push(format!("metrics_dt must be positive, got {}", self.metrics_dt));
        }
        if let Err(e) = self.quadrature.validate() {
            errs.push(e);
        }
        if let Some(nu) = self.coverage_nu {
            if !(nu >= 0.0 && nu.is_finite()) {
                errs.push(format!("coverage_nu must be nonnegative, got {nu}"));
            }
        }
        errs.extend(self.controller.validate(self.agent_count));
        match &self.initial_positions {
            InitialPositions::Explicit(points) => {
                if points.len() != self.agent_count {
                    errs.push(format!(
                        "initial_positions lists {} points, expected {}",
                        points.len(),
                        self.agent_count
                    ));
                }
                for (p, &x) in points.iter().enumerate() {
                    if !x.is_finite() || !self.workspace.contains(x, crate::geometry::EPS_GEOM) {
                        errs.push(format!("initial_positions[{p}] lies outside the workspace"));
                    }
                    for (q, &y) in points.iter().enumerate().skip(p + 1) {
                        if x.distance(y) <= crate::geometry::EPS_GEOM {
                            errs.push(format!("initial_positions[{p}] and [{q}] coincide"));
                        }
                    }
                }
            }
            InitialPositions::Sampled {
                margin,
                min_separation,
                ..
            } => {
                if !(*margin >= 0.0 && margin.is_finite()) {
                    errs.push(format!("initial_positions.margin must be nonnegative, got {margin}"));
                }
                if !(*min_separation > 0.0 && min_separation.is_finite()) {
                    errs.push(format!(
                        "initial_positions.min_separation must be positive, got {min_separation}"
                    ));
                }
            }
        }
        if let Some(init) = &self.initial_state {
            if !matches!(self.controller, ControllerConfig::Timer(_)) {
                errs.push("initial_state is only supported for the timer controller".into());
            }
            if init.eta.len() != self.agent_count || init.tau.len() != self.agent_count {
                errs.push(format!(
                    "initial_state must list {} controls and timers",
                    self.agent_count
                ));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Validation(errs))
        }
    }

    /// Validates and resolves sampled positions and defaults.
    pub fn resolve(&self) -> Result<Scenario, ConfigError> {
        self.validate()?;
        let initial_positions = match &self.initial_positions {
            InitialPositions::Explicit(points) => points.clone(),
            InitialPositions::Sampled {
                seed,
                margin,
                min_separation,
            } => sample_positions(&self.workspace, self.agent_count, *seed, *margin, *min_separation)
                .map_err(|e| ConfigError::Validation(vec![e]))?,
        };
        let coverage_nu = match (self.coverage_nu, &self.controller) {
            (Some(nu), _) => nu,
            (None, ControllerConfig::Timer(p)) => p.nu,
            (None, _) => 0.5,
        };
        Ok(Scenario {
            workspace: self.workspace.clone(),
            density: self.density,
            quad: self.quadrature,
            controller: self.controller.clone(),
            initial_positions,
            initial_state: self.initial_state.clone(),
            t_final: self.t_final,
            metrics_dt: self.metrics_dt,
            coverage_nu,
        })
    }
}

/// Uniform rejection sampling of `count` points at least `margin` inside the
/// workspace and `min_separation` apart.
pub fn sample_positions(
    workspace: &ConvexPolygon,
    count: usize,
    seed: u64,
    margin: f64,
    min_separation: f64,
) -> Result<Vec<Point2>, String> {
    let (lo, hi) = workspace
        .bounding_box()
        .ok_or_else(|| "workspace is empty".to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<Point2> = Vec::with_capacity(count);
    let max_attempts = 10_000 * count.max(1);
    let mut attempts = 0;
    while points.len() < count {
        attempts += 1;
        if attempts > max_attempts {
            return Err(format!(
                "could not place {count} agents with margin {margin} and separation {min_separation}"
            ));
        }
        let u: f64 = rng.gen();
        let v: f64 = rng.gen();
        let z = Point2::new(lo.x + (hi.x - lo.x) * u, lo.y + (hi.y - lo.y) * v);
        if workspace.exterior_distance(z) > -margin {
            continue;
        }
        if points.iter().any(|p| p.distance(z) < min_separation) {
            continue;
        }
        points.push(z);
    }
    Ok(points)
}
