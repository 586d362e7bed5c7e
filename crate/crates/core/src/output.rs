//! Persistence of a run: `events.csv`, `metrics.csv`, `meta.json` and optional
//! SVG plots.
//!
//! Floats are written with Rust's shortest round-trip formatting, so values
//! read back bit-identically. Line endings are LF.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::control::{max_dwell_time, max_gain, ControllerConfig, ResetPolicy, TimerSchedule};
use crate::engine::SimulationTrace;
use crate::geometry::Point2;
use crate::scenario::{InitialPositions, Scenario, ScenarioConfig, SCHEMA_VERSION};

pub mod svg;

pub fn write_events_csv<W: Write>(trace: &SimulationTrace, w: W) -> io::Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "t,j,agent,e_x,e_y,eta_x,eta_y,tau_new")?;
    for e in &trace.events {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            e.t, e.j_before, e.agent, e.e_sample.x, e.e_sample.y, e.eta_new.x, e.eta_new.y, e.tau_new
        )?;
    }
    w.flush()
}

/// One row per metric sample: time, error norms, sample-and-hold error
/// norms, cost and the two region flags as 0/1.
pub fn write_metrics_csv<W: Write>(trace: &SimulationTrace, w: W) -> io::Result<()> {
    let mut w = BufWriter::new(w);
    let n = trace.agent_count;
    let mut header = String::from("t");
    for p in 0..n {
        header.push_str(&format!(",e_norm_{p}"));
    }
    for p in 0..n {
        header.push_str(&format!(",eta_tilde_norm_{p}"));
    }
    header.push_str(",V,covered,in_u");
    writeln!(w, "{header}")?;
    for m in &trace.samples {
        write!(w, "{}", m.t)?;
        for v in m.error_norms.iter().chain(&m.eta_tilde_norms) {
            write!(w, ",{v}")?;
        }
        writeln!(w, ",{},{},{}", m.cost, u8::from(m.covered), u8::from(m.in_u))?;
    }
    w.flush()
}

/// Design quantities of the timer controller, `None` for other controllers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivedBounds {
    pub max_dwell_time: Option<f64>,
    /// Largest configured T2 across agents.
    pub t2: Option<f64>,
    pub t2_satisfies_bound: Option<bool>,
    /// Largest gain compatible with the configured T2.
    pub max_gain: Option<f64>,
    pub u_threshold: Option<f64>,
}

pub fn derived_bounds(controller: &ControllerConfig, agent_count: usize) -> DerivedBounds {
    match controller {
        ControllerConfig::Timer(params) => {
            let bound = max_dwell_time(params, agent_count);
            let t2 = params
                .timers
                .all(agent_count)
                .iter()
                .map(|t| t.t2)
                .fold(f64::NEG_INFINITY, f64::max);
            DerivedBounds {
                max_dwell_time: Some(bound),
                t2: Some(t2),
                t2_satisfies_bound: Some(t2 <= bound),
                max_gain: Some(max_gain(params, t2, agent_count)),
                u_threshold: Some(params.u_threshold()),
            }
        }
        _ => DerivedBounds {
            max_dwell_time: None,
            t2: None,
            t2_satisfies_bound: None,
            max_gain: None,
            u_threshold: None,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Seeds {
    pub initial_positions: Option<u64>,
    pub timer_resets: Vec<u64>,
}

fn seeds(config: &ScenarioConfig) -> Seeds {
    let initial_positions = match config.initial_positions {
        InitialPositions::Sampled { seed, .. } => Some(seed),
        InitialPositions::Explicit(_) => None,
    };
    let mut timer_resets = Vec::new();
    if let ControllerConfig::Timer(p) = &config.controller {
        let list = match &p.timers {
            TimerSchedule::Shared(t) => vec![*t],
            TimerSchedule::PerAgent(v) => v.clone(),
        };
        for t in list {
            if let ResetPolicy::UniformRandom { seed } = t.reset {
                if !timer_resets.contains(&seed) {
                    timer_resets.push(seed);
                }
            }
        }
    }
    Seeds {
        initial_positions,
        timer_resets,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Versions {
    pub crate_version: &'static str,
    pub schema_version: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Meta<'a> {
    pub config: &'a ScenarioConfig,
    pub resolved_initial_positions: &'a [Point2],
    pub coverage_nu: f64,
    pub bounds: DerivedBounds,
    pub seeds: Seeds,
    pub versions: Versions,
    pub event_count: usize,
    pub events_per_agent: Vec<usize>,
    pub sample_count: usize,
}

pub fn meta<'a>(config: &'a ScenarioConfig, scenario: &'a Scenario, trace: &SimulationTrace) -> Meta<'a> {
    Meta {
        config,
        resolved_initial_positions: &scenario.initial_positions,
        coverage_nu: scenario.coverage_nu,
        bounds: derived_bounds(&scenario.controller, scenario.agent_count()),
        seeds: seeds(config),
        versions: Versions {
            crate_version: env!("CARGO_PKG_VERSION"),
            schema_version: SCHEMA_VERSION,
        },
        event_count: trace.events.len(),
        events_per_agent: trace.events_per_agent(),
        sample_count: trace.samples.len(),
    }
}

/// Writes every artifact of a run into `dir`, creating it if needed. On
/// failure the files written so far are removed, as is `dir` if this call
/// created it.
pub fn write_run(
    dir: &Path,
    config: &ScenarioConfig,
    scenario: &Scenario,
    trace: &SimulationTrace,
    with_svg: bool,
) -> io::Result<Vec<PathBuf>> {
    let created_dir = !dir.exists();
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let result = write_all(dir, config, scenario, trace, with_svg, &mut written);
    if result.is_err() {
        remove_partial(dir, created_dir, &written);
    }
    result.map(|()| written)
}

/// Removes `files`, then `dir` too when `remove_dir` is set and it is empty.
pub fn remove_partial(dir: &Path, remove_dir: bool, files: &[PathBuf]) {
    for f in files {
        let _ = fs::remove_file(f);
    }
    if remove_dir {
        let _ = fs::remove_dir(dir);
    }
}

fn write_all(
    dir: &Path,
    config: &ScenarioConfig,
    scenario: &Scenario,
    trace: &SimulationTrace,
    with_svg: bool,
    written: &mut Vec<PathBuf>,
) -> io::Result<()> {
    let mut create = |name: &str| -> io::Result<fs::File> {
        let path = dir.join(name);
        let file = fs::File::create(&path)?;
        written.push(path);
        Ok(file)
    };
    write_events_csv(trace, create("events.csv")?)?;
    write_metrics_csv(trace, create("metrics.csv")?)?;
    let mut json = serde_json::to_string_pretty(&meta(config, scenario, trace)).map_err(io::Error::other)?;
    json.push('\n');
    create("meta.json")?.write_all(json.as_bytes())?;
    if with_svg {
        for (name, doc) in [
            ("errors.svg", svg::error_plot(trace)),
            ("cost.svg", svg::cost_plot(trace)),
            ("timers.svg", svg::timer_plot(trace)),
            ("counts.svg", svg::count_plot(&[(trace.controller.clone(), trace)])),
        ] {
            create(name)?.write_all(doc.as_bytes())?;
        }
    }
    Ok(())
}
