use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn coverage(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coverage"))
        .args(args)
        .output()
        .expect("spawn coverage")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_short(out: &Path) -> Output {
    coverage(&[
        "run",
        "--preset",
        "comparison12_timer",
        "--t-final",
        "2",
        "--out",
        out.to_str().unwrap(),
    ])
}

const BAD: &str = r#"{
  "schema_version": 1,
  "workspace": [[0, 0], [1, 0], [1, 1], [0, 1]],
  "density": {"kind": "uniform"},
  "agent_count": 2,
  "initial_positions": [[0.2, 0.5], [0.2, 0.5]],
  "controller": {"kind": "lloyd", "k2": 1.0, "dt": 0.01},
  "t_final": -1
}"#;

const INADMISSIBLE: &str = r#"{
  "schema_version": 1,
  "workspace": [[0, 0], [1, 0], [1, 1], [0, 1]],
  "density": {"kind": "uniform"},
  "agent_count": 2,
  "initial_positions": [[0.1, 0.5], [0.9, 0.5]],
  "initial_state": {"eta": [[2, 0], [0, 0]], "tau": [0.02, 0.02]},
  "controller": {
    "kind": "timer", "k1": 0.5, "nu": 0.5, "epsilon": 1e-8, "eta_tilde_max": 0.15,
    "lipschitz": 5,
    "timers": {"t1": 0.01, "t2": 0.03, "reset": {"policy": "always_t2"}}
  },
  "t_final": 1
}"#;

#[test]
fn run_writes_outputs() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("timer");
    let o = run_short(&out);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("controller      timer"));

    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert!(lines.next().unwrap().starts_with("t,e_norm_0,"));
    assert_eq!(lines.count(), 201);
    let events = fs::read_to_string(out.join("events.csv")).unwrap();
    assert_eq!(events.lines().next(), Some("t,j,agent,e_x,e_y,eta_x,eta_y,tau_new"));

    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["versions"]["schema_version"], 1);
    assert_eq!(meta["config"]["t_final"], 2.0);
    assert_eq!(meta["bounds"]["t2_satisfies_bound"], false);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run_short(&a).status.success());
    assert!(run_short(&b).status.success());
    for f in ["events.csv", "metrics.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn bounds_for_validation_preset() {
    let o = coverage(&["bounds", "--preset", "validation30", "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let bound = v["max_dwell_time"].as_f64().unwrap();
    assert!((bound - 0.035_787_656_920_961_48).abs() < 1e-12);
    assert_eq!(v["t2_satisfies_bound"], true);
}

#[test]
fn validate_lists_every_problem() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("bad.json");
    fs::write(&path, BAD).unwrap();
    let o = coverage(&["validate", "--config", path.to_str().unwrap()]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("t_final must be positive"), "{err}");
    assert!(err.contains("coincide"), "{err}");
}

#[test]
fn parse_errors_name_the_field() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("typo.json");
    fs::write(&path, BAD.replace("\"k2\"", "\"k3\"")).unwrap();
    let o = coverage(&["validate", "--config", path.to_str().unwrap()]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("line 7") && err.contains("controller"), "{err}");
}

#[test]
fn dwell_violation_fails_only_when_strict() {
    let o = coverage(&["validate", "--preset", "comparison12_timer"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("exceeds"));
    let o = coverage(&["validate", "--preset", "comparison12_timer", "--strict"]);
    assert!(!o.status.success());
}

#[test]
fn inadmissible_start_writes_nothing() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("inadmissible.json");
    fs::write(&path, INADMISSIBLE).unwrap();
    let out = tmp.path().join("out");
    let o = coverage(&["run", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("control norm 2"), "{}", stderr(&o));
    assert!(!out.exists());

    let o = coverage(&[
        "run",
        "--config",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--allow-inadmissible",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("events.csv").exists());
}

#[test]
fn failed_write_removes_partial_files() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    // A directory where metrics.csv should go makes the second file fail.
    fs::create_dir_all(out.join("metrics.csv")).unwrap();
    let o = run_short(&out);
    assert!(!o.status.success());
    assert!(!out.join("events.csv").exists());
    assert!(!out.join("meta.json").exists());
}

#[test]
fn compare_writes_table() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("cmp");
    let o = coverage(&["compare", "--t-final", "1", "--out", out.to_str().unwrap(), "--svg"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["comparison12_lloyd", "comparison12_selftrig", "comparison12_timer"] {
        assert!(out.join(name).join("metrics.csv").exists(), "{name}");
        assert!(stdout(&o).contains(name));
    }
    let table: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("comparison.json")).unwrap()).unwrap();
    assert_eq!(table["rows"].as_array().unwrap().len(), 3);
    assert!(out.join("comparison.txt").exists());
    assert!(out.join("counts.svg").exists());
}

#[test]
fn unknown_preset_is_an_error() {
    let o = coverage(&["run", "--preset", "nope"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("nope"));
}
