use coverage_core::analysis::coverage_report;
use coverage_core::control::{
    timer_controller_jump, tracking_error, ControllerConfig, EventPolicyConfig, LloydParams,
    ResetPolicy, SelfTrigParams, TimerControllerParams, TimerParams, TimerSchedule,
};
use coverage_core::density::{DensityField, QuadratureSpec};
use coverage_core::engine::{run, Engine, EngineError, RunOptions};
use coverage_core::geometry::{ConvexPolygon, Point2, Vec2};
use coverage_core::output::{write_events_csv, write_metrics_csv};
use coverage_core::scenario::{InitialControls, InitialPositions, ScenarioConfig, SCHEMA_VERSION};

fn timer(k1: f64, nu: f64, t1: f64, t2: f64, reset: ResetPolicy) -> ControllerConfig {
    ControllerConfig::Timer(TimerControllerParams {
        k1,
        nu,
        epsilon: 1e-8,
        eta_tilde_max: 0.3 * k1,
        lipschitz: 5.0,
        timers: TimerSchedule::Shared(TimerParams { t1, t2, reset }),
    })
}

/// Two agents mirrored about `x = 1/2` in the unit square with uniform
/// density: each cell is a half square whose centroid never moves.
fn mirrored(x: f64, controller: ControllerConfig, t_final: f64) -> ScenarioConfig {
    ScenarioConfig {
        schema_version: SCHEMA_VERSION,
        name: None,
        notes: None,
        workspace: ConvexPolygon::unit_square(),
        density: DensityField::Uniform,
        agent_count: 2,
        initial_positions: InitialPositions::Explicit(vec![
            Point2::new(x, 0.5),
            Point2::new(1.0 - x, 0.5),
        ]),
        initial_state: None,
        controller,
        t_final,
        metrics_dt: 0.01,
        quadrature: QuadratureSpec::default(),
        coverage_nu: None,
        output_dir: None,
    }
}

fn error_at(trace: &coverage_core::SimulationTrace, t: f64) -> f64 {
    trace
        .samples
        .iter()
        .find(|m| (m.t - t).abs() < 1e-9)
        .expect("grid sample")
        .error_norms[0]
}

#[test]
fn lloyd_matches_forward_euler() {
    let cfg = mirrored(0.1, ControllerConfig::Lloyd(LloydParams { k2: 1.0, dt: 0.01 }), 1.0);
    let trace = run(&cfg.resolve().unwrap()).unwrap();
    assert_eq!(trace.events_per_agent(), vec![100, 100]);
    for (k, t) in [(10, 0.1), (50, 0.5), (100, 1.0)] {
        let want = 0.15 * 0.99f64.powi(k);
        assert!((error_at(&trace, t) - want).abs() < 1e-12, "t={t}");
    }
    let p = trace.final_state.agents[1].position;
    assert!((p.x - (0.75 + 0.15 * 0.99f64.powi(100))).abs() < 1e-12);
    assert_eq!(p.y, 0.5);
}

#[test]
fn timer_sample_and_hold_contracts_geometrically() {
    let cfg = mirrored(0.1, timer(0.5, 0.5, 0.1, 0.1, ResetPolicy::AlwaysT2), 1.0);
    let trace = run(&cfg.resolve().unwrap()).unwrap();
    let factor: f64 = 1.0 - 0.5 * 0.1 / ((1.0 - 1e-8) * 0.5);
    assert_eq!(trace.events_per_agent(), vec![10, 10]);
    assert!((error_at(&trace, 1.0) - 0.15 * factor.powi(10)).abs() < 1e-12);
    // Halfway through a hold the error is the average of its endpoints.
    let mid = 0.15 * factor.powi(3) * (1.0 - 0.5 * (1.0 - factor));
    assert!((error_at(&trace, 0.35) - mid).abs() < 1e-12);
}

#[test]
fn selftrig_follows_exact_saturated_flow() {
    let params = |v: f64| {
        ControllerConfig::Selftrig(SelfTrigParams {
            kappa: 1.0,
            v,
            tau_min: 0.01,
            tau_max: 0.75,
            event_policy: EventPolicyConfig::Periodic { period: Some(0.05) },
            delta: None,
        })
    };
    let trace = run(&mirrored(0.1, params(0.35), 1.0).resolve().unwrap()).unwrap();
    assert!((error_at(&trace, 1.0) - 0.15 * (-1.0f64).exp()).abs() < 1e-12);
    assert_eq!(trace.events_per_agent(), vec![20, 20]);

    // Distance 0.15 > v/kappa = 0.1: cruise for 0.5 s, then exponential.
    let trace = run(&mirrored(0.1, params(0.1), 1.0).resolve().unwrap()).unwrap();
    assert!((error_at(&trace, 0.25) - 0.125).abs() < 1e-12);
    assert!((error_at(&trace, 1.0) - 0.1 * (-0.5f64).exp()).abs() < 1e-12);
    assert!(trace.samples.iter().all(|m| m.control_norms.iter().all(|&u| u <= 0.1 + 1e-15)));
}

#[test]
fn simultaneous_expiries_jump_in_index_order() {
    let cfg = mirrored(0.1, timer(0.5, 0.5, 0.1, 0.1, ResetPolicy::AlwaysT2), 0.35);
    let trace = run(&cfg.resolve().unwrap()).unwrap();
    let at: Vec<_> = trace
        .events
        .iter()
        .filter(|e| (e.t - 0.2).abs() < 1e-12)
        .map(|e| (e.agent, e.j_before))
        .collect();
    assert_eq!(at, vec![(0, 2), (1, 3)]);
    assert_eq!(trace.final_state.j, 6);
}

#[test]
fn jump_order_does_not_matter() {
    let ws = ConvexPolygon::unit_square();
    let config = vec![Point2::new(0.2, 0.3), Point2::new(0.7, 0.4), Point2::new(0.5, 0.8)];
    let quad = QuadratureSpec::default();
    let ControllerConfig::Timer(params) = timer(0.5, 0.5, 0.1, 0.2, ResetPolicy::UniformRandom { seed: 5 })
    else {
        unreachable!()
    };
    let apply = |order: &[usize]| {
        let mut out = vec![(Vec2::ZERO, 0.0); 3];
        for &p in order {
            let mut stream = params.timers.for_agent(p).stream(p);
            let e = tracking_error(p, &config, &ws, &DensityField::Uniform, &quad).unwrap();
            out[p] = timer_controller_jump(e, &params, &mut stream);
        }
        out
    };
    assert_eq!(apply(&[0, 1, 2]), apply(&[2, 1, 0]));
    assert_eq!(apply(&[0, 1, 2]), apply(&[1, 2, 0]));
}

#[test]
fn centroidal_configuration_is_stationary() {
    let cfg = mirrored(0.25, timer(0.5, 0.5, 0.1, 0.2, ResetPolicy::AlwaysT2), 2.0);
    let trace = run(&cfg.resolve().unwrap()).unwrap();
    for (a, b) in trace.final_state.positions().iter().zip(trace.initial_state.positions()) {
        assert!(a.distance(b) < 1e-12);
    }
    assert_eq!(coverage_report(&trace, 1e-12).first_time_covered, Some(0.0));
    let cost = trace.samples[0].cost;
    assert!(trace.samples.iter().all(|m| (m.cost - cost).abs() < 1e-12));
}

#[test]
fn random_resets_stay_in_interval_and_repeat() {
    let cfg = mirrored(0.1, timer(0.5, 0.5, 0.05, 0.2, ResetPolicy::UniformRandom { seed: 9 }), 5.0);
    let s = cfg.resolve().unwrap();
    let a = run(&s).unwrap();
    for p in 0..2 {
        for g in a.inter_event_gaps(p) {
            assert!((0.05 - 1e-12..=0.2 + 1e-12).contains(&g), "gap {g}");
        }
    }
    let gaps0 = a.inter_event_gaps(0);
    let gaps1 = a.inter_event_gaps(1);
    assert_ne!(gaps0, gaps1, "agents draw from separate streams");

    let b = run(&s).unwrap();
    let bytes = |t: &coverage_core::SimulationTrace| {
        let mut ev = Vec::new();
        let mut me = Vec::new();
        write_events_csv(t, &mut ev).unwrap();
        write_metrics_csv(t, &mut me).unwrap();
        (ev, me)
    };
    assert_eq!(bytes(&a), bytes(&b));
}

#[test]
fn jumps_keep_positions_and_zero_the_hold_error() {
    let cfg = mirrored(0.1, timer(0.5, 0.5, 0.05, 0.2, ResetPolicy::UniformRandom { seed: 1 }), 2.0);
    let s = cfg.resolve().unwrap();
    let mut engine = Engine::new(&s);
    let (mut state, _) = engine.initial_state().unwrap();
    while state.t < 2.0 {
        let dt = state.min_timer();
        engine.flow(&mut state, dt).unwrap();
        let before = state.positions();
        let events = engine.jump(&mut state).unwrap();
        assert!(!events.is_empty());
        assert_eq!(state.positions(), before);
        let m = engine.measure(&state, state.t).unwrap();
        for e in events {
            assert_eq!(m.eta_tilde_norms[e.agent], 0.0);
        }
    }
    assert!(matches!(engine.jump(&mut state), Err(EngineError::NotInJumpSet)));
}

#[test]
fn inadmissible_initial_state_is_refused() {
    let mut cfg = mirrored(0.1, timer(0.5, 0.5, 0.1, 0.2, ResetPolicy::AlwaysT2), 1.0);
    cfg.initial_state = Some(InitialControls {
        eta: vec![Vec2::new(2.0, 0.0), Vec2::ZERO],
        tau: vec![0.15, 0.5],
    });
    let s = cfg.resolve().unwrap();
    match run(&s) {
        Err(EngineError::Inadmissible(report)) => {
            let text = report.to_string();
            assert!(text.contains("Phi1: agent 0 control norm 2"), "{text}");
            assert!(text.contains("Phi1: agent 1 timer 0.5"), "{text}");
        }
        other => panic!("expected refusal, got {other:?}"),
    }
    let trace = Engine::new(&s)
        .run(RunOptions { allow_inadmissible: true })
        .unwrap();
    assert_eq!(trace.events[0].t, 0.15);
}

#[test]
fn metrics_grid_covers_horizon() {
    let mut cfg = mirrored(0.1, timer(0.5, 0.5, 0.03, 0.07, ResetPolicy::AlwaysT2), 1.0);
    cfg.metrics_dt = 0.02;
    let trace = run(&cfg.resolve().unwrap()).unwrap();
    assert_eq!(trace.samples.len(), 51);
    for (i, m) in trace.samples.iter().enumerate() {
        assert_eq!(m.t, i as f64 * 0.02);
    }
    assert!(trace.events.iter().all(|e| e.t < 1.0));
    assert_eq!(trace.final_state.t, 1.0);
}
