use adhesion_lab::adhesion::{builtin_profile, AdhesionCurveParams, ProfileSchedule};
use adhesion_lab::plant::{adhesion_torques, step, RigParameters, SimState};
use adhesion_lab::scenario::{
    compare_strategies, run_scenario, simulate, Event, EventAction, Scenario,
};
use adhesion_lab::strategies::StrategyKind;
use adhesion_lab::trace::trace_to_csv;

fn profile(label: &str) -> AdhesionCurveParams {
    builtin_profile(label).unwrap()
}

#[test]
fn constant_slip_holds_set_point_on_p1() {
    let out = run_scenario(&Scenario::single_profile(profile("P1"), StrategyKind::Constant)).unwrap();
    let m = out.metrics.condition("P1").unwrap();
    assert!((m.v_slip_steady - 1.0).abs() <= 0.05, "{}", m.v_slip_steady);
    let end = out.scenario.timeline.metric_end();
    for r in out.trace.rows.iter().filter(|r| r.t > end - 5.0 && r.t < end) {
        assert!((r.v_slip - 1.0).abs() < 0.01);
    }
}

#[test]
fn seventy_second_run_has_70001_rows() {
    let tr = simulate(&Scenario::experiment(StrategyKind::Constant)).unwrap();
    assert_eq!(tr.len(), 70_001);
    assert!(tr.rows.windows(2).all(|w| w[1].t > w[0].t));
    let csv = trace_to_csv(&tr.rows);
    assert_eq!(csv.lines().count(), 70_002);
}

#[test]
fn constant_slip_is_below_wet_peak() {
    let out = run_scenario(&Scenario::experiment(StrategyKind::Constant)).unwrap();
    let wet = out.metrics.condition("wet").unwrap();
    assert!(wet.mu_steady < wet.mu_peak);
}

#[test]
fn tracking_beats_constant_on_every_condition() {
    let cmp = compare_strategies(&Scenario::experiment(StrategyKind::Constant), &StrategyKind::ALL)
        .unwrap();
    let base = cmp.get(StrategyKind::Constant).unwrap();
    for r in cmp.runs.iter().filter(|r| r.scenario.strategy.is_tracking()) {
        for (c, b) in r.metrics.conditions.iter().zip(&base.metrics.conditions) {
            assert!(c.peak_utilization >= b.peak_utilization, "{} {}", r.scenario.strategy, c.label);
            assert!(c.peak_utilization <= 1.01);
        }
    }
}

#[test]
fn swarm_ripple_not_above_fuzzy() {
    let cmp = compare_strategies(
        &Scenario::experiment(StrategyKind::Flc),
        &[StrategyKind::Flc, StrategyKind::Pso],
    )
    .unwrap();
    for label in ["dry", "wet"] {
        let r = cmp
            .ratio(StrategyKind::Pso, StrategyKind::Flc, label, |m| m.torque_ripple)
            .unwrap();
        assert!(r <= 1.02, "{label}: {r}");
    }
}

#[test]
fn comparison_is_repeatable() {
    let base = Scenario::simulation(StrategyKind::Pso);
    let a = compare_strategies(&base, &StrategyKind::ALL).unwrap();
    let b = compare_strategies(&base, &StrategyKind::ALL).unwrap();
    assert_eq!(a.metrics_csv(), b.metrics_csv());
    for (x, y) in a.runs.iter().zip(&b.runs) {
        assert_eq!(trace_to_csv(&x.trace.rows), trace_to_csv(&y.trace.rows));
    }
}

#[test]
fn all_strategies_stay_finite_on_both_presets() {
    for k in StrategyKind::ALL {
        run_scenario(&Scenario::experiment(k)).unwrap();
        run_scenario(&Scenario::simulation(k)).unwrap();
    }
}

#[test]
fn contact_forces_balance() {
    let rig = RigParameters::default();
    for m in [-0.4, 0.0, 0.13, 0.6] {
        let (load_w, drive_r) = adhesion_torques(m, &rig);
        let f_w = load_w * rig.rg_w / rig.r_w;
        let f_r = drive_r * rig.rg_r / rig.r_r;
        assert!((f_w - f_r).abs() < 1e-9);
        assert!((f_w - m * rig.f_n).abs() < 1e-9);
    }
}

#[test]
fn energy_balance_closes() {
    let out = run_scenario(&Scenario::experiment(StrategyKind::Flc)).unwrap();
    let s = out.trace.final_state;
    let rig = &out.scenario.rig;
    let omega_r0 = rig.roller_motor_speed_from_rpm(out.scenario.timeline.roller_rpm);
    let v0 = rig.roller_surface_speed(omega_r0);
    let start = SimState::rolling(v0 * rig.rg_w / rig.r_w, omega_r0, &profile("dry"), rig);
    let dk = s.kinetic_energy(rig) - start.kinetic_energy(rig);
    let e = s.energy;
    let residual = e.input - dk - e.friction - e.slip;
    assert!(residual.abs() <= 0.005 * e.input.abs(), "{residual} of {}", e.input);
}

/// Contact with a constant adhesion coefficient while slip stays positive.
fn flat_contact() -> AdhesionCurveParams {
    AdhesionCurveParams::new(0.3, 1e6, 0.0, "flat")
}

fn run_open_loop(tw: f64, tr: f64) -> SimState {
    let rig = RigParameters::default();
    let p = flat_contact();
    let mut s = SimState::rolling(400.0, 80.0, &p, &rig);
    for _ in 0..200 {
        s = step(&s, tw, tr, &p, &rig, 1e-4).unwrap();
    }
    s
}

#[test]
fn plant_is_linear_at_constant_adhesion() {
    let z = run_open_loop(0.0, 0.0);
    let a = run_open_loop(3.0, 0.0);
    let b = run_open_loop(0.0, -2.0);
    let ab = run_open_loop(3.0, -2.0);
    for (x, y, xy, z) in [
        (a.omega_mw, b.omega_mw, ab.omega_mw, z.omega_mw),
        (a.omega_mr, b.omega_mr, ab.omega_mr, z.omega_mr),
    ] {
        let sum = (x - z) + (y - z);
        assert!(((xy - z) - sum).abs() <= 1e-6 * sum.abs().max(1e-3));
    }
    assert!(ab.v_slip > 0.0);
}

#[test]
fn halving_plant_step_keeps_trajectory() {
    let s = Scenario::experiment(StrategyKind::Constant);
    let mut h = s.clone();
    h.timing.dt_plant /= 2.0;
    let a = simulate(&s).unwrap();
    let b = simulate(&h).unwrap();
    for (x, y) in a.rows.iter().zip(&b.rows) {
        for (p, q) in [(x.omega_w, y.omega_w), (x.omega_r, y.omega_r)] {
            assert!((p - q).abs() <= 1e-3 * p.abs().max(1.0), "t={} {p} {q}", x.t);
        }
    }
}

#[test]
fn fixed_reference_is_tracked() {
    let mut s = Scenario::single_profile(profile("P2"), StrategyKind::Constant);
    s.strategies.constant.v_slip_set = 0.5;
    let out = run_scenario(&s).unwrap();
    let end = s.timeline.metric_end();
    for r in out.trace.rows.iter().filter(|r| r.t > end - 5.0 && r.t < end) {
        assert!((r.v_slip - 0.5).abs() < 0.01, "{}", r.v_slip);
    }
}

#[test]
fn fuzzy_beats_gradient_on_p1() {
    let cmp = compare_strategies(
        &Scenario::single_profile(profile("P1"), StrategyKind::Flc),
        &[StrategyKind::Flc, StrategyKind::Sg],
    )
    .unwrap();
    let flc = cmp.get(StrategyKind::Flc).unwrap().metrics.condition("P1").unwrap();
    let sg = cmp.get(StrategyKind::Sg).unwrap().metrics.condition("P1").unwrap();
    assert!(flc.search_time_or_inf() < sg.search_time_or_inf());
}

#[test]
fn no_excitation_never_arms() {
    let mut s = Scenario::experiment(StrategyKind::Pso);
    s.timeline.torque_final = 0.0;
    s.schedule = ProfileSchedule::constant(profile("dry"));
    s.timeline.events = vec![
        Event {
            time: 1.0,
            action: EventAction::TorqueOn,
        },
        Event {
            time: 4.0,
            action: EventAction::End,
        },
    ];
    let out = run_scenario(&s).unwrap();
    assert!(out.trace.activations.is_empty());
    assert!(out.metrics.conditions[0].search_time.is_none());
}
