//! End-to-end test runs: timeline, plant, observer, slip loop and strategy
//! stepped together, with a 1 kHz trace.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adhesion::{builtin_profile, AdhesionCurveParams, ProfileSchedule, ScheduleSegment};
use crate::error::{Error, NonFiniteState, Result, ValidationError};
use crate::estimation::{estimate_mu, LoadObserver, ObserverConfig};
use crate::metrics::{compute_metrics, RunMetrics};
use crate::plant::{
    self, slip_velocity, RigParameters, RollerSpeedLoop, SensorConfig, SimState, SpeedSensor,
};
use crate::slip_control::{arbitrate_torque, SlipControlConfig, SlipControlState};
use crate::trace::format_sig6;
use crate::strategies::{
    StrategyConfig, StrategyDebug, StrategyInputs, StrategyKind, WheelSpeedIntegrator,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventAction {
    TorqueOn,
    WetOn,
    TorqueOff,
    End,
}

impl FromStr for EventAction {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "torque_on" => Ok(EventAction::TorqueOn),
            "wet_on" => Ok(EventAction::WetOn),
            "torque_off" => Ok(EventAction::TorqueOff),
            "end" => Ok(EventAction::End),
            other => Err(format!("unknown event `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Event {
    pub time: f64,
    pub action: EventAction,
}

/// Driver-side timeline of a test run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timeline {
    /// Roller wheel speed held by the roller drive, rpm.
    pub roller_rpm: f64,
    /// Final wheel torque command, N m.
    pub torque_final: f64,
    /// Command ramp rate after torque-on, N m/s.
    pub torque_gradient: f64,
    pub events: Vec<Event>,
}

impl Timeline {
    pub fn event_time(&self, action: EventAction) -> Option<f64> {
        self.events
            .iter()
            .find(|e| e.action == action)
            .map(|e| e.time)
    }

    pub fn end_time(&self) -> f64 {
        self.event_time(EventAction::End).unwrap_or(0.0)
    }

    /// End of the window metrics may look at: torque-off, or the end.
    pub fn metric_end(&self) -> f64 {
        self.event_time(EventAction::TorqueOff)
            .unwrap_or_else(|| self.end_time())
    }

    /// Driver torque request at time `t`.
    pub fn torque_command(&self, t: f64) -> f64 {
        let on = match self.event_time(EventAction::TorqueOn) {
            Some(on) if t >= on => on,
            _ => return 0.0,
        };
        if let Some(off) = self.event_time(EventAction::TorqueOff) {
            if t >= off {
                return 0.0;
            }
        }
        (self.torque_gradient * (t - on)).min(self.torque_final)
    }

    pub fn validate(&self) -> std::result::Result<(), ValidationError> {
        let mut e = ValidationError::default();
        if !(self.roller_rpm.is_finite() && self.roller_rpm >= 0.0) {
            e.push("Timeline.roller_rpm", "must be >= 0");
        }
        if !(self.torque_final.is_finite() && self.torque_final >= 0.0) {
            e.push("Timeline.torque_final", "must be >= 0");
        }
        if !(self.torque_gradient.is_finite() && self.torque_gradient > 0.0) {
            e.push("Timeline.torque_gradient", "must be > 0");
        }
        for (i, w) in self.events.windows(2).enumerate() {
            if !(w[1].time > w[0].time) {
                e.push(
                    format!("Timeline.events[{}].time", i + 1),
                    "event times must be strictly increasing",
                );
            }
        }
        if self.events.iter().any(|ev| !(ev.time.is_finite() && ev.time >= 0.0)) {
            e.push("Timeline.events", "event times must be finite and >= 0");
        }
        for action in [EventAction::TorqueOn, EventAction::WetOn, EventAction::TorqueOff] {
            if self.events.iter().filter(|ev| ev.action == action).count() > 1 {
                e.push("Timeline.events", format!("{action:?} may appear at most once"));
            }
        }
        match self.events.last() {
            Some(ev) if ev.action == EventAction::End => {}
            _ => e.push("Timeline.events", "the last event must be `end`"),
        }
        if self.events.iter().filter(|ev| ev.action == EventAction::End).count() > 1 {
            e.push("Timeline.events", "only one `end` event is allowed");
        }
        e.into_result()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimingConfig {
    /// Plant integration step, s.
    pub dt_plant: f64,
    /// Controller and trace period, s.
    pub dt_ctrl: f64,
    /// Closed-loop bandwidth of the roller speed drive, rad/s.
    pub roller_bandwidth: f64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            dt_plant: 1e-4,
            dt_ctrl: 1e-3,
            roller_bandwidth: 20.0,
        }
    }
}

impl TimingConfig {
    pub fn plant_substeps(&self) -> usize {
        (self.dt_ctrl / self.dt_plant).round() as usize
    }

    pub fn validate(&self, rig: &RigParameters) -> std::result::Result<(), ValidationError> {
        let mut e = ValidationError::default();
        if !(self.dt_plant > 0.0 && self.dt_plant.is_finite()) {
            e.push("TimingConfig.dt_plant", "must be > 0");
        } else if self.dt_plant > rig.tau_drive / 5.0 + 1e-15 {
            e.push(
                "TimingConfig.dt_plant",
                "must not exceed a fifth of the drive time constant",
            );
        }
        if !(self.dt_ctrl > 0.0 && self.dt_ctrl.is_finite()) {
            e.push("TimingConfig.dt_ctrl", "must be > 0");
        }
        if e.is_empty() {
            let n = self.dt_ctrl / self.dt_plant;
            if n < 1.0 - 1e-9 || (n - n.round()).abs() > 1e-6 {
                e.push(
                    "TimingConfig.dt_ctrl",
                    "must be an integer multiple of dt_plant",
                );
            }
        }
        if !(self.roller_bandwidth > 0.0 && self.roller_bandwidth.is_finite()) {
            e.push("TimingConfig.roller_bandwidth", "must be > 0");
        }
        e.into_result()
    }
}

/// A named stretch of the run with one target adhesion profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub label: String,
    pub start: f64,
    pub end: f64,
    pub params: AdhesionCurveParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub timeline: Timeline,
    pub schedule: ProfileSchedule,
    pub rig: RigParameters,
    pub timing: TimingConfig,
    pub sensor: SensorConfig,
    pub observer: ObserverConfig,
    pub slip_control: SlipControlConfig,
    pub strategy: StrategyKind,
    pub strategies: StrategyConfig,
    pub seed: u64,
}

fn builtin(label: &str) -> AdhesionCurveParams {
    builtin_profile(label).expect("built-in profile")
}

impl Scenario {
    /// Dry start, water from 35 s with a 3 s blend, torque off at 65 s.
    pub fn experiment(strategy: StrategyKind) -> Self {
        let schedule = ProfileSchedule::new(
            vec![
                ScheduleSegment {
                    start_time: 0.0,
                    params: builtin("dry"),
                },
                ScheduleSegment {
                    start_time: 35.0,
                    params: builtin("wet"),
                },
            ],
            3.0,
        )
        .expect("valid built-in schedule");
        Self {
            name: "experiment".into(),
            timeline: Timeline {
                roller_rpm: 60.0,
                torque_final: 10.0,
                torque_gradient: 5.0,
                events: vec![
                    Event {
                        time: 5.0,
                        action: EventAction::TorqueOn,
                    },
                    Event {
                        time: 35.0,
                        action: EventAction::WetOn,
                    },
                    Event {
                        time: 65.0,
                        action: EventAction::TorqueOff,
                    },
                    Event {
                        time: 70.0,
                        action: EventAction::End,
                    },
                ],
            },
            schedule,
            rig: RigParameters {
                f_n: 400.0,
                ..RigParameters::default()
            },
            timing: TimingConfig::default(),
            sensor: SensorConfig::default(),
            observer: ObserverConfig::default(),
            slip_control: SlipControlConfig::default(),
            strategy,
            strategies: StrategyConfig::default(),
            seed: 0,
        }
    }

    /// P1, then P2 from 7 s, then P3 from 11 s, switched instantly.
    pub fn simulation(strategy: StrategyKind) -> Self {
        let schedule = ProfileSchedule::new(
            vec![
                ScheduleSegment {
                    start_time: 0.0,
                    params: builtin("P1"),
                },
                ScheduleSegment {
                    start_time: 7.0,
                    params: builtin("P2"),
                },
                ScheduleSegment {
                    start_time: 11.0,
                    params: builtin("P3"),
                },
            ],
            0.0,
        )
        .expect("valid built-in schedule");
        Self {
            name: "simulation".into(),
            timeline: Timeline {
                roller_rpm: 60.0,
                torque_final: 10.0,
                torque_gradient: 5.0,
                events: vec![
                    Event {
                        time: 1.0,
                        action: EventAction::TorqueOn,
                    },
                    Event {
                        time: 16.0,
                        action: EventAction::End,
                    },
                ],
            },
            schedule,
            rig: RigParameters {
                f_n: 1000.0 / 3.0,
                ..RigParameters::default()
            },
            timing: TimingConfig::default(),
            sensor: SensorConfig::default(),
            observer: ObserverConfig::default(),
            slip_control: SlipControlConfig::default(),
            strategy,
            strategies: StrategyConfig::default(),
            seed: 0,
        }
    }

    /// Simulation timeline on one constant profile.
    pub fn single_profile(params: AdhesionCurveParams, strategy: StrategyKind) -> Self {
        let mut s = Self::simulation(strategy);
        s.name = format!("single-{}", params.label);
        s.schedule = ProfileSchedule::constant(params);
        s
    }

    pub fn with_strategy(mut self, strategy: StrategyKind) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn validate(&self) -> std::result::Result<(), ValidationError> {
        let mut e = ValidationError::default();
        for r in [
            self.timeline.validate(),
            self.rig.validate(),
            self.timing.validate(&self.rig),
            self.sensor.validate(),
            self.observer.validate(),
            self.slip_control.validate(),
            self.strategies.validate(),
        ] {
            if let Err(v) = r {
                e.extend(v);
            }
        }
        if let Some(wet) = self.timeline.event_time(EventAction::WetOn) {
            if !self
                .schedule
                .segments()
                .iter()
                .any(|s| (s.start_time - wet).abs() < 1e-9)
            {
                e.push(
                    "Timeline.events",
                    "wet_on must coincide with the start of a profile segment",
                );
            }
        }
        e.into_result()
    }

    /// Metric windows, one per profile segment, clipped to torque-off.
    pub fn conditions(&self) -> Vec<Condition> {
        let end = self.timeline.metric_end();
        let segs = self.schedule.segments();
        segs.iter()
            .enumerate()
            .filter_map(|(i, s)| {
                let seg_end = segs.get(i + 1).map_or(end, |n| n.start_time).min(end);
                (seg_end > s.start_time).then(|| Condition {
                    label: s.params.label.clone(),
                    start: s.start_time,
                    end: seg_end,
                    params: s.params.clone(),
                })
            })
            .collect()
    }
}

/// One 1 kHz trace sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TraceRow {
    pub t: f64,
    pub te_cmd: f64,
    pub te_limited: f64,
    pub te_hat: f64,
    pub omega_w: f64,
    pub omega_r: f64,
    pub v_slip_ref: f64,
    pub v_slip: f64,
    pub mu_hat: f64,
    pub mu_actual: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
    /// Times at which the slip loop armed.
    pub activations: Vec<f64>,
    /// Times at which the slip loop released.
    pub releases: Vec<f64>,
    pub final_debug: StrategyDebug,
    pub final_state: SimState,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// First activation at or after `t`.
    pub fn activation_after(&self, t: f64) -> Option<f64> {
        self.activations.iter().copied().find(|&a| a >= t)
    }

    /// Whether the slip loop was armed at time `t`.
    pub fn active_at(&self, t: f64) -> bool {
        let last_on = self.activations.iter().rev().find(|&&a| a <= t);
        let last_off = self.releases.iter().rev().find(|&&r| r <= t);
        match (last_on, last_off) {
            (Some(on), Some(off)) => on > off,
            (Some(_), None) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub scenario: Scenario,
    pub trace: Trace,
    pub metrics: RunMetrics,
}

/// Simulate only; no metrics.
pub fn simulate(s: &Scenario) -> Result<Trace> {
    s.validate()?;
    let rig = &s.rig;
    let dt_ctrl = s.timing.dt_ctrl;
    let dt_plant = s.timing.dt_ctrl / s.timing.plant_substeps() as f64;
    let substeps = s.timing.plant_substeps();
    let ticks = (s.timeline.end_time() / dt_ctrl).round() as usize;

    let omega_mr0 = rig.roller_motor_speed_from_rpm(s.timeline.roller_rpm);
    let v_r0 = rig.roller_surface_speed(omega_mr0);
    let omega_mw0 = v_r0 * rig.rg_w / rig.r_w;
    let mut state = SimState::rolling(omega_mw0, omega_mr0, &s.schedule.params_at(0.0), rig);
    state.te_w = rig.beta_w * omega_mw0;
    state.te_r = rig.beta_r * omega_mr0;

    let mut roller = RollerSpeedLoop::new(omega_mr0, s.timing.roller_bandwidth, rig);
    let mut sensor = SpeedSensor::new(s.sensor.clone(), s.seed);
    let mut observer = LoadObserver::new(&s.observer);
    let mut slip = SlipControlState::new(s.slip_control.clone());
    let mut strategy = s.strategies.build(s.strategy, s.seed);
    let mut wheel_ref = WheelSpeedIntegrator::new(0.0);
    let v_slip_max = s.strategies.v_slip_max;

    let mut trace = Trace {
        rows: Vec::with_capacity(ticks + 1),
        ..Trace::default()
    };
    let mut te_limited_prev = 0.0;
    let mut debug = StrategyDebug::None;

    for k in 0..=ticks {
        let t = k as f64 * dt_ctrl;
        let te_cmd = s.timeline.torque_command(t);
        let (w_meas, r_meas) = sensor.measure(&state);
        let v_slip = slip_velocity(w_meas, r_meas, rig);
        let v_r = rig.roller_surface_speed(r_meas);
        let te_hat = state.te_w;
        let t_load = observer.estimate_load_torque(te_hat, w_meas, rig, dt_ctrl);
        let mu_hat = estimate_mu(t_load, rig);

        let inputs = StrategyInputs {
            te_hat,
            v_slip,
            v_r,
            mu_hat,
            t,
            dt_ctrl,
        };
        slip.set_ceiling(te_cmd);
        let was_active = slip.active;
        let active = slip.detect_slip(v_slip, t);
        if active && !was_active {
            trace.activations.push(t);
            slip.preload(te_limited_prev);
            strategy.reset(&inputs);
            wheel_ref = WheelSpeedIntegrator::new(v_slip + v_r);
        } else if was_active && !active {
            trace.releases.push(t);
        }

        let (te_limited, v_slip_ref) = if active {
            let d = strategy.update(&inputs);
            debug = d.debug;
            let v_ref = match (d.v_slip_ref, d.wheel_accel_ref) {
                (Some(v), _) => v,
                (None, Some(a)) => wheel_ref.advance(a, v_r, dt_ctrl, v_slip_max),
                (None, None) => v_slip,
            };
            let t_slip = slip.pi_slip_controller(v_ref, v_slip, dt_ctrl);
            (arbitrate_torque(te_cmd, t_slip, true), v_ref)
        } else {
            (te_cmd, 0.0)
        };
        te_limited_prev = te_limited;

        trace.rows.push(TraceRow {
            t,
            te_cmd,
            te_limited,
            te_hat,
            omega_w: state.omega_mw,
            omega_r: state.omega_mr,
            v_slip_ref,
            v_slip: state.v_slip,
            mu_hat,
            mu_actual: state.mu_actual,
        });
        if k == ticks {
            break;
        }

        for _ in 0..substeps {
            let te_r_cmd = roller.update(state.omega_mr, dt_plant);
            let params = s.schedule.params_at(state.t);
            state = plant::step(&state, te_limited, te_r_cmd, &params, rig, dt_plant)
                .map_err(|e: NonFiniteState| Error::Numeric(e))?;
        }
        // Keep the clock on the controller grid.
        state.t = (k + 1) as f64 * dt_ctrl;
    }
    trace.final_debug = debug;
    trace.final_state = state;
    Ok(trace)
}

/// Simulate and score one scenario.
pub fn run_scenario(s: &Scenario) -> Result<RunOutput> {
    let trace = simulate(s)?;
    let metrics = compute_metrics(&trace, &s.conditions());
    Ok(RunOutput {
        scenario: s.clone(),
        trace,
        metrics,
    })
}

/// Per-strategy results plus the ratios the comparison is judged on.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub runs: Vec<RunOutput>,
}

impl Comparison {
    pub fn get(&self, kind: StrategyKind) -> Option<&RunOutput> {
        self.runs.iter().find(|r| r.scenario.strategy == kind)
    }

    /// `metric(a) / metric(b)` for one condition; `None` when either side
    /// is missing.
    pub fn ratio(
        &self,
        a: StrategyKind,
        b: StrategyKind,
        condition: &str,
        metric: impl Fn(&crate::metrics::ConditionMetrics) -> f64,
    ) -> Option<f64> {
        let ma = self.get(a)?.metrics.condition(condition)?;
        let mb = self.get(b)?.metrics.condition(condition)?;
        Some(metric(ma) / metric(mb))
    }

    /// One row per strategy and condition.
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from(
            "strategy,condition,search_time,torque_ripple,mu_steady,v_slip_steady,peak_utilization,slip_rms_error\n",
        );
        for r in &self.runs {
            for c in &r.metrics.conditions {
                let st = c.search_time.map_or("inf".to_string(), format_sig6);
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    r.scenario.strategy.name(),
                    c.label,
                    st,
                    format_sig6(c.torque_ripple),
                    format_sig6(c.mu_steady),
                    format_sig6(c.v_slip_steady),
                    format_sig6(c.peak_utilization),
                    format_sig6(r.metrics.slip_rms_error),
                ));
            }
        }
        out
    }

    /// Search-time and ripple ratios for every ordered pair of strategies
    /// and every condition.
    pub fn ratios_csv(&self) -> String {
        let mut out = String::from("condition,a,b,search_time_ratio,ripple_ratio\n");
        let Some(first) = self.runs.first() else {
            return out;
        };
        for c in &first.metrics.conditions {
            for a in &self.runs {
                for b in &self.runs {
                    let (ka, kb) = (a.scenario.strategy, b.scenario.strategy);
                    if ka == kb {
                        continue;
                    }
                    let st = self
                        .ratio(ka, kb, &c.label, |m| m.search_time_or_inf())
                        .unwrap_or(f64::NAN);
                    let rp = self
                        .ratio(ka, kb, &c.label, |m| m.torque_ripple)
                        .unwrap_or(f64::NAN);
                    out.push_str(&format!(
                        "{},{},{},{},{}\n",
                        c.label,
                        ka.name(),
                        kb.name(),
                        format_sig6(st),
                        format_sig6(rp)
                    ));
                }
            }
        }
        out
    }
}

/// Run the same scenario once per strategy, in parallel. Results come back
/// in the order of `kinds`.
pub fn compare_strategies(base: &Scenario, kinds: &[StrategyKind]) -> Result<Comparison> {
    if kinds.is_empty() {
        return Err(Error::EmptyInput("strategy list"));
    }
    let runs = kinds
        .par_iter()
        .map(|&k| run_scenario(&base.clone().with_strategy(k)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Comparison { runs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torque_ramp_reaches_final_in_two_seconds() {
        let s = Scenario::experiment(StrategyKind::Constant);
        let tl = &s.timeline;
        assert_eq!(tl.torque_command(4.999), 0.0);
        assert!((tl.torque_command(6.0) - 5.0).abs() < 1e-12);
        assert!(tl.torque_command(6.999) < 10.0);
        assert_eq!(tl.torque_command(7.0), 10.0);
        assert_eq!(tl.torque_command(65.0), 0.0);
    }

    #[test]
    fn presets_validate() {
        for k in StrategyKind::ALL {
            Scenario::experiment(k).validate().unwrap();
            Scenario::simulation(k).validate().unwrap();
        }
    }

    #[test]
    fn experiment_conditions() {
        let c = Scenario::experiment(StrategyKind::Flc).conditions();
        assert_eq!(c.len(), 2);
        assert_eq!((c[0].label.as_str(), c[0].start, c[0].end), ("dry", 0.0, 35.0));
        assert_eq!((c[1].label.as_str(), c[1].start, c[1].end), ("wet", 35.0, 65.0));
    }

    #[test]
    fn bad_timeline_is_rejected() {
        let mut s = Scenario::experiment(StrategyKind::Po);
        s.timeline.events.pop();
        assert!(s.validate().is_err());
        let mut s = Scenario::experiment(StrategyKind::Po);
        s.timeline.events[1].time = 1.0;
        let err = s.validate().unwrap_err();
        assert!(err.violations().len() >= 2);
    }

    #[test]
    fn zero_torque_never_arms() {
        let mut s = Scenario::simulation(StrategyKind::Constant);
        s.timeline.torque_final = 0.0;
        s.timeline.events = vec![
            Event {
                time: 0.5,
                action: EventAction::TorqueOn,
            },
            Event {
                time: 3.0,
                action: EventAction::End,
            },
        ];
        let tr = simulate(&s).unwrap();
        assert!(tr.activations.is_empty());
        assert!(tr.rows.iter().all(|r| r.v_slip.abs() < 0.3));
        assert_eq!(tr.len(), 3001);
    }

    #[test]
    fn empty_comparison_is_rejected() {
        let s = Scenario::simulation(StrategyKind::Constant);
        assert!(matches!(
            compare_strategies(&s, &[]),
            Err(Error::EmptyInput(_))
        ));
    }
}
