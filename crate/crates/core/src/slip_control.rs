//! Slip detection, the slip-velocity PI loop with its dynamic limiter, and
//! the Min arbitration against the driver's torque request.

use serde::{Deserialize, Serialize};

use crate::error::ValidationError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SlipControlConfig {
    /// Proportional gain, N m s/m.
    pub kp: f64,
    /// Integral gain, N m/m.
    pub ki: f64,
    /// Slip magnitude that arms the loop, m/s.
    pub v_slip_activation: f64,
    /// Release level as a fraction of the activation threshold.
    pub release_ratio: f64,
    /// How long slip must stay below the release level, s.
    pub release_hold: f64,
}

impl Default for SlipControlConfig {
    fn default() -> Self {
        Self {
            kp: 30.0,
            ki: 150.0,
            v_slip_activation: 0.3,
            release_ratio: 0.5,
            release_hold: 0.2,
        }
    }
}

impl SlipControlConfig {
    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut e = ValidationError::default();
        if !(self.kp.is_finite() && self.kp >= 0.0) {
            e.push("SlipControlConfig.kp", "must be >= 0");
        }
        if !(self.ki.is_finite() && self.ki >= 0.0) {
            e.push("SlipControlConfig.ki", "must be >= 0");
        }
        if !(self.v_slip_activation.is_finite() && self.v_slip_activation > 0.0) {
            e.push("SlipControlConfig.v_slip_activation", "must be > 0");
        }
        if !(self.release_ratio > 0.0 && self.release_ratio < 1.0) {
            e.push("SlipControlConfig.release_ratio", "must lie in (0, 1)");
        }
        if !(self.release_hold.is_finite() && self.release_hold >= 0.0) {
            e.push("SlipControlConfig.release_hold", "must be >= 0");
        }
        e.into_result()
    }
}

/// State of the slip-velocity control block.
#[derive(Debug, Clone, PartialEq)]
pub struct SlipControlState {
    pub config: SlipControlConfig,
    pub active: bool,
    /// Integral part of the PI output, N m.
    pub integrator: f64,
    /// Dynamic upper limit on output and integrator, N m.
    pub ceiling: f64,
    below_since: Option<f64>,
    /// Unclamped PI demand from the last update.
    demand: f64,
    /// The last update wanted more than the ceiling allows.
    saturated: bool,
}

impl SlipControlState {
    pub fn new(config: SlipControlConfig) -> Self {
        Self {
            config,
            active: false,
            integrator: 0.0,
            ceiling: 0.0,
            below_since: None,
            demand: f64::INFINITY,
            saturated: true,
        }
    }

    /// Track the driver's command as the limiter ceiling.
    pub fn set_ceiling(&mut self, t_cmd: f64) {
        self.ceiling = t_cmd.max(0.0);
        if self.active {
            self.integrator = self.integrator.clamp(0.0, self.ceiling);
        }
    }

    /// Whether the slip loop is currently the binding torque constraint.
    pub fn is_limiting(&self) -> bool {
        self.active && !self.saturated && self.demand < self.ceiling
    }

    /// Update the armed flag from the slip sample taken at time `t`.
    ///
    /// Arms above the activation threshold. Releases once slip stayed below
    /// the release level for `release_hold` while the PI output was not
    /// cutting the driver's request. Calling twice with the same sample
    /// gives the same answer.
    pub fn detect_slip(&mut self, v_slip: f64, t: f64) -> bool {
        let cfg = &self.config;
        if !self.active {
            if v_slip.abs() > cfg.v_slip_activation {
                self.active = true;
                self.below_since = None;
                self.demand = f64::INFINITY;
                self.saturated = true;
            }
            return self.active;
        }
        let low = v_slip.abs() < cfg.release_ratio * cfg.v_slip_activation;
        if low && !self.is_limiting() {
            let since = *self.below_since.get_or_insert(t);
            if t - since >= cfg.release_hold - 1e-9 {
                self.active = false;
                self.below_since = None;
            }
        } else {
            self.below_since = None;
        }
        self.active
    }

    /// Start the integrator from the torque currently applied so arming
    /// the loop does not step the torque.
    pub fn preload(&mut self, torque: f64) {
        self.integrator = torque.clamp(0.0, self.ceiling);
    }

    /// PI on the slip error with conditional integration against
    /// `[0, ceiling]`.
    pub fn pi_slip_controller(&mut self, v_slip_ref: f64, v_slip: f64, dt: f64) -> f64 {
        let e = v_slip_ref - v_slip;
        let p = self.config.kp * e;
        let candidate = self.integrator + self.config.ki * e * dt;
        let pushing_up = p + candidate > self.ceiling && e > 0.0;
        let pushing_down = p + candidate < 0.0 && e < 0.0;
        if !(pushing_up || pushing_down) {
            self.integrator = candidate;
        }
        self.integrator = self.integrator.clamp(0.0, self.ceiling);
        self.demand = p + self.integrator;
        self.saturated = pushing_up || self.demand >= self.ceiling;
        self.demand.clamp(0.0, self.ceiling)
    }
}

/// Min arbitration between the driver request and the slip loop output.
pub fn arbitrate_torque(t_driver: f64, t_slip: f64, active: bool) -> f64 {
    if active {
        t_driver.min(t_slip)
    } else {
        t_driver
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctl() -> SlipControlState {
        SlipControlState::new(SlipControlConfig::default())
    }

    #[test]
    fn detection_thresholds() {
        let mut c = ctl();
        assert!(!c.detect_slip(0.0, 0.0));
        assert!(c.detect_slip(1.2 * 0.3, 0.001));
    }

    #[test]
    fn detection_is_idempotent() {
        let mut c = ctl();
        c.set_ceiling(10.0);
        let a = c.detect_slip(0.5, 1.0);
        assert_eq!(a, c.detect_slip(0.5, 1.0));
        c.pi_slip_controller(0.0, 0.05, 1e-3);
        c.integrator = c.ceiling;
        let a = c.detect_slip(0.05, 1.1);
        assert_eq!(a, c.detect_slip(0.05, 1.1));
        assert!(a);
    }

    #[test]
    fn hysteresis_releases_once() {
        let mut c = ctl();
        c.set_ceiling(10.0);
        let dt = 1e-3;
        let mut transitions = 0;
        let mut prev = false;
        for k in 0..1000 {
            let t = k as f64 * dt;
            // Above threshold for 0.1 s, then settles below half of it.
            let v = if t < 0.1 { 0.5 } else { 0.1 };
            let active = c.detect_slip(v, t);
            if active {
                // Driver request is the lower one: loop not limiting.
                c.pi_slip_controller(0.3, v, dt);
            }
            if active != prev {
                transitions += 1;
            }
            prev = active;
        }
        assert_eq!(transitions, 2);
        assert!(!prev);
    }

    #[test]
    fn limiting_loop_stays_armed() {
        let mut c = ctl();
        c.set_ceiling(10.0);
        c.detect_slip(0.5, 0.0);
        c.preload(2.0);
        for k in 1..1000 {
            let t = k as f64 * 1e-3;
            assert!(c.detect_slip(0.1, t));
            c.pi_slip_controller(0.1, 0.1, 1e-3);
        }
    }

    #[test]
    fn pi_basic_cases() {
        let mut c = ctl();
        c.set_ceiling(10.0);
        c.active = true;
        assert_eq!(c.pi_slip_controller(0.5, 0.5, 1e-3), 0.0);
        let mut p = SlipControlState::new(SlipControlConfig {
            ki: 0.0,
            ..SlipControlConfig::default()
        });
        p.set_ceiling(100.0);
        assert!((p.pi_slip_controller(0.3, 0.2, 1e-3) - 3.0).abs() < 1e-12);
    }

    fn saturate_then_flip(mut c: SlipControlState, clamp: bool) -> usize {
        c.set_ceiling(5.0);
        c.active = true;
        let dt = 1e-3;
        for _ in 0..1000 {
            if clamp {
                c.pi_slip_controller(1.0, 0.5, dt);
            } else {
                c.integrator += c.config.ki * 0.5 * dt;
            }
        }
        for k in 1..=1000 {
            let out = if clamp {
                c.pi_slip_controller(0.5, 0.52, dt)
            } else {
                c.integrator += c.config.ki * -0.02 * dt;
                (c.config.kp * -0.02 + c.integrator).clamp(0.0, 5.0)
            };
            if out < 5.0 {
                return k;
            }
        }
        usize::MAX
    }

    #[test]
    fn no_windup_after_saturation() {
        assert_eq!(saturate_then_flip(ctl(), true), 1);
        assert!(saturate_then_flip(ctl(), false) > 1);
    }

    #[test]
    fn arbitration() {
        assert_eq!(arbitrate_torque(10.0, 3.0, false), 10.0);
        assert_eq!(arbitrate_torque(10.0, 3.0, true), 3.0);
        assert_eq!(arbitrate_torque(2.0, 5.0, true), 2.0);
    }
}
