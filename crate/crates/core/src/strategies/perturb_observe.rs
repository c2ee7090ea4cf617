//! Perturb-and-observe tracking on the wheel acceleration.
//!
//! The wheel is pushed at `a_base + da` or `a_base - da`. A max-hold keeps
//! the largest drive torque seen since the last reversal; once the torque
//! has fallen more than `torque_threshold` below it the operating point is
//! moving away from the peak and the perturbation direction flips, which
//! also resets the max-hold and the period counter.
//!
//! On a flat stretch of the curve the torque may never drop far enough.
//! If the max-hold has not grown for `search_horizon` worth of periods the
//! direction is flipped anyway.

use serde::{Deserialize, Serialize};

use super::{SlipStrategy, StrategyDebug, StrategyDecision, StrategyInputs, StrategyKind};
use crate::error::ValidationError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoConfig {
    /// Acceleration perturbation, m/s^2.
    pub delta_a: f64,
    /// Perturbation period, s.
    pub period: f64,
    /// Torque drop that reverses the perturbation, N m.
    pub torque_threshold: f64,
    /// Filter constant of the baseline (train) acceleration, s.
    pub tau_accel: f64,
    /// Longest run without a new torque maximum before a forced reversal, s.
    pub search_horizon: f64,
}

impl Default for PoConfig {
    fn default() -> Self {
        Self {
            delta_a: 0.2,
            period: 0.25,
            torque_threshold: 0.3,
            tau_accel: 0.05,
            search_horizon: 1.0,
        }
    }
}

impl PoConfig {
    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut e = ValidationError::default();
        for (name, v) in [
            ("delta_a", self.delta_a),
            ("period", self.period),
            ("torque_threshold", self.torque_threshold),
            ("tau_accel", self.tau_accel),
            ("search_horizon", self.search_horizon),
        ] {
            if !(v.is_finite() && v > 0.0) {
                e.push(format!("PoConfig.{name}"), "must be > 0");
            }
        }
        e.into_result()
    }

    /// Number of flat periods tolerated before a forced reversal.
    pub fn max_flat_periods(&self) -> u32 {
        (self.search_horizon / self.period).ceil().max(1.0) as u32
    }
}

#[derive(Debug, Clone)]
pub struct PerturbObserve {
    cfg: PoConfig,
    accel_max: f64,
    accelerate: bool,
    torque_max: f64,
    elapsed: f64,
    grew: bool,
    flat_periods: u32,
    prev_v_r: Option<f64>,
    a_base: f64,
}

impl PerturbObserve {
    pub fn new(cfg: PoConfig, accel_max: f64) -> Self {
        Self {
            cfg,
            accel_max,
            accelerate: true,
            torque_max: f64::NEG_INFINITY,
            elapsed: 0.0,
            grew: false,
            flat_periods: 0,
            prev_v_r: None,
            a_base: 0.0,
        }
    }

    /// Current search direction (`S_m`): true accelerates the wheel.
    pub fn accelerating(&self) -> bool {
        self.accelerate
    }

    fn flip(&mut self, te_hat: f64) {
        self.accelerate = !self.accelerate;
        self.torque_max = te_hat;
        self.elapsed = 0.0;
        self.grew = false;
        self.flat_periods = 0;
    }

    /// Torque drop below the held maximum.
    pub fn delta_torque(&self, te_hat: f64) -> f64 {
        self.torque_max.max(te_hat) - te_hat
    }
}

impl SlipStrategy for PerturbObserve {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Po
    }

    fn reset(&mut self, inputs: &StrategyInputs) {
        self.accelerate = true;
        self.torque_max = inputs.te_hat;
        self.elapsed = 0.0;
        self.grew = false;
        self.flat_periods = 0;
        self.prev_v_r = Some(inputs.v_r);
        self.a_base = 0.0;
    }

    fn update(&mut self, inputs: &StrategyInputs) -> StrategyDecision {
        let dt = inputs.dt_ctrl;
        if let Some(prev) = self.prev_v_r {
            let a = (inputs.v_r - prev) / dt;
            self.a_base = (self.cfg.tau_accel * self.a_base + dt * a) / (self.cfg.tau_accel + dt);
        }
        self.prev_v_r = Some(inputs.v_r);

        if inputs.te_hat > self.torque_max {
            self.torque_max = inputs.te_hat;
            self.grew = true;
        }
        self.elapsed += dt;
        if self.elapsed >= self.cfg.period - 1e-12 {
            self.elapsed = 0.0;
            self.flat_periods = if self.grew { 0 } else { self.flat_periods + 1 };
            self.grew = false;
        }
        if self.torque_max - inputs.te_hat > self.cfg.torque_threshold
            || self.flat_periods >= self.cfg.max_flat_periods()
        {
            self.flip(inputs.te_hat);
        }

        let perturb = if self.accelerate {
            self.cfg.delta_a
        } else {
            -self.cfg.delta_a
        };
        let a = (self.a_base + perturb).clamp(-self.accel_max, self.accel_max);
        StrategyDecision::accel(
            a,
            StrategyDebug::PerturbObserve {
                accelerate: self.accelerate,
                torque_max: self.torque_max,
            },
        )
    }
}

/// Integrates a wheel acceleration reference into a wheel speed reference
/// and expresses it as a slip reference against the roller speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WheelSpeedIntegrator {
    v_w_ref: f64,
}

impl WheelSpeedIntegrator {
    pub fn new(v_w: f64) -> Self {
        Self { v_w_ref: v_w }
    }

    /// Advance by one period and return the slip reference clamped to
    /// `[0, v_slip_max]`; the integrator is clamped with it.
    pub fn advance(&mut self, accel: f64, v_r: f64, dt: f64, v_slip_max: f64) -> f64 {
        self.v_w_ref += accel * dt;
        self.v_w_ref = self.v_w_ref.clamp(v_r, v_r + v_slip_max);
        self.v_w_ref - v_r
    }

    pub fn wheel_speed_ref(&self) -> f64 {
        self.v_w_ref
    }
}
