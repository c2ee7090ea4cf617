//! Load-torque disturbance observer, adhesion estimate and the filtered
//! adhesion-slip slope used by gradient tracking.
//!
//! All filters are first-order and discretized with the backward
//! difference, so they stay stable for any sample period.

use serde::{Deserialize, Serialize};

use crate::error::ValidationError;
use crate::plant::RigParameters;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObserverConfig {
    /// Filter constant of the speed differentiator, s.
    pub tau_obs: f64,
    /// Slip-velocity low-pass constant, s.
    pub tau_v: f64,
    /// Adhesion-estimate low-pass constant, s.
    pub tau_mu: f64,
    /// Smallest filtered slip increment used as a divisor, m/s.
    pub epsilon_v: f64,
}

impl Default for ObserverConfig {
    fn default() -> Self {
        Self {
            tau_obs: 0.02,
            tau_v: 0.05,
            tau_mu: 0.05,
            epsilon_v: 1e-4,
        }
    }
}

impl ObserverConfig {
    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut e = ValidationError::default();
        for (name, v) in [
            ("tau_obs", self.tau_obs),
            ("tau_v", self.tau_v),
            ("tau_mu", self.tau_mu),
            ("epsilon_v", self.epsilon_v),
        ] {
            if !(v.is_finite() && v > 0.0) {
                e.push(format!("ObserverConfig.{name}"), "must be > 0");
            }
        }
        e.into_result()
    }
}

/// First-order low-pass filter `1 / (tau s + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowPass {
    tau: f64,
    y: Option<f64>,
}

impl LowPass {
    pub fn new(tau: f64) -> Self {
        Self { tau, y: None }
    }

    /// Filter one sample. The first sample initializes the output.
    pub fn update(&mut self, x: f64, dt: f64) -> f64 {
        let y = match self.y {
            None => x,
            Some(prev) => (self.tau * prev + dt * x) / (self.tau + dt),
        };
        self.y = Some(y);
        y
    }

    pub fn value(&self) -> Option<f64> {
        self.y
    }

    pub fn reset(&mut self) {
        self.y = None;
    }
}

/// Filtered differentiator `s / (tau s + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilteredDerivative {
    tau: f64,
    prev_input: Option<f64>,
    y: f64,
}

impl FilteredDerivative {
    pub fn new(tau: f64) -> Self {
        Self {
            tau,
            prev_input: None,
            y: 0.0,
        }
    }

    pub fn update(&mut self, x: f64, dt: f64) -> f64 {
        if let Some(prev) = self.prev_input {
            self.y = (self.tau * self.y + (x - prev)) / (self.tau + dt);
        }
        self.prev_input = Some(x);
        self.y
    }
}

/// Disturbance observer reconstructing the wheel motor load torque.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadObserver {
    derivative: FilteredDerivative,
}

impl LoadObserver {
    pub fn new(config: &ObserverConfig) -> Self {
        Self {
            derivative: FilteredDerivative::new(config.tau_obs),
        }
    }

    /// `T_l = T_e - beta * omega - J * s/(tau s + 1) * omega`, motor frame.
    pub fn estimate_load_torque(
        &mut self,
        te_hat: f64,
        omega_mw: f64,
        rig: &RigParameters,
        dt: f64,
    ) -> f64 {
        let accel = self.derivative.update(omega_mw, dt);
        te_hat - rig.beta_w * omega_mw - rig.j_w * accel
    }
}

/// Adhesion coefficient from a motor-frame load torque estimate.
pub fn estimate_mu(t_l_hat: f64, rig: &RigParameters) -> f64 {
    t_l_hat * rig.rg_w / (rig.f_n * rig.r_w)
}

/// Slope `d mu / d v_slip` from filtered increments over one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeEstimator {
    mu_filter: LowPass,
    v_filter: LowPass,
    epsilon_v: f64,
    prev: Option<(f64, f64)>,
    k: f64,
}

impl SlopeEstimator {
    pub fn new(config: &ObserverConfig) -> Self {
        Self {
            mu_filter: LowPass::new(config.tau_mu),
            v_filter: LowPass::new(config.tau_v),
            epsilon_v: config.epsilon_v,
            prev: None,
            k: 0.0,
        }
    }

    /// Feed one `(mu_hat, v_slip)` sample and return the current slope.
    ///
    /// When the filtered slip moved by less than `epsilon_v` the previous
    /// slope is held and the reference sample is kept, so a slow drift
    /// still produces a fresh slope once it has accumulated `epsilon_v`.
    pub fn discrete_gradient(&mut self, mu_hat: f64, v_slip: f64, dt: f64) -> f64 {
        let m = self.mu_filter.update(mu_hat, dt);
        let v = self.v_filter.update(v_slip, dt);
        match self.prev {
            Some((pm, pv)) => {
                let dv = v - pv;
                if dv.abs() >= self.epsilon_v {
                    self.k = (m - pm) / dv;
                    self.prev = Some((m, v));
                }
            }
            None => self.prev = Some((m, v)),
        }
        self.k
    }

    pub fn slope(&self) -> f64 {
        self.k
    }

    pub fn filtered(&self) -> Option<(f64, f64)> {
        self.prev
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steady_speed_returns_torque() {
        let rig = RigParameters {
            beta_w: 0.0,
            ..RigParameters::default()
        };
        let mut obs = LoadObserver::new(&ObserverConfig::default());
        let mut t = 0.0;
        for _ in 0..1000 {
            t = obs.estimate_load_torque(4.2, 37.0, &rig, 1e-3);
        }
        assert_eq!(t, 4.2);
    }

    #[test]
    fn ramp_response_settles_to_inertial_offset() {
        let rig = RigParameters {
            beta_w: 0.0,
            ..RigParameters::default()
        };
        let cfg = ObserverConfig::default();
        let mut obs = LoadObserver::new(&cfg);
        let a = 25.0;
        let dt = 1e-3;
        let mut est = 0.0;
        for k in 0..(10.0 * cfg.tau_obs / dt) as usize {
            est = obs.estimate_load_torque(3.0, a * k as f64 * dt, &rig, dt);
        }
        let expected = 3.0 - rig.j_w * a;
        assert!((est - expected).abs() <= 0.01 * expected.abs());
    }

    #[test]
    fn friction_mismatch_biases_linearly() {
        let rig = RigParameters::default();
        let delta = 0.004;
        let model = RigParameters {
            beta_w: rig.beta_w + delta,
            ..rig.clone()
        };
        let cfg = ObserverConfig::default();
        let (mut a, mut b) = (LoadObserver::new(&cfg), LoadObserver::new(&cfg));
        let omega = 50.0;
        let (mut ea, mut eb) = (0.0, 0.0);
        for _ in 0..100 {
            ea = a.estimate_load_torque(2.0, omega, &rig, 1e-3);
            eb = b.estimate_load_torque(2.0, omega, &model, 1e-3);
        }
        assert!((eb - ea + delta * omega).abs() < 1e-12);
    }

    #[test]
    fn mu_estimate_cases() {
        let rig = RigParameters::default();
        assert_eq!(estimate_mu(0.0, &rig), 0.0);
        assert!((estimate_mu(5.0, &rig) - 0.1779).abs() < 1e-4);
        for m in [0.05, 0.3, 0.61] {
            let (load, _) = crate::plant::adhesion_torques(m, &rig);
            assert!((estimate_mu(load, &rig) - m).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_inputs_hold_previous_slope() {
        let mut g = SlopeEstimator::new(&ObserverConfig::default());
        for _ in 0..100 {
            assert_eq!(g.discrete_gradient(0.3, 0.2, 1e-3), 0.0);
        }
    }

    #[test]
    fn linear_relation_recovers_gain() {
        let cfg = ObserverConfig::default();
        let mut g = SlopeEstimator::new(&cfg);
        let dt = 1e-3;
        let mut k = 0.0;
        for i in 0..2000 {
            let v = 0.05 + 0.2 * i as f64 * dt;
            k = g.discrete_gradient(0.4 * v, v, dt);
        }
        assert!((k - 0.4).abs() <= 0.02 * 0.4, "k = {k}");
    }

    #[test]
    fn slow_drift_still_yields_slope() {
        let cfg = ObserverConfig::default();
        let mut g = SlopeEstimator::new(&cfg);
        let dt = 1e-3;
        let mut k = 0.0;
        // 2e-6 m/s per sample, well under epsilon_v per step.
        for i in 0..20_000 {
            let v = 0.2 + 2e-6 * i as f64;
            k = g.discrete_gradient(0.1 + 0.7 * v, v, dt);
        }
        assert!((k - 0.7).abs() < 0.02, "k = {k}");
    }

    #[test]
    fn low_pass_is_bounded() {
        let mut f = LowPass::new(0.05);
        for i in 0..70_000 {
            let x = if i % 7 < 3 { 1e6 } else { -1e6 };
            let y = f.update(x, 1e-3);
            assert!(y.abs() <= 1e6);
        }
    }
}
