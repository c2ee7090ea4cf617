//! Two-inertia wheel/roller rig coupled through the adhesion curve.
//!
//! Both motors are modelled in their own (motor-shaft) frame. The contact
//! force `mu * F_N` loads the wheel motor through `r_W / Rg_W` and drives the
//! roller motor through `r_R / Rg_R`. Torque actuators are first-order lags
//! standing in for the field-oriented drives.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adhesion::{mu, AdhesionCurveParams};
use crate::error::{NonFiniteState, ValidationError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RigParameters {
    /// Wheel radius, m.
    pub r_w: f64,
    /// Roller radius, m.
    pub r_r: f64,
    /// Wheel belt ratio (motor turns per wheel turn).
    pub rg_w: f64,
    /// Roller belt ratio.
    pub rg_r: f64,
    /// Wheel-side inertia in the motor frame, kg m^2.
    pub j_w: f64,
    /// Roller-side inertia in the motor frame, kg m^2.
    pub j_r: f64,
    /// Wheel motor viscous friction, N m s.
    pub beta_w: f64,
    /// Roller motor viscous friction, N m s.
    pub beta_r: f64,
    /// Normal force at the contact, N.
    pub f_n: f64,
    /// Torque actuator time constant, s.
    pub tau_drive: f64,
}

impl Default for RigParameters {
    fn default() -> Self {
        Self {
            r_w: 0.125,
            r_r: 0.25,
            rg_w: 90.0 / 24.0,
            rg_r: 192.0 / 26.0,
            j_w: 0.002,
            j_r: 0.007,
            beta_w: 0.001,
            beta_r: 0.001,
            f_n: 843.0,
            tau_drive: 0.005,
        }
    }
}

impl RigParameters {
    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut e = ValidationError::default();
        let positive = [
            ("r_w", self.r_w),
            ("r_r", self.r_r),
            ("rg_w", self.rg_w),
            ("rg_r", self.rg_r),
            ("j_w", self.j_w),
            ("j_r", self.j_r),
            ("f_n", self.f_n),
            ("tau_drive", self.tau_drive),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                e.push(format!("RigParameters.{name}"), "must be > 0");
            }
        }
        for (name, v) in [("beta_w", self.beta_w), ("beta_r", self.beta_r)] {
            if !(v.is_finite() && v >= 0.0) {
                e.push(format!("RigParameters.{name}"), "must be >= 0");
            }
        }
        e.into_result()
    }

    /// Wheel surface speed per unit wheel motor speed, m/rad.
    pub fn wheel_lever(&self) -> f64 {
        self.r_w / self.rg_w
    }

    /// Roller surface speed per unit roller motor speed, m/rad.
    pub fn roller_lever(&self) -> f64 {
        self.r_r / self.rg_r
    }

    pub fn wheel_surface_speed(&self, omega_mw: f64) -> f64 {
        omega_mw * self.wheel_lever()
    }

    pub fn roller_surface_speed(&self, omega_mr: f64) -> f64 {
        omega_mr * self.roller_lever()
    }

    /// Roller motor speed for a roller wheel rotation given in rpm.
    pub fn roller_motor_speed_from_rpm(&self, rpm: f64) -> f64 {
        rpm * std::f64::consts::TAU / 60.0 * self.rg_r
    }
}

/// Slip velocity from the two motor speeds.
pub fn slip_velocity(omega_mw: f64, omega_mr: f64, rig: &RigParameters) -> f64 {
    omega_mw * rig.wheel_lever() - omega_mr * rig.roller_lever()
}

/// Contact torques reflected to the motors: `(wheel load, roller drive)`.
///
/// The wheel load opposes the wheel motor; the roller torque drives the
/// roller motor.
pub fn adhesion_torques(mu_actual: f64, rig: &RigParameters) -> (f64, f64) {
    let force = mu_actual * rig.f_n;
    (force * rig.wheel_lever(), force * rig.roller_lever())
}

/// Integrated energy flows, J.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyAccount {
    /// Mechanical work delivered by both motors.
    pub input: f64,
    /// Dissipated in viscous friction.
    pub friction: f64,
    /// Dissipated by sliding at the contact.
    pub slip: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SimState {
    pub t: f64,
    /// Wheel motor speed, rad/s.
    pub omega_mw: f64,
    /// Roller motor speed, rad/s.
    pub omega_mr: f64,
    /// Actual wheel motor torque, N m.
    pub te_w: f64,
    /// Actual roller motor torque, N m.
    pub te_r: f64,
    pub v_slip: f64,
    pub mu_actual: f64,
    /// Wheel motor shaft angle, rad.
    pub theta_w: f64,
    /// Roller motor shaft angle, rad.
    pub theta_r: f64,
    pub energy: EnergyAccount,
}

impl SimState {
    /// State at rest with both shafts at the given speeds and zero torque.
    pub fn rolling(
        omega_mw: f64,
        omega_mr: f64,
        params: &AdhesionCurveParams,
        rig: &RigParameters,
    ) -> Self {
        let v_slip = slip_velocity(omega_mw, omega_mr, rig);
        Self {
            omega_mw,
            omega_mr,
            v_slip,
            mu_actual: mu(params, v_slip),
            ..Self::default()
        }
    }

    pub fn kinetic_energy(&self, rig: &RigParameters) -> f64 {
        0.5 * rig.j_w * self.omega_mw.powi(2) + 0.5 * rig.j_r * self.omega_mr.powi(2)
    }

    fn is_finite(&self) -> bool {
        [
            self.t,
            self.omega_mw,
            self.omega_mr,
            self.te_w,
            self.te_r,
            self.v_slip,
            self.mu_actual,
            self.theta_w,
            self.theta_r,
            self.energy.input,
            self.energy.friction,
            self.energy.slip,
        ]
        .iter()
        .all(|x| x.is_finite())
    }
}

const N: usize = 9;

fn derivatives(
    x: &[f64; N],
    cmd_w: f64,
    cmd_r: f64,
    params: &AdhesionCurveParams,
    rig: &RigParameters,
) -> [f64; N] {
    let [omega_w, omega_r, te_w, te_r, ..] = *x;
    let v_slip = slip_velocity(omega_w, omega_r, rig);
    let m = mu(params, v_slip);
    let (load_w, drive_r) = adhesion_torques(m, rig);
    [
        (te_w - load_w - rig.beta_w * omega_w) / rig.j_w,
        (te_r + drive_r - rig.beta_r * omega_r) / rig.j_r,
        (cmd_w - te_w) / rig.tau_drive,
        (cmd_r - te_r) / rig.tau_drive,
        omega_w,
        omega_r,
        te_w * omega_w + te_r * omega_r,
        rig.beta_w * omega_w * omega_w + rig.beta_r * omega_r * omega_r,
        m * rig.f_n * v_slip,
    ]
}

/// Advance the rig by one fixed RK4 step of length `dt`.
///
/// Torque commands and the adhesion curve are held over the step.
pub fn step(
    state: &SimState,
    te_w_cmd: f64,
    te_r_cmd: f64,
    params: &AdhesionCurveParams,
    rig: &RigParameters,
    dt: f64,
) -> Result<SimState, NonFiniteState> {
    debug_assert!(dt > 0.0 && dt <= rig.tau_drive / 5.0 + 1e-15);
    let x0 = [
        state.omega_mw,
        state.omega_mr,
        state.te_w,
        state.te_r,
        state.theta_w,
        state.theta_r,
        state.energy.input,
        state.energy.friction,
        state.energy.slip,
    ];
    let f = |x: &[f64; N]| derivatives(x, te_w_cmd, te_r_cmd, params, rig);
    let add = |x: &[f64; N], k: &[f64; N], h: f64| {
        let mut out = *x;
        for i in 0..N {
            out[i] += h * k[i];
        }
        out
    };
    let k1 = f(&x0);
    let k2 = f(&add(&x0, &k1, 0.5 * dt));
    let k3 = f(&add(&x0, &k2, 0.5 * dt));
    let k4 = f(&add(&x0, &k3, dt));
    let mut x = x0;
    for i in 0..N {
        x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    let v_slip = slip_velocity(x[0], x[1], rig);
    let next = SimState {
        t: state.t + dt,
        omega_mw: x[0],
        omega_mr: x[1],
        te_w: x[2],
        te_r: x[3],
        v_slip,
        mu_actual: mu(params, v_slip),
        theta_w: x[4],
        theta_r: x[5],
        energy: EnergyAccount {
            input: x[6],
            friction: x[7],
            slip: x[8],
        },
    };
    if next.is_finite() {
        Ok(next)
    } else {
        Err(NonFiniteState { t: next.t })
    }
}

/// Speed-mode PI loop of the roller drive, holding the roller at a
/// constant speed the way a heavy train would.
#[derive(Debug, Clone, PartialEq)]
pub struct RollerSpeedLoop {
    pub omega_ref: f64,
    kp: f64,
    ki: f64,
    integrator: f64,
}

impl RollerSpeedLoop {
    /// Critically damped tuning for the given closed-loop bandwidth, rad/s.
    pub fn new(omega_ref: f64, bandwidth: f64, rig: &RigParameters) -> Self {
        Self {
            omega_ref,
            kp: 2.0 * bandwidth * rig.j_r,
            ki: bandwidth * bandwidth * rig.j_r,
            integrator: rig.beta_r * omega_ref,
        }
    }

    pub fn update(&mut self, omega_mr: f64, dt: f64) -> f64 {
        let e = self.omega_ref - omega_mr;
        self.integrator += self.ki * e * dt;
        self.kp * e + self.integrator
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorConfig {
    /// Quantize speeds through an incremental encoder.
    pub quantize: bool,
    /// Encoder pulses per revolution (x4 decoding).
    pub ppr: u32,
    /// Counting window for the speed estimate, s.
    pub window: f64,
    /// Half-width of zero-mean uniform speed noise, rad/s. Zero disables it.
    pub noise: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            quantize: false,
            ppr: 500,
            window: 0.01,
            noise: 0.0,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut e = ValidationError::default();
        if self.ppr == 0 {
            e.push("SensorConfig.ppr", "must be > 0");
        }
        if !(self.window > 0.0 && self.window.is_finite()) {
            e.push("SensorConfig.window", "must be > 0");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            e.push("SensorConfig.noise", "must be >= 0");
        }
        e.into_result()
    }
}

/// Measured wheel and roller motor speeds.
#[derive(Debug, Clone)]
pub struct SpeedSensor {
    config: SensorConfig,
    history: std::collections::VecDeque<(f64, i64, i64)>,
    rng: ChaCha8Rng,
}

impl SpeedSensor {
    pub fn new(config: SensorConfig, seed: u64) -> Self {
        Self {
            config,
            history: Default::default(),
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5e50),
        }
    }

    /// Sample `(omega_mw, omega_mr)` from the true state.
    pub fn measure(&mut self, state: &SimState) -> (f64, f64) {
        let (mut w, mut r) = if self.config.quantize {
            let counts_per_rad = 4.0 * self.config.ppr as f64 / std::f64::consts::TAU;
            let cw = (state.theta_w * counts_per_rad).floor() as i64;
            let cr = (state.theta_r * counts_per_rad).floor() as i64;
            self.history.push_back((state.t, cw, cr));
            while self.history.len() > 2
                && state.t - self.history[1].0 >= self.config.window - 1e-12
            {
                self.history.pop_front();
            }
            let (t0, w0, r0) = self.history[0];
            let span = state.t - t0;
            if span > 0.0 {
                (
                    (cw - w0) as f64 / counts_per_rad / span,
                    (cr - r0) as f64 / counts_per_rad / span,
                )
            } else {
                (state.omega_mw, state.omega_mr)
            }
        } else {
            (state.omega_mw, state.omega_mr)
        };
        if self.config.noise > 0.0 {
            let a = self.config.noise;
            w += self.rng.random_range(-a..=a);
            r += self.rng.random_range(-a..=a);
        }
        (w, r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adhesion::builtin_profile;

    fn table1() -> RigParameters {
        RigParameters::default()
    }

    #[test]
    fn slip_velocity_cases() {
        let rig = table1();
        assert_eq!(slip_velocity(0.0, 0.0, &rig), 0.0);
        let omega_r = rig.roller_motor_speed_from_rpm(60.0);
        let v_r = rig.roller_surface_speed(omega_r);
        assert!((v_r - std::f64::consts::TAU * 0.25).abs() < 1e-12);
        assert!((slip_velocity(0.0, omega_r, &rig) + 1.5708).abs() < 1e-4);
        let omega_w = v_r / rig.wheel_lever();
        assert!(slip_velocity(omega_w, omega_r, &rig).abs() < 1e-12);
        assert!((slip_velocity(3.75 * 8.0, 0.0, &rig) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn adhesion_torque_cases() {
        let rig = table1();
        assert_eq!(adhesion_torques(0.0, &rig), (0.0, 0.0));
        let (w, _) = adhesion_torques(0.45, &rig);
        assert!((w - 12.645).abs() < 1e-9);
        let (w, _) = adhesion_torques(0.178, &rig);
        assert!((w - 5.0).abs() < 0.005);
    }

    #[test]
    fn zero_state_stays_at_rest() {
        let rig = table1();
        let p = builtin_profile("P1").unwrap();
        let s = step(&SimState::default(), 0.0, 0.0, &p, &rig, 1e-4).unwrap();
        assert_eq!(s.omega_mw, 0.0);
        assert_eq!(s.omega_mr, 0.0);
        assert_eq!(s.te_w, 0.0);
        assert!((s.t - 1e-4).abs() < 1e-18);
    }

    #[test]
    fn non_finite_state_is_reported() {
        let rig = table1();
        let p = builtin_profile("P1").unwrap();
        let s = SimState {
            omega_mw: f64::NAN,
            ..SimState::default()
        };
        assert!(step(&s, 0.0, 0.0, &p, &rig, 1e-4).is_err());
    }

    #[test]
    fn roller_loop_holds_speed() {
        let rig = table1();
        let p = builtin_profile("P1").unwrap();
        let omega_r = rig.roller_motor_speed_from_rpm(60.0);
        let omega_w = rig.roller_surface_speed(omega_r) / rig.wheel_lever();
        let mut s = SimState::rolling(omega_w, omega_r, &p, &rig);
        let mut lp = RollerSpeedLoop::new(omega_r, 20.0, &rig);
        for _ in 0..20_000 {
            let cmd = lp.update(s.omega_mr, 1e-4);
            s = step(&s, rig.beta_w * s.omega_mw, cmd, &p, &rig, 1e-4).unwrap();
        }
        assert!((s.omega_mr - omega_r).abs() < 1e-3);
    }

    #[test]
    fn quantized_sensor_tracks_constant_speed() {
        let cfg = SensorConfig {
            quantize: true,
            ..SensorConfig::default()
        };
        let mut sensor = SpeedSensor::new(cfg, 1);
        let omega = 40.0;
        let mut last = (0.0, 0.0);
        for k in 0..100 {
            let t = k as f64 * 1e-3;
            let s = SimState {
                t,
                theta_w: omega * t,
                theta_r: 0.5 * omega * t,
                ..SimState::default()
            };
            last = sensor.measure(&s);
        }
        let q = std::f64::consts::TAU / 2000.0 / 0.01;
        assert!((last.0 - omega).abs() <= q + 1e-9);
        assert!((last.1 - 0.5 * omega).abs() <= q + 1e-9);
    }
}
