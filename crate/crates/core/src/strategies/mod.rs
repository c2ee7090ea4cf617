//! Slip-command generators behind one interface.
//!
//! Every strategy is a state machine fed sampled drive signals at the
//! controller rate. None of them sees plant internals: the inputs are the
//! drive torque estimate, the measured slip and roller speed, and (for
//! gradient tracking only) the observer's adhesion estimate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ValidationError;

mod constant;
mod fuzzy;
mod perturb_observe;
mod steepest_gradient;
mod swarm;

pub use constant::{constant_slip, ConstantConfig, ConstantSlip};
pub use fuzzy::{FlcConfig, FuzzyLabel, FuzzyTracker, MembershipSet};
pub use perturb_observe::{PerturbObserve, PoConfig, WheelSpeedIntegrator};
pub use steepest_gradient::{steepest_gradient_step, SgConfig, SteepestGradient};
pub use swarm::{PsoConfig, SwarmPhase, SwarmTracker};

/// Sampled signals handed to a strategy each controller period.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StrategyInputs {
    /// Drive torque estimate, N m.
    pub te_hat: f64,
    /// Measured slip velocity, m/s.
    pub v_slip: f64,
    /// Roller (train) surface speed, m/s.
    pub v_r: f64,
    /// Observer adhesion estimate; only gradient tracking reads it.
    pub mu_hat: f64,
    pub t: f64,
    pub dt_ctrl: f64,
}

/// Strategy-internal snapshot carried alongside each decision.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum StrategyDebug {
    #[default]
    None,
    PerturbObserve {
        accelerate: bool,
        torque_max: f64,
    },
    Gradient {
        slope: f64,
    },
    Fuzzy {
        delta_torque: f64,
        delta_slip: f64,
        step: f64,
    },
    Swarm {
        phase: SwarmPhase,
        iteration: u32,
        g_best: f64,
        g_best_fitness: f64,
        resets: u32,
    },
}

/// One strategy output. Exactly one of the two references is present and
/// which one is fixed by the strategy kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyDecision {
    pub v_slip_ref: Option<f64>,
    pub wheel_accel_ref: Option<f64>,
    pub debug: StrategyDebug,
}

impl StrategyDecision {
    pub fn slip(v: f64, debug: StrategyDebug) -> Self {
        Self {
            v_slip_ref: Some(v),
            wheel_accel_ref: None,
            debug,
        }
    }

    pub fn accel(a: f64, debug: StrategyDebug) -> Self {
        Self {
            v_slip_ref: None,
            wheel_accel_ref: Some(a),
            debug,
        }
    }
}

pub trait SlipStrategy: Send {
    fn kind(&self) -> StrategyKind;

    /// Called when the slip loop arms, with the signals at that instant.
    fn reset(&mut self, inputs: &StrategyInputs);

    fn update(&mut self, inputs: &StrategyInputs) -> StrategyDecision;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Constant,
    Po,
    Sg,
    Flc,
    Pso,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::Constant,
        StrategyKind::Po,
        StrategyKind::Sg,
        StrategyKind::Flc,
        StrategyKind::Pso,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Constant => "constant",
            StrategyKind::Po => "po",
            StrategyKind::Sg => "sg",
            StrategyKind::Flc => "flc",
            StrategyKind::Pso => "pso",
        }
    }

    pub fn is_tracking(self) -> bool {
        self != StrategyKind::Constant
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "constant" | "const" => Ok(StrategyKind::Constant),
            "po" | "p&o" | "perturb_observe" => Ok(StrategyKind::Po),
            "sg" | "steepest_gradient" => Ok(StrategyKind::Sg),
            "flc" | "fuzzy" => Ok(StrategyKind::Flc),
            "pso" | "swarm" => Ok(StrategyKind::Pso),
            other => Err(format!(
                "unknown strategy `{other}` (expected constant, po, sg, flc or pso)"
            )),
        }
    }
}

/// Tuning for all strategies; the scenario picks one kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrategyConfig {
    /// Upper clamp on every slip reference, m/s.
    pub v_slip_max: f64,
    /// Upper clamp on wheel acceleration references, m/s^2.
    pub accel_max: f64,
    pub constant: ConstantConfig,
    pub po: PoConfig,
    pub sg: SgConfig,
    pub flc: FlcConfig,
    pub pso: PsoConfig,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            v_slip_max: 1.5,
            accel_max: 5.0,
            constant: ConstantConfig::default(),
            po: PoConfig::default(),
            sg: SgConfig::default(),
            flc: FlcConfig::default(),
            pso: PsoConfig::default(),
        }
    }
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut e = ValidationError::default();
        if !(self.v_slip_max.is_finite() && self.v_slip_max > 0.0) {
            e.push("StrategyConfig.v_slip_max", "must be > 0");
        }
        if !(self.accel_max.is_finite() && self.accel_max > 0.0) {
            e.push("StrategyConfig.accel_max", "must be > 0");
        }
        for r in [
            self.constant.validate(),
            self.po.validate(),
            self.sg.validate(),
            self.flc.validate(),
            self.pso.validate(),
        ] {
            if let Err(v) = r {
                e.extend(v);
            }
        }
        e.into_result()
    }

    /// Instantiate the strategy of the given kind.
    pub fn build(&self, kind: StrategyKind, seed: u64) -> Box<dyn SlipStrategy> {
        match kind {
            StrategyKind::Constant => Box::new(ConstantSlip::new(self.constant.v_slip_set)),
            StrategyKind::Po => Box::new(PerturbObserve::new(self.po.clone(), self.accel_max)),
            StrategyKind::Sg => Box::new(SteepestGradient::new(self.sg.clone(), self.v_slip_max)),
            StrategyKind::Flc => Box::new(FuzzyTracker::new(self.flc.clone(), self.v_slip_max)),
            StrategyKind::Pso => {
                let mut cfg = self.pso.clone();
                cfg.rng_seed = cfg.rng_seed.wrapping_add(seed);
                Box::new(SwarmTracker::new(cfg))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for k in StrategyKind::ALL {
            assert_eq!(k.name().parse::<StrategyKind>().unwrap(), k);
        }
        assert!("mpc".parse::<StrategyKind>().is_err());
    }

    #[test]
    fn decisions_carry_one_reference() {
        let cfg = StrategyConfig::default();
        let inputs = StrategyInputs {
            te_hat: 3.0,
            v_slip: 0.35,
            v_r: 1.57,
            mu_hat: 0.2,
            t: 0.0,
            dt_ctrl: 1e-3,
        };
        for k in StrategyKind::ALL {
            let mut s = cfg.build(k, 1);
            s.reset(&inputs);
            let d = s.update(&inputs);
            assert_eq!(s.kind(), k);
            match k {
                StrategyKind::Po => {
                    assert!(d.v_slip_ref.is_none() && d.wheel_accel_ref.is_some())
                }
                _ => assert!(d.v_slip_ref.is_some() && d.wheel_accel_ref.is_none()),
            }
        }
    }
}
