use serde::{Deserialize, Serialize};

use super::{SlipStrategy, StrategyDebug, StrategyDecision, StrategyInputs, StrategyKind};
use crate::error::ValidationError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstantConfig {
    /// Fixed slip set point, m/s.
    pub v_slip_set: f64,
}

impl Default for ConstantConfig {
    fn default() -> Self {
        Self { v_slip_set: 1.0 }
    }
}

impl ConstantConfig {
    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut e = ValidationError::default();
        if !(self.v_slip_set.is_finite() && self.v_slip_set > 0.0) {
            e.push("ConstantConfig.v_slip_set", "must be > 0");
        }
        e.into_result()
    }
}

/// Open-loop slip reference: the set point, whatever the inputs.
pub fn constant_slip(_inputs: &StrategyInputs, v_slip_set: f64) -> StrategyDecision {
    StrategyDecision::slip(v_slip_set, StrategyDebug::None)
}

#[derive(Debug, Clone)]
pub struct ConstantSlip {
    v_slip_set: f64,
}

impl ConstantSlip {
    pub fn new(v_slip_set: f64) -> Self {
        Self { v_slip_set }
    }
}

impl SlipStrategy for ConstantSlip {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Constant
    }

    fn reset(&mut self, _inputs: &StrategyInputs) {}

    fn update(&mut self, inputs: &StrategyInputs) -> StrategyDecision {
        constant_slip(inputs, self.v_slip_set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_point_is_passed_through() {
        let i = StrategyInputs::default();
        assert_eq!(constant_slip(&i, 1.0).v_slip_ref, Some(1.0));
        assert_eq!(constant_slip(&i, 0.5).v_slip_ref, Some(0.5));
        let mut s = ConstantSlip::new(1.0);
        let busy = StrategyInputs {
            te_hat: 7.0,
            v_slip: 0.4,
            mu_hat: 0.1,
            ..i
        };
        assert_eq!(s.update(&busy).v_slip_ref, Some(1.0));
    }
}
