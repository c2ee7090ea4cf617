use serde::{Deserialize, Serialize};

use super::{SlipStrategy, StrategyDebug, StrategyDecision, StrategyInputs, StrategyKind};
use crate::error::ValidationError;
use crate::estimation::{ObserverConfig, SlopeEstimator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SgConfig {
    /// Adaptation constant, m^2/s.
    pub alpha: f64,
    /// Time between reference updates, s.
    pub update_period: f64,
}

impl Default for SgConfig {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            update_period: 0.05,
        }
    }
}

impl SgConfig {
    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut e = ValidationError::default();
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            e.push("SgConfig.alpha", "must be > 0");
        }
        if !(self.update_period.is_finite() && self.update_period > 0.0) {
            e.push("SgConfig.update_period", "must be > 0");
        }
        e.into_result()
    }
}

/// `v_next = v_prev + alpha * K`, clamped to `[0, v_max]`.
pub fn steepest_gradient_step(v_prev: f64, slope: f64, alpha: f64, v_max: f64) -> f64 {
    (v_prev + alpha * slope).clamp(0.0, v_max)
}

#[derive(Debug, Clone)]
pub struct SteepestGradient {
    cfg: SgConfig,
    v_max: f64,
    estimator: SlopeEstimator,
    observer_cfg: ObserverConfig,
    prev_ref: f64,
    since_update: f64,
}

impl SteepestGradient {
    pub fn new(cfg: SgConfig, v_max: f64) -> Self {
        Self::with_observer(cfg, v_max, ObserverConfig::default())
    }

    pub fn with_observer(cfg: SgConfig, v_max: f64, observer_cfg: ObserverConfig) -> Self {
        Self {
            cfg,
            v_max,
            estimator: SlopeEstimator::new(&observer_cfg),
            observer_cfg,
            prev_ref: 0.0,
            since_update: 0.0,
        }
    }
}

impl SlipStrategy for SteepestGradient {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Sg
    }

    fn reset(&mut self, inputs: &StrategyInputs) {
        self.estimator = SlopeEstimator::new(&self.observer_cfg);
        self.estimator
            .discrete_gradient(inputs.mu_hat, inputs.v_slip, inputs.dt_ctrl);
        self.prev_ref = inputs.v_slip.clamp(0.0, self.v_max);
        self.since_update = 0.0;
    }

    fn update(&mut self, inputs: &StrategyInputs) -> StrategyDecision {
        let k = self
            .estimator
            .discrete_gradient(inputs.mu_hat, inputs.v_slip, inputs.dt_ctrl);
        self.since_update += inputs.dt_ctrl;
        if self.since_update >= self.cfg.update_period - 1e-12 {
            self.since_update = 0.0;
            self.prev_ref = steepest_gradient_step(self.prev_ref, k, self.cfg.alpha, self.v_max);
        }
        StrategyDecision::slip(self.prev_ref, StrategyDebug::Gradient { slope: k })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_slope_keeps_reference() {
        assert_eq!(steepest_gradient_step(0.25, 0.0, 0.01, 1.5), 0.25);
    }

    #[test]
    fn positive_slope_raises_reference() {
        assert!((steepest_gradient_step(0.10, 2.0, 0.01, 1.5) - 0.12).abs() < 1e-15);
    }

    #[test]
    fn reference_is_clamped() {
        assert_eq!(steepest_gradient_step(0.01, -100.0, 0.01, 1.5), 0.0);
        assert_eq!(steepest_gradient_step(1.4, 100.0, 0.01, 1.5), 1.5);
    }

    #[test]
    fn flat_slope_holds_constant_reference() {
        let mut sg = SteepestGradient::new(SgConfig::default(), 1.5);
        let i = StrategyInputs {
            mu_hat: 0.3,
            v_slip: 0.2,
            dt_ctrl: 1e-3,
            ..StrategyInputs::default()
        };
        sg.reset(&i);
        for _ in 0..500 {
            assert_eq!(sg.update(&i).v_slip_ref, Some(0.2));
        }
    }

    #[test]
    fn reference_moves_once_per_period() {
        let cfg = SgConfig::default();
        let per = (cfg.update_period / 1e-3).round() as usize;
        let mut sg = SteepestGradient::new(cfg, 1.5);
        let at = |k: usize| {
            let v = 0.1 + 1e-3 * k as f64;
            StrategyInputs {
                mu_hat: 0.5 * v,
                v_slip: v,
                dt_ctrl: 1e-3,
                ..StrategyInputs::default()
            }
        };
        sg.reset(&at(0));
        let refs: Vec<f64> = (1..=3 * per).map(|k| sg.update(&at(k)).v_slip_ref.unwrap()).collect();
        let changes = refs.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(changes, 3);
        assert!(refs[3 * per - 1] > 0.1);
    }
}
