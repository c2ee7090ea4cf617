//! Adhesion-slip curve family and time-varying condition schedules.
//!
//! The curve is the three-parameter exponential form
//!
//! ```text
//! mu(v) = c1 * (1 - exp(-c2 * v)) - c3 * v        (v >= 0)
//! mu(-v) = -mu(v)
//! ```
//!
//! which rises steeply through the micro-slip region, peaks once and then
//! falls linearly through the macro-slip region.

use serde::{Deserialize, Serialize};

use crate::error::ValidationError;

/// Grid step used by [`peak_oracle`].
pub const ORACLE_GRID_STEP: f64 = 1e-4;

/// Slip range over which curves are searched and plotted, m/s.
pub const DEFAULT_V_SLIP_MAX: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdhesionCurveParams {
    /// Peak-shaping gain.
    pub c1: f64,
    /// Rise rate, s/m.
    pub c2: f64,
    /// Falling slope, s/m.
    pub c3: f64,
    #[serde(default = "custom_label")]
    pub label: String,
}

fn custom_label() -> String {
    "custom".to_string()
}

impl AdhesionCurveParams {
    pub fn new(c1: f64, c2: f64, c3: f64, label: impl Into<String>) -> Self {
        Self {
            c1,
            c2,
            c3,
            label: label.into(),
        }
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut v = ValidationError::default();
        let field = |f: &str| format!("AdhesionCurveParams[{}].{f}", self.label);
        if !(self.c1.is_finite() && self.c1 > 0.0) {
            v.push(field("c1"), "must be > 0");
        }
        if !(self.c2.is_finite() && self.c2 > 0.0) {
            v.push(field("c2"), "must be > 0");
        }
        if !(self.c3.is_finite() && self.c3 >= 0.0) {
            v.push(field("c3"), "must be >= 0");
        }
        v.into_result()
    }

    /// Slip velocity where dmu/dv = 0, or `None` when the curve is
    /// monotone over the positive half-line.
    pub fn analytic_peak(&self) -> Option<f64> {
        if self.c3 <= 0.0 || self.c1 * self.c2 <= self.c3 {
            return None;
        }
        Some((self.c1 * self.c2 / self.c3).ln() / self.c2)
    }

    /// Linear blend `self + w * (other - self)` of the three coefficients.
    pub fn lerp(&self, other: &Self, w: f64) -> Self {
        Self {
            c1: self.c1 + w * (other.c1 - self.c1),
            c2: self.c2 + w * (other.c2 - self.c2),
            c3: self.c3 + w * (other.c3 - self.c3),
            label: if w >= 0.5 {
                other.label.clone()
            } else {
                self.label.clone()
            },
        }
    }
}

/// Adhesion coefficient at the given slip velocity (odd extension for v < 0).
///
/// The linear falling term would eventually turn the coefficient negative
/// at very large slip; it is floored at zero there.
pub fn mu(params: &AdhesionCurveParams, v_slip: f64) -> f64 {
    let v = v_slip.abs();
    let m = (params.c1 * (1.0 - (-params.c2 * v).exp()) - params.c3 * v).max(0.0);
    if v_slip < 0.0 {
        -m
    } else {
        m
    }
}

/// Analytic derivative dmu/dv (even function of v).
pub fn mu_slope(params: &AdhesionCurveParams, v_slip: f64) -> f64 {
    let v = v_slip.abs();
    let raw = params.c1 * (1.0 - (-params.c2 * v).exp()) - params.c3 * v;
    if raw < 0.0 {
        return 0.0;
    }
    params.c1 * params.c2 * (-params.c2 * v).exp() - params.c3
}

/// Exhaustive grid search for the maximum of `mu` on `[0, v_max]`.
///
/// Returns `(v_slip_peak, mu_peak)`. The grid always includes both end
/// points, with a step no larger than [`ORACLE_GRID_STEP`].
pub fn peak_oracle(params: &AdhesionCurveParams, v_max: f64) -> (f64, f64) {
    assert!(v_max > 0.0, "peak_oracle needs v_max > 0");
    let n = (v_max / ORACLE_GRID_STEP).ceil() as usize;
    let step = v_max / n as f64;
    let mut best = (0.0, mu(params, 0.0));
    for i in 1..=n {
        let v = i as f64 * step;
        let m = mu(params, v);
        if m > best.1 {
            best = (v, m);
        }
    }
    best
}

/// Fit a curve through a peak `(v_peak, mu_peak)` that passes through
/// `(v_ref, mu_ref)` on the falling branch.
///
/// With `x = c2 * v_peak` the ratio `mu(v_ref) / mu_peak` depends on `x`
/// only, so `x` is found by bisection and the coefficients follow in
/// closed form.
pub fn calibrate(
    label: &str,
    v_peak: f64,
    mu_peak: f64,
    v_ref: f64,
    mu_ref: f64,
) -> Result<AdhesionCurveParams, ValidationError> {
    let mut err = ValidationError::default();
    if !(v_peak > 0.0 && mu_peak > 0.0) {
        err.push(format!("calibration[{label}]"), "peak must be positive");
    }
    if !(v_ref > v_peak) {
        err.push(
            format!("calibration[{label}].v_ref"),
            "reference slip must lie beyond the peak",
        );
    }
    if !(mu_ref > 0.0 && mu_ref < mu_peak) {
        err.push(
            format!("calibration[{label}].mu_ref"),
            "reference adhesion must lie in (0, mu_peak)",
        );
    }
    err.into_result()?;

    let r = v_ref / v_peak;
    let target = mu_ref / mu_peak;
    let ratio = |x: f64| {
        let e = (-x).exp();
        (1.0 - (-x * r).exp() - x * r * e) / (1.0 - (1.0 + x) * e)
    };
    let (mut lo, mut hi) = (1e-3, 60.0);
    if !(ratio(lo) < target && ratio(hi) > target) {
        let mut err = ValidationError::default();
        err.push(format!("calibration[{label}]"), "targets are not reachable");
        return Err(err);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ratio(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    let c1 = mu_peak / (1.0 - (1.0 + x) * (-x).exp());
    let c2 = x / v_peak;
    let c3 = c1 * c2 * (-x).exp();
    Ok(AdhesionCurveParams::new(c1, c2, c3, label))
}

/// Calibration targets for the built-in profiles:
/// `(label, v_peak, mu_peak, v_ref, mu_ref)`.
const BUILTIN_TARGETS: [(&str, f64, f64, f64, f64); 5] = [
    ("P1", 0.10, 0.45, 1.0, 0.36),
    ("P2", 0.20, 0.30, 1.0, 0.24),
    ("P3", 0.45, 0.20, 1.0, 0.16),
    ("dry", 0.30, 0.60, 1.0, 0.50),
    ("wet", 0.35, 0.25, 1.0, 0.15),
];

/// Labels of the calibrated profiles shipped with the crate.
pub const BUILTIN_PROFILES: [&str; 5] = ["P1", "P2", "P3", "dry", "wet"];

/// Calibrated built-in profile by label (case-insensitive).
pub fn builtin_profile(label: &str) -> Option<AdhesionCurveParams> {
    BUILTIN_TARGETS
        .iter()
        .find(|t| t.0.eq_ignore_ascii_case(label))
        .map(|&(l, vp, mp, vr, mr)| {
            calibrate(l, vp, mp, vr, mr).expect("built-in calibration targets are consistent")
        })
}

/// Calibration target `(v_peak, mu_peak)` of a built-in profile.
pub fn builtin_target(label: &str) -> Option<(f64, f64)> {
    BUILTIN_TARGETS
        .iter()
        .find(|t| t.0.eq_ignore_ascii_case(label))
        .map(|t| (t.1, t.2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleSegment {
    pub start_time: f64,
    pub params: AdhesionCurveParams,
}

/// Piecewise profile timeline with first-order blending between segments.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSchedule {
    segments: Vec<ScheduleSegment>,
    transition_time: f64,
}

impl ProfileSchedule {
    pub fn new(
        segments: Vec<ScheduleSegment>,
        transition_time: f64,
    ) -> Result<Self, ValidationError> {
        let mut err = ValidationError::default();
        if segments.is_empty() {
            err.push("ProfileSchedule.segments", "at least one segment is required");
        } else if segments[0].start_time != 0.0 {
            err.push("ProfileSchedule.segments[0].start_time", "must be 0");
        }
        for (i, w) in segments.windows(2).enumerate() {
            if !(w[1].start_time > w[0].start_time) {
                err.push(
                    format!("ProfileSchedule.segments[{}].start_time", i + 1),
                    "start times must be strictly increasing",
                );
            }
        }
        if !(transition_time >= 0.0 && transition_time.is_finite()) {
            err.push("ProfileSchedule.transition_time", "must be >= 0");
        }
        for s in &segments {
            if let Err(e) = s.params.validate() {
                err.extend(e);
            }
        }
        err.into_result()?;
        Ok(Self {
            segments,
            transition_time,
        })
    }

    pub fn constant(params: AdhesionCurveParams) -> Self {
        Self {
            segments: vec![ScheduleSegment {
                start_time: 0.0,
                params,
            }],
            transition_time: 0.0,
        }
    }

    pub fn segments(&self) -> &[ScheduleSegment] {
        &self.segments
    }

    pub fn transition_time(&self) -> f64 {
        self.transition_time
    }

    /// Index of the segment active at time `t`.
    pub fn segment_index(&self, t: f64) -> usize {
        self.segments
            .iter()
            .rposition(|s| s.start_time <= t)
            .unwrap_or(0)
    }

    /// Blended curve parameters at time `t`.
    pub fn params_at(&self, t: f64) -> AdhesionCurveParams {
        let idx = self.segment_index(t);
        if self.transition_time == 0.0 || idx == 0 {
            return self.segments[idx].params.clone();
        }
        // Walk forward so a switch arriving mid-blend starts from the
        // partially blended curve rather than the previous target.
        let mut current = self.segments[0].params.clone();
        for i in 1..=idx {
            let seg = &self.segments[i];
            let end = if i == idx {
                t
            } else {
                self.segments[i + 1].start_time
            };
            let gap = (-(end - seg.start_time) / self.transition_time).exp();
            current = seg.params.lerp(&current, gap);
        }
        current
    }
}

/// Blended curve parameters at time `t`.
pub fn scheduled_params(schedule: &ProfileSchedule, t: f64) -> AdhesionCurveParams {
    schedule.params_at(t)
}
