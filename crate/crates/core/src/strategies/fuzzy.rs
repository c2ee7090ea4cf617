//! Mamdani fuzzy tracker on torque and slip increments.
//!
//! Inputs are the increments of the filtered torque estimate and filtered
//! slip over one update period. Each is fuzzified into five triangular
//! sets, the 5x5 rule table is evaluated with min for AND and max for
//! aggregation, and the clipped output sets are defuzzified by centroid.
//! The crisp output is added to the slip reference.

use serde::{Deserialize, Serialize};

use super::{SlipStrategy, StrategyDebug, StrategyDecision, StrategyInputs, StrategyKind};
use crate::error::ValidationError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FuzzyLabel {
    NB,
    NS,
    Z,
    PS,
    PB,
}

impl FuzzyLabel {
    pub const ALL: [FuzzyLabel; 5] = [
        FuzzyLabel::NB,
        FuzzyLabel::NS,
        FuzzyLabel::Z,
        FuzzyLabel::PS,
        FuzzyLabel::PB,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Sign of the label: -1, 0 or +1.
    pub fn sign(self) -> i8 {
        match self {
            FuzzyLabel::NB | FuzzyLabel::NS => -1,
            FuzzyLabel::Z => 0,
            FuzzyLabel::PS | FuzzyLabel::PB => 1,
        }
    }

    fn from_sign_and_size(sign: i8, big: bool) -> Self {
        match (sign, big) {
            (0, _) => FuzzyLabel::Z,
            (s, true) if s > 0 => FuzzyLabel::PB,
            (_, true) => FuzzyLabel::NB,
            (s, false) if s > 0 => FuzzyLabel::PS,
            (_, false) => FuzzyLabel::NS,
        }
    }
}

/// Rule table rows are slip-increment labels NB..PB, columns are
/// torque-increment labels NB..PB.
pub type RuleTable = [[FuzzyLabel; 5]; 5];

/// Output label = sign(dT * dv) applied to the magnitude of dT, with the
/// Z row and Z column all Z.
pub fn default_rule_table() -> RuleTable {
    let mut table = [[FuzzyLabel::Z; 5]; 5];
    for (r, row_label) in FuzzyLabel::ALL.iter().enumerate() {
        for (c, col_label) in FuzzyLabel::ALL.iter().enumerate() {
            let sign = row_label.sign() * col_label.sign();
            let big = matches!(col_label, FuzzyLabel::NB | FuzzyLabel::PB);
            table[r][c] = FuzzyLabel::from_sign_and_size(sign, big);
        }
    }
    table
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlcConfig {
    /// Torque-increment breakpoints, N m.
    pub x1_t: f64,
    pub x2_t: f64,
    /// Slip-increment breakpoints, m/s.
    pub x1_v: f64,
    pub x2_v: f64,
    /// Output breakpoints, m/s.
    pub y1: f64,
    pub y2: f64,
    pub rules: RuleTable,
    /// Time between reference updates, s.
    pub update_period: f64,
    /// Input filter constant, s.
    pub tau_filter: f64,
}

impl Default for FlcConfig {
    fn default() -> Self {
        Self {
            x1_t: 7.5,
            x2_t: 15.0,
            x1_v: 0.5,
            x2_v: 1.0,
            y1: 0.25,
            y2: 0.5,
            rules: default_rule_table(),
            update_period: 0.02,
            tau_filter: 0.01,
        }
    }
}

impl FlcConfig {
    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut e = ValidationError::default();
        for (axis, a, b) in [
            ("x_t", self.x1_t, self.x2_t),
            ("x_v", self.x1_v, self.x2_v),
            ("y", self.y1, self.y2),
        ] {
            if !(a.is_finite() && b.is_finite() && 0.0 < a && a < b) {
                e.push(
                    format!("FlcConfig.{axis}"),
                    format!("breakpoints must satisfy 0 < first < second (got {a}, {b})"),
                );
            }
        }
        if !(self.update_period.is_finite() && self.update_period > 0.0) {
            e.push("FlcConfig.update_period", "must be > 0");
        }
        if !(self.tau_filter.is_finite() && self.tau_filter >= 0.0) {
            e.push("FlcConfig.tau_filter", "must be >= 0");
        }
        e.into_result()
    }

    pub fn engine(&self) -> FuzzyEngine {
        FuzzyEngine {
            torque: InputSets::new(self.x1_t, self.x2_t),
            slip: InputSets::new(self.x1_v, self.x2_v),
            output: output_sets(self.y1, self.y2),
            rules: self.rules,
        }
    }
}

/// Triangle with feet `a`, `c` and apex `b`. Infinite feet make shoulders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MembershipSet {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl MembershipSet {
    pub fn degree(&self, x: f64) -> f64 {
        if x <= self.b {
            if self.a == f64::NEG_INFINITY {
                1.0
            } else if x <= self.a {
                0.0
            } else {
                (x - self.a) / (self.b - self.a)
            }
        } else if self.c == f64::INFINITY {
            1.0
        } else if x >= self.c {
            0.0
        } else {
            (self.c - x) / (self.c - self.b)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct InputSets([MembershipSet; 5]);

impl InputSets {
    fn new(x1: f64, x2: f64) -> Self {
        let inf = f64::INFINITY;
        Self([
            MembershipSet { a: -inf, b: -x2, c: -x1 },
            MembershipSet { a: -x2, b: -x1, c: 0.0 },
            MembershipSet { a: -x1, b: 0.0, c: x1 },
            MembershipSet { a: 0.0, b: x1, c: x2 },
            MembershipSet { a: x1, b: x2, c: inf },
        ])
    }

    fn fuzzify(&self, x: f64) -> [f64; 5] {
        self.0.map(|s| s.degree(x))
    }
}

fn output_sets(y1: f64, y2: f64) -> [MembershipSet; 5] {
    let outer = 2.0 * y2 - y1;
    [
        MembershipSet { a: -outer, b: -y2, c: -y1 },
        MembershipSet { a: -y2, b: -y1, c: 0.0 },
        MembershipSet { a: -y1, b: 0.0, c: y1 },
        MembershipSet { a: 0.0, b: y1, c: y2 },
        MembershipSet { a: y1, b: y2, c: outer },
    ]
}

/// Inference engine built from an [`FlcConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyEngine {
    torque: InputSets,
    slip: InputSets,
    output: [MembershipSet; 5],
    rules: RuleTable,
}

impl FuzzyEngine {
    /// Firing strength per output label.
    pub fn strengths(&self, d_torque: f64, d_slip: f64) -> [f64; 5] {
        let mt = self.torque.fuzzify(d_torque);
        let mv = self.slip.fuzzify(d_slip);
        let mut out = [0.0f64; 5];
        for (r, &wv) in mv.iter().enumerate() {
            if wv == 0.0 {
                continue;
            }
            for (c, &wt) in mt.iter().enumerate() {
                let w = wv.min(wt);
                let k = self.rules[r][c].index();
                out[k] = out[k].max(w);
            }
        }
        out
    }

    /// Crisp slip-reference increment, m/s.
    pub fn infer(&self, d_torque: f64, d_slip: f64) -> f64 {
        let h = self.strengths(d_torque, d_slip);
        if h[0] == h[4] && h[1] == h[3] {
            return 0.0;
        }
        centroid(&self.output, &h)
    }
}

fn aggregated(sets: &[MembershipSet; 5], h: &[f64; 5], x: f64) -> f64 {
    sets.iter()
        .zip(h)
        .map(|(s, &hk)| s.degree(x).min(hk))
        .fold(0.0, f64::max)
}

/// Exact centroid of the max of clipped triangles.
///
/// The aggregate is piecewise linear; integrating between every vertex,
/// clip point and edge crossing makes each trapezoid exact.
fn centroid(sets: &[MembershipSet; 5], h: &[f64; 5]) -> f64 {
    let mut edges: Vec<(f64, f64)> = Vec::new();
    let mut xs: Vec<f64> = Vec::new();
    for (s, &hk) in sets.iter().zip(h) {
        if hk <= 0.0 {
            continue;
        }
        xs.extend([s.a, s.b, s.c]);
        edges.push((s.a, s.b));
        edges.push((s.c, s.b));
    }
    let levels: Vec<f64> = h.iter().copied().filter(|&v| v > 0.0).collect();
    for &(foot, apex) in &edges {
        for &lvl in &levels {
            xs.push(foot + lvl * (apex - foot));
        }
    }
    for i in 0..edges.len() {
        for j in i + 1..edges.len() {
            if let Some(x) = edge_crossing(edges[i], edges[j]) {
                xs.push(x);
            }
        }
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup();

    let mut area = 0.0;
    let mut moment = 0.0;
    for w in xs.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (fa, fb) = (aggregated(sets, h, a), aggregated(sets, h, b));
        let len = b - a;
        area += 0.5 * (fa + fb) * len;
        moment += len / 6.0 * (fa * (2.0 * a + b) + fb * (a + 2.0 * b));
    }
    if area > 0.0 {
        moment / area
    } else {
        0.0
    }
}

/// Crossing of two membership edges given as (foot, apex) pairs.
fn edge_crossing(e1: (f64, f64), e2: (f64, f64)) -> Option<f64> {
    // Degree along an edge: (x - foot) / (apex - foot).
    let s1 = 1.0 / (e1.1 - e1.0);
    let s2 = 1.0 / (e2.1 - e2.0);
    if (s1 - s2).abs() < 1e-15 {
        return None;
    }
    let x = (e1.0 * s1 - e2.0 * s2) / (s1 - s2);
    let within = |e: (f64, f64)| x >= e.0.min(e.1) && x <= e.0.max(e.1);
    (within(e1) && within(e2)).then_some(x)
}

#[derive(Debug, Clone)]
pub struct FuzzyTracker {
    cfg: FlcConfig,
    engine: FuzzyEngine,
    v_max: f64,
    v_ref: f64,
    te_f: f64,
    v_f: f64,
    last_te: f64,
    last_v: f64,
    since_update: f64,
    last_debug: StrategyDebug,
}

impl FuzzyTracker {
    pub fn new(cfg: FlcConfig, v_max: f64) -> Self {
        let engine = cfg.engine();
        Self {
            cfg,
            engine,
            v_max,
            v_ref: 0.0,
            te_f: 0.0,
            v_f: 0.0,
            last_te: 0.0,
            last_v: 0.0,
            since_update: 0.0,
            last_debug: StrategyDebug::None,
        }
    }

    pub fn engine(&self) -> &FuzzyEngine {
        &self.engine
    }
}

impl SlipStrategy for FuzzyTracker {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Flc
    }

    fn reset(&mut self, inputs: &StrategyInputs) {
        self.v_ref = inputs.v_slip.clamp(0.0, self.v_max);
        self.te_f = inputs.te_hat;
        self.v_f = inputs.v_slip;
        self.last_te = self.te_f;
        self.last_v = self.v_f;
        self.since_update = 0.0;
        self.last_debug = StrategyDebug::None;
    }

    fn update(&mut self, inputs: &StrategyInputs) -> StrategyDecision {
        let dt = inputs.dt_ctrl;
        let a = dt / (self.cfg.tau_filter + dt);
        self.te_f += a * (inputs.te_hat - self.te_f);
        self.v_f += a * (inputs.v_slip - self.v_f);
        self.since_update += dt;
        if self.since_update >= self.cfg.update_period - 1e-12 {
            self.since_update = 0.0;
            let d_torque = self.te_f - self.last_te;
            let d_slip = self.v_f - self.last_v;
            self.last_te = self.te_f;
            self.last_v = self.v_f;
            let step = self.engine.infer(d_torque, d_slip);
            self.v_ref = (self.v_ref + step).clamp(0.0, self.v_max);
            self.last_debug = StrategyDebug::Fuzzy {
                delta_torque: d_torque,
                delta_slip: d_slip,
                step,
            };
        }
        StrategyDecision::slip(self.v_ref, self.last_debug)
    }
}
