//! Particle swarm search over slip velocity.
//!
//! Particles are candidate slip references. A particle is evaluated by
//! dwelling the reference just below and just above its position and
//! taking the torque-over-slip secant between the two settled samples;
//! the fitness is the magnitude of that slope, which is smallest at the
//! adhesion peak. After the swarm contracts (or the iteration cap is hit)
//! the best position is held until torque or slip move away from the
//! level recorded at the start of the hold, which restarts the search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SlipStrategy, StrategyDebug, StrategyDecision, StrategyInputs, StrategyKind};
use crate::error::ValidationError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsoConfig {
    pub np: usize,
    /// Inertia weight.
    pub w: f64,
    pub c1: f64,
    pub c2: f64,
    /// Slip search range `[v_min, v_max]`, m/s.
    pub v_bounds: [f64; 2],
    /// Starting positions; empty spreads the swarm evenly over the range.
    pub init_positions: Vec<f64>,
    /// Dwell per probe side, s.
    pub settle: f64,
    /// Fraction of the dwell, at its end, that is averaged.
    pub sample_fraction: f64,
    /// Probe width around a particle, m/s.
    pub probe: f64,
    pub spread_tol: f64,
    pub iteration_cap: u32,
    /// Torque change that restarts the search while holding, N m.
    pub reset_dt: f64,
    /// Slip change that restarts the search while holding, m/s.
    pub reset_dv: f64,
    /// Filter constant of the hold monitor, s.
    pub tau_monitor: f64,
    /// Reference smoothing between probe positions, s. Zero disables it.
    pub tau_ref: f64,
    pub rng_seed: u64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            np: 4,
            w: 0.6,
            c1: 0.8,
            c2: 0.8,
            v_bounds: [0.05, 0.8],
            init_positions: Vec::new(),
            settle: 0.1,
            sample_fraction: 0.4,
            probe: 0.04,
            spread_tol: 0.02,
            iteration_cap: 25,
            reset_dt: 1.0,
            reset_dv: 0.3,
            tau_monitor: 0.05,
            tau_ref: 0.01,
            rng_seed: 0,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut e = ValidationError::default();
        if self.np < 2 {
            e.push("PsoConfig.np", format!("particle count must be >= 2 (got {})", self.np));
        }
        for (name, v) in [("w", self.w), ("c1", self.c1), ("c2", self.c2)] {
            if !(v > 0.0 && v <= 1.0) {
                e.push(
                    format!("PsoConfig.{name}"),
                    format!("coefficient must lie in (0, 1] (got {v})"),
                );
            }
        }
        let [lo, hi] = self.v_bounds;
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi) {
            e.push("PsoConfig.v_bounds", "need 0 <= v_min < v_max");
        }
        if !self.init_positions.is_empty() {
            if self.init_positions.len() != self.np {
                e.push("PsoConfig.init_positions", "need exactly np entries");
            }
            if self.init_positions.iter().any(|x| !(*x >= lo && *x <= hi)) {
                e.push("PsoConfig.init_positions", "positions must lie inside v_bounds");
            }
        }
        for (name, v) in [
            ("settle", self.settle),
            ("probe", self.probe),
            ("spread_tol", self.spread_tol),
            ("reset_dt", self.reset_dt),
            ("reset_dv", self.reset_dv),
            ("tau_monitor", self.tau_monitor),
        ] {
            if !(v.is_finite() && v > 0.0) {
                e.push(format!("PsoConfig.{name}"), "must be > 0");
            }
        }
        if !(self.tau_ref.is_finite() && self.tau_ref >= 0.0) {
            e.push("PsoConfig.tau_ref", "must be >= 0");
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            e.push("PsoConfig.sample_fraction", "must lie in (0, 1]");
        }
        if self.iteration_cap == 0 {
            e.push("PsoConfig.iteration_cap", "must be >= 1");
        }
        e.into_result()
    }

    pub fn initial_positions(&self) -> Vec<f64> {
        if !self.init_positions.is_empty() {
            return self.init_positions.clone();
        }
        let [lo, hi] = self.v_bounds;
        let n = self.np.max(1);
        (0..n)
            .map(|i| lo + (i as f64 + 0.5) * (hi - lo) / n as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SwarmPhase {
    #[default]
    Searching,
    Holding,
}

#[derive(Debug, Clone, Copy, Default)]
struct Window {
    elapsed: f64,
    sum_t: f64,
    sum_v: f64,
    n: u32,
}

impl Window {
    fn push(&mut self, inputs: &StrategyInputs, settle: f64, fraction: f64) {
        self.elapsed += inputs.dt_ctrl;
        if self.elapsed > settle * (1.0 - fraction) + 1e-12 {
            self.sum_t += inputs.te_hat;
            self.sum_v += inputs.v_slip;
            self.n += 1;
        }
    }

    fn done(&self, settle: f64) -> bool {
        self.elapsed >= settle - 1e-12 && self.n > 0
    }

    fn mean(&self) -> (f64, f64) {
        let n = self.n as f64;
        (self.sum_t / n, self.sum_v / n)
    }
}

#[derive(Debug, Clone, Copy)]
enum Stage {
    Probe {
        particle: usize,
        upper: bool,
        low: (f64, f64),
        window: Window,
    },
    Hold {
        window: Window,
        reference: Option<(f64, f64)>,
    },
}

#[derive(Debug, Clone)]
pub struct SwarmTracker {
    cfg: PsoConfig,
    rng: ChaCha8Rng,
    x: Vec<f64>,
    u: Vec<f64>,
    p_best: Vec<f64>,
    p_fit: Vec<f64>,
    g_best: f64,
    g_fit: f64,
    iteration: u32,
    resets: u32,
    stage: Stage,
    te_f: f64,
    v_f: f64,
    v_ref: f64,
    v_out: Option<f64>,
    fitness_log: Vec<f64>,
}

impl SwarmTracker {
    pub fn new(cfg: PsoConfig) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        let mut s = Self {
            rng,
            x: Vec::new(),
            u: Vec::new(),
            p_best: Vec::new(),
            p_fit: Vec::new(),
            g_best: 0.0,
            g_fit: f64::INFINITY,
            iteration: 0,
            resets: 0,
            stage: Stage::Hold {
                window: Window::default(),
                reference: None,
            },
            te_f: 0.0,
            v_f: 0.0,
            v_ref: 0.0,
            v_out: None,
            fitness_log: Vec::new(),
            cfg,
        };
        s.initialize();
        s
    }

    fn initialize(&mut self) {
        self.x = self.cfg.initial_positions();
        self.u = vec![0.0; self.x.len()];
        self.p_best = self.x.clone();
        self.p_fit = vec![f64::INFINITY; self.x.len()];
        self.g_best = self.x[0];
        self.g_fit = f64::INFINITY;
        self.iteration = 0;
        self.fitness_log.clear();
        self.start_probe(0);
    }

    fn start_probe(&mut self, particle: usize) {
        self.stage = Stage::Probe {
            particle,
            upper: false,
            low: (0.0, 0.0),
            window: Window::default(),
        };
        self.v_ref = self.probe_ref(particle, false);
    }

    fn probe_ref(&self, particle: usize, upper: bool) -> f64 {
        let half = 0.5 * self.cfg.probe;
        let x = self.x[particle];
        let v = if upper { x + half } else { x - half };
        v.max(0.0)
    }

    pub fn phase(&self) -> SwarmPhase {
        if matches!(self.stage, Stage::Probe { .. }) {
            SwarmPhase::Searching
        } else {
            SwarmPhase::Holding
        }
    }

    pub fn g_best(&self) -> (f64, f64) {
        (self.g_best, self.g_fit)
    }

    pub fn iteration(&self) -> u32 {
        self.iteration
    }

    pub fn resets(&self) -> u32 {
        self.resets
    }

    pub fn positions(&self) -> &[f64] {
        &self.x
    }

    /// Best fitness after each completed iteration since the last reset.
    pub fn fitness_history(&self) -> &[f64] {
        &self.fitness_log
    }

    fn score(&mut self, particle: usize, fitness: f64) {
        if fitness < self.p_fit[particle] {
            self.p_fit[particle] = fitness;
            self.p_best[particle] = self.x[particle];
        }
        if fitness < self.g_fit {
            self.g_fit = fitness;
            self.g_best = self.x[particle];
        }
    }

    fn finish_iteration(&mut self) {
        self.iteration += 1;
        self.fitness_log.push(self.g_fit);
        let [lo, hi] = self.cfg.v_bounds;
        for i in 0..self.x.len() {
            let r1: f64 = self.rng.random();
            let r2: f64 = self.rng.random();
            self.u[i] = self.cfg.w * self.u[i]
                + self.cfg.c1 * r1 * (self.p_best[i] - self.x[i])
                + self.cfg.c2 * r2 * (self.g_best - self.x[i]);
            self.x[i] = (self.x[i] + self.u[i]).clamp(lo, hi);
        }
        let spread = self.x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - self.x.iter().copied().fold(f64::INFINITY, f64::min);
        if spread < self.cfg.spread_tol || self.iteration >= self.cfg.iteration_cap {
            self.v_ref = self.g_best;
            self.stage = Stage::Hold {
                window: Window::default(),
                reference: None,
            };
        } else {
            self.start_probe(0);
        }
    }

    fn debug(&self) -> StrategyDebug {
        StrategyDebug::Swarm {
            phase: self.phase(),
            iteration: self.iteration,
            g_best: self.g_best,
            g_best_fitness: self.g_fit,
            resets: self.resets,
        }
    }
}

impl SlipStrategy for SwarmTracker {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Pso
    }

    fn reset(&mut self, inputs: &StrategyInputs) {
        self.te_f = inputs.te_hat;
        self.v_f = inputs.v_slip;
        self.v_out = Some(inputs.v_slip.clamp(0.0, self.cfg.v_bounds[1]));
        self.initialize();
    }

    fn update(&mut self, inputs: &StrategyInputs) -> StrategyDecision {
        let a = inputs.dt_ctrl / (self.cfg.tau_monitor + inputs.dt_ctrl);
        self.te_f += a * (inputs.te_hat - self.te_f);
        self.v_f += a * (inputs.v_slip - self.v_f);
        let (settle, frac) = (self.cfg.settle, self.cfg.sample_fraction);

        match &mut self.stage {
            Stage::Probe {
                particle,
                upper,
                low,
                window,
            } => {
                window.push(inputs, settle, frac);
                if window.done(settle) {
                    let sample = window.mean();
                    let p = *particle;
                    if !*upper {
                        *low = sample;
                        *upper = true;
                        *window = Window::default();
                        self.v_ref = self.probe_ref(p, true);
                    } else {
                        let (t_lo, v_lo) = *low;
                        let (t_hi, v_hi) = sample;
                        let dv = v_hi - v_lo;
                        let fitness = if dv.abs() < 1e-4 {
                            f64::INFINITY
                        } else {
                            ((t_hi - t_lo) / dv).abs()
                        };
                        self.score(p, fitness);
                        if p + 1 < self.x.len() {
                            self.start_probe(p + 1);
                        } else {
                            self.finish_iteration();
                        }
                    }
                }
            }
            Stage::Hold { window, reference } => match *reference {
                None => {
                    window.push(inputs, settle, frac);
                    if window.done(settle) {
                        *reference = Some((self.te_f, self.v_f));
                    }
                }
                Some((t0, v0)) => {
                    if (self.te_f - t0).abs() > self.cfg.reset_dt
                        || (self.v_f - v0).abs() > self.cfg.reset_dv
                    {
                        self.resets += 1;
                        self.initialize();
                    }
                }
            },
        }
        let out = match self.v_out {
            Some(prev) if self.cfg.tau_ref > 0.0 => {
                let b = inputs.dt_ctrl / (self.cfg.tau_ref + inputs.dt_ctrl);
                prev + b * (self.v_ref - prev)
            }
            _ => self.v_ref,
        };
        self.v_out = Some(out);
        StrategyDecision::slip(out, self.debug())
    }
}
