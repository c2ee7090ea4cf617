//! Comparison metrics over a finished trace.
//!
//! Each condition (one profile segment, clipped at torque-off) is scored
//! on its own:
//! - search time: from slip-loop activation (or the condition start, if
//!   later) to the first instant from which the adhesion estimate stays
//!   within 5% of the condition's peak for at least 1 s;
//! - torque ripple: peak-to-peak of the linearly detrended torque estimate
//!   over the last 5 s of the condition;
//! - steady adhesion: mean adhesion estimate over the same 5 s.

use crate::adhesion::{peak_oracle, DEFAULT_V_SLIP_MAX};
use crate::scenario::{Condition, Trace, TraceRow};

/// Relative band around the peak that counts as found.
pub const SEARCH_BAND: f64 = 0.05;
/// How long the estimate must stay in the band, s.
pub const SEARCH_HOLD: f64 = 1.0;
/// Length of the steady-state window at the end of each condition, s.
pub const STEADY_WINDOW: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionMetrics {
    pub label: String,
    pub start: f64,
    pub end: f64,
    pub v_peak: f64,
    pub mu_peak: f64,
    /// `None` when the band was never held (not converged).
    pub search_time: Option<f64>,
    pub torque_ripple: f64,
    pub mu_steady: f64,
    pub v_slip_steady: f64,
    pub peak_utilization: f64,
}

impl ConditionMetrics {
    /// Search time with "not converged" mapped to infinity.
    pub fn search_time_or_inf(&self) -> f64 {
        self.search_time.unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunMetrics {
    pub conditions: Vec<ConditionMetrics>,
    /// RMS of slip reference minus slip while the loop was armed, m/s.
    pub slip_rms_error: f64,
}

impl RunMetrics {
    pub fn condition(&self, label: &str) -> Option<&ConditionMetrics> {
        self.conditions.iter().find(|c| c.label == label)
    }
}

/// Time from `t0` until `mu` first enters `[target*(1-band), target*(1+band)]`
/// and then stays there for `hold` seconds, all before `t_end`.
pub fn search_time(
    rows: &[TraceRow],
    t0: f64,
    t_end: f64,
    target: f64,
    band: f64,
    hold: f64,
) -> Option<f64> {
    let tol = band * target.abs();
    let mut run_start: Option<f64> = None;
    for r in rows.iter().filter(|r| r.t >= t0 - 1e-12 && r.t < t_end) {
        if (r.mu_hat - target).abs() <= tol {
            let s = *run_start.get_or_insert(r.t);
            if r.t - s >= hold - 1e-9 {
                return Some(s - t0);
            }
        } else {
            run_start = None;
        }
    }
    None
}

/// Peak-to-peak of `y` after removing its least-squares line in `t`.
pub fn detrended_peak_to_peak(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len().min(y.len());
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    let tm = t[..n].iter().sum::<f64>() / nf;
    let ym = y[..n].iter().sum::<f64>() / nf;
    let (mut sty, mut stt) = (0.0, 0.0);
    for i in 0..n {
        sty += (t[i] - tm) * (y[i] - ym);
        stt += (t[i] - tm).powi(2);
    }
    let slope = if stt > 0.0 { sty / stt } else { 0.0 };
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        let r = y[i] - ym - slope * (t[i] - tm);
        lo = lo.min(r);
        hi = hi.max(r);
    }
    hi - lo
}

fn condition_metrics(trace: &Trace, c: &Condition) -> ConditionMetrics {
    let (v_peak, mu_peak) = peak_oracle(&c.params, DEFAULT_V_SLIP_MAX);
    let search = trace
        .activations
        .first()
        .filter(|&&a| a < c.end)
        .and_then(|&a| {
            let t0 = a.max(c.start);
            search_time(&trace.rows, t0, c.end, mu_peak, SEARCH_BAND, SEARCH_HOLD)
        });

    let w0 = (c.end - STEADY_WINDOW).max(c.start);
    let window: Vec<&TraceRow> = trace
        .rows
        .iter()
        .filter(|r| r.t >= w0 - 1e-12 && r.t < c.end - 1e-12)
        .collect();
    let ts: Vec<f64> = window.iter().map(|r| r.t).collect();
    let te: Vec<f64> = window.iter().map(|r| r.te_hat).collect();
    let mean = |f: fn(&TraceRow) -> f64| {
        if window.is_empty() {
            0.0
        } else {
            window.iter().map(|r| f(r)).sum::<f64>() / window.len() as f64
        }
    };
    let mu_steady = mean(|r| r.mu_hat);
    ConditionMetrics {
        label: c.label.clone(),
        start: c.start,
        end: c.end,
        v_peak,
        mu_peak,
        search_time: search,
        torque_ripple: detrended_peak_to_peak(&ts, &te),
        mu_steady,
        v_slip_steady: mean(|r| r.v_slip),
        peak_utilization: if mu_peak > 0.0 { mu_steady / mu_peak } else { 0.0 },
    }
}

/// Score a trace against its conditions.
pub fn compute_metrics(trace: &Trace, conditions: &[Condition]) -> RunMetrics {
    let metric_end = conditions.iter().map(|c| c.end).fold(0.0, f64::max);
    let (mut sum, mut n) = (0.0, 0usize);
    for r in trace.rows.iter().filter(|r| r.t < metric_end) {
        if trace.active_at(r.t) {
            sum += (r.v_slip_ref - r.v_slip).powi(2);
            n += 1;
        }
    }
    RunMetrics {
        conditions: conditions
            .iter()
            .map(|c| condition_metrics(trace, c))
            .collect(),
        slip_rms_error: if n > 0 { (sum / n as f64).sqrt() } else { 0.0 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adhesion::builtin_profile;

    fn rows(n: usize, f: impl Fn(f64) -> (f64, f64)) -> Vec<TraceRow> {
        (0..n)
            .map(|k| {
                let t = k as f64 * 1e-3;
                let (mu, te) = f(t);
                TraceRow {
                    t,
                    mu_hat: mu,
                    te_hat: te,
                    ..TraceRow::default()
                }
            })
            .collect()
    }

    #[test]
    fn at_peak_from_start_is_zero() {
        let r = rows(3000, |_| (0.45, 5.0));
        assert_eq!(search_time(&r, 0.0, 3.0, 0.45, 0.05, 1.0), Some(0.0));
    }

    #[test]
    fn never_in_band_is_not_converged() {
        let r = rows(3000, |_| (0.3, 5.0));
        assert_eq!(search_time(&r, 0.0, 3.0, 0.45, 0.05, 1.0), None);
    }

    #[test]
    fn late_entry_is_timed() {
        let r = rows(4000, |t| (if t < 1.5 { 0.2 } else { 0.45 }, 0.0));
        let st = search_time(&r, 0.5, 4.0, 0.45, 0.05, 1.0).unwrap();
        assert!((st - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sinusoid_ripple_is_twice_amplitude() {
        let a = 0.37;
        let r = rows(5000, |t| {
            (0.0, 2.0 + 0.8 * t + a * (std::f64::consts::TAU * 25.0 * t).sin())
        });
        let t: Vec<f64> = r.iter().map(|r| r.t).collect();
        let y: Vec<f64> = r.iter().map(|r| r.te_hat).collect();
        let pp = detrended_peak_to_peak(&t, &y);
        assert!((pp - 2.0 * a).abs() < 0.01 * 2.0 * a, "{pp}");
    }

    #[test]
    fn utilization_uses_oracle_peak() {
        let params = builtin_profile("P1").unwrap();
        let trace = Trace {
            rows: rows(6000, |_| (0.45, 5.0)),
            activations: vec![0.5],
            ..Trace::default()
        };
        let c = Condition {
            label: "P1".into(),
            start: 0.0,
            end: 6.0,
            params,
        };
        let m = compute_metrics(&trace, &[c]);
        let cm = m.condition("P1").unwrap();
        assert!((cm.peak_utilization - 1.0).abs() < 0.01);
        assert_eq!(cm.search_time, Some(0.0));
        assert!(cm.torque_ripple < 1e-9);
    }
}
