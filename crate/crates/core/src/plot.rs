//! Static SVG charts: the time-domain stack of a run, the adhesion-slip
//! trajectory over the analytic curves, and per-strategy bar charts.

use std::fmt::Write as _;
use std::path::Path;

use crate::adhesion::{mu, AdhesionCurveParams};
use crate::error::{Error, Result};
use crate::scenario::{Comparison, TraceRow};

/// Samples per analytic profile curve in the trajectory plot.
pub const CURVE_POINTS: usize = 500;
/// Longest polyline drawn for one time series.
const MAX_SERIES_POINTS: usize = 4000;

const WIDTH: f64 = 900.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 40.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

#[derive(Debug, Clone, Copy)]
struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.x0 + (x - self.xmin) / (self.xmax - self.xmin) * self.w
    }

    fn py(&self, y: f64) -> f64 {
        self.y0 + self.h - (y - self.ymin) / (self.ymax - self.ymin) * self.h
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 * lo.abs().max(1.0) };
    (lo - pad, hi + pad)
}

fn header(out: &mut String, w: f64, h: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
}

fn axes(out: &mut String, f: &Frame, title: &str, xlabel: &str) {
    let _ = writeln!(
        out,
        r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        f.x0, f.y0, f.w, f.h
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
        f.x0,
        f.y0 - 6.0,
        escape(title)
    );
    for i in 0..=4 {
        let y = f.ymin + (f.ymax - f.ymin) * i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            f.x0 - 4.0,
            f.py(y) + 4.0,
            tick(y)
        );
        let x = f.xmin + (f.xmax - f.xmin) * i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            f.px(x),
            f.y0 + f.h + 14.0,
            tick(x)
        );
    }
    if !xlabel.is_empty() {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            f.x0 + f.w / 2.0,
            f.y0 + f.h + 30.0,
            escape(xlabel)
        );
    }
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn polyline(out: &mut String, f: &Frame, pts: impl Iterator<Item = (f64, f64)>, color: &str, class: &str) {
    let mut d = String::new();
    for (x, y) in pts.filter(|(x, y)| x.is_finite() && y.is_finite()) {
        let _ = write!(d, "{:.2},{:.2} ", f.px(x), f.py(y));
    }
    let _ = writeln!(
        out,
        r#"<polyline class="{class}" fill="none" stroke="{color}" stroke-width="1" points="{}"/>"#,
        d.trim_end()
    );
}

fn legend(out: &mut String, f: &Frame, names: &[&str]) {
    for (i, n) in names.iter().enumerate() {
        let x = f.x0 + f.w - 150.0;
        let y = f.y0 + 14.0 + 14.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            x,
            y - 4.0,
            x + 18.0,
            y - 4.0,
            COLORS[i % COLORS.len()],
            x + 22.0,
            y,
            escape(n)
        );
    }
}

/// Four stacked panels: torques, speeds, slip and adhesion against time.
pub fn render_time_stack(rows: &[TraceRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("trace"));
    }
    type Series = (&'static str, fn(&TraceRow) -> f64);
    let panels: [(&str, Vec<Series>); 4] = [
        (
            "torque [N m]",
            vec![
                ("Te_cmd", |r| r.te_cmd),
                ("Te_limited", |r| r.te_limited),
                ("Te_hat", |r| r.te_hat),
            ],
        ),
        (
            "motor speed [rad/s]",
            vec![("omega_W", |r| r.omega_w), ("omega_R", |r| r.omega_r)],
        ),
        (
            "slip velocity [m/s]",
            vec![("v_slip_ref", |r| r.v_slip_ref), ("v_slip", |r| r.v_slip)],
        ),
        (
            "adhesion",
            vec![("mu_hat", |r| r.mu_hat), ("mu_actual", |r| r.mu_actual)],
        ),
    ];
    let panel_h = 160.0;
    let gap = 45.0;
    let height = MARGIN_T + 4.0 * panel_h + 3.0 * gap + MARGIN_B;
    let stride = rows.len().div_ceil(MAX_SERIES_POINTS).max(1);
    let (t0, t1) = (rows[0].t, rows[rows.len() - 1].t);
    let (t0, t1) = if t1 > t0 { (t0, t1) } else { (t0 - 0.5, t0 + 0.5) };

    let mut out = String::new();
    header(&mut out, WIDTH, height);
    for (i, (title, series)) in panels.iter().enumerate() {
        let (ymin, ymax) = range(series.iter().flat_map(|(_, f)| rows.iter().map(f)));
        let frame = Frame {
            x0: MARGIN_L,
            y0: MARGIN_T + i as f64 * (panel_h + gap),
            w: WIDTH - MARGIN_L - MARGIN_R,
            h: panel_h,
            xmin: t0,
            xmax: t1,
            ymin,
            ymax,
        };
        axes(&mut out, &frame, title, if i == 3 { "t [s]" } else { "" });
        for (j, (name, f)) in series.iter().enumerate() {
            polyline(
                &mut out,
                &frame,
                rows.iter().step_by(stride).map(|r| (r.t, f(r))),
                COLORS[j],
                name,
            );
        }
        let names: Vec<&str> = series.iter().map(|(n, _)| *n).collect();
        legend(&mut out, &frame, &names);
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Adhesion estimate against slip velocity, over each profile's analytic
/// curve sampled at [`CURVE_POINTS`] points.
pub fn render_trajectory(rows: &[TraceRow], profiles: &[AdhesionCurveParams]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("trace"));
    }
    let vmax = rows
        .iter()
        .map(|r| r.v_slip)
        .filter(|v| v.is_finite())
        .fold(1.0_f64, f64::max)
        .min(5.0);
    let curves: Vec<Vec<(f64, f64)>> = profiles
        .iter()
        .map(|p| {
            (0..CURVE_POINTS)
                .map(|i| {
                    let v = vmax * i as f64 / (CURVE_POINTS - 1) as f64;
                    (v, mu(p, v))
                })
                .collect()
        })
        .collect();
    let (_, ymax) = range(
        rows.iter()
            .map(|r| r.mu_hat)
            .chain(curves.iter().flatten().map(|&(_, m)| m)),
    );
    let height = 520.0;
    let frame = Frame {
        x0: MARGIN_L,
        y0: MARGIN_T,
        w: WIDTH - MARGIN_L - MARGIN_R,
        h: height - MARGIN_T - MARGIN_B,
        xmin: 0.0,
        xmax: vmax,
        ymin: 0.0,
        ymax: ymax.max(0.1),
    };
    let mut out = String::new();
    header(&mut out, WIDTH, height);
    axes(&mut out, &frame, "adhesion vs slip velocity", "v_slip [m/s]");
    for (i, c) in curves.iter().enumerate() {
        polyline(
            &mut out,
            &frame,
            c.iter().copied(),
            COLORS[(i + 1) % COLORS.len()],
            &format!("curve {}", profiles[i].label),
        );
    }
    let stride = rows.len().div_ceil(MAX_SERIES_POINTS).max(1);
    polyline(
        &mut out,
        &frame,
        rows.iter()
            .step_by(stride)
            .filter(|r| r.v_slip >= 0.0)
            .map(|r| (r.v_slip, r.mu_hat)),
        COLORS[0],
        "trajectory",
    );
    let mut names = vec!["mu_hat"];
    names.extend(profiles.iter().map(|p| p.label.as_str()));
    legend(&mut out, &frame, &names);
    out.push_str("</svg>\n");
    Ok(out)
}

/// One bar per `(label, value)`. Every bar carries its value in
/// `data-value` and the chart's pixels-per-unit in `data-scale`. A
/// non-finite value is drawn as an empty slot marked "n/c".
pub fn render_bars(title: &str, unit: &str, items: &[(String, f64)]) -> Result<String> {
    if items.is_empty() {
        return Err(Error::EmptyInput("bar chart"));
    }
    let width = (MARGIN_L + MARGIN_R + 90.0 * items.len() as f64).max(360.0);
    let height = 320.0;
    let plot_h = height - MARGIN_T - MARGIN_B;
    let top = items
        .iter()
        .map(|(_, v)| *v)
        .filter(|v| v.is_finite())
        .fold(0.0_f64, f64::max);
    let top = if top > 0.0 { top * 1.1 } else { 1.0 };
    let scale = plot_h / top;
    let base = MARGIN_T + plot_h;

    let mut out = String::new();
    header(&mut out, width, height);
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN_L}" y="{:.2}">{} [{}]</text>"#,
        MARGIN_T - 10.0,
        escape(title),
        escape(unit)
    );
    let _ = writeln!(
        out,
        r#"<line x1="{MARGIN_L}" y1="{base:.2}" x2="{:.2}" y2="{base:.2}" stroke="black"/>"#,
        width - MARGIN_R
    );
    let _ = writeln!(out, r#"<g class="bars" data-scale="{scale}" data-base="{base}">"#);
    for (i, (label, v)) in items.iter().enumerate() {
        let x = MARGIN_L + 20.0 + 90.0 * i as f64;
        if v.is_finite() {
            let h = v.max(0.0) * scale;
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{}" width="50" height="{h}" fill="{}" data-label="{}" data-value="{v}"/>"#,
                base - h,
                COLORS[i % COLORS.len()],
                escape(label)
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                x + 25.0,
                base - h - 4.0,
                tick(*v)
            );
        } else {
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" data-label="{}">n/c</text>"#,
                x + 25.0,
                base - 4.0,
                escape(label)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            x + 25.0,
            base + 16.0,
            escape(label)
        );
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

/// Search-time and ripple bar charts, one pair per condition, named
/// `search_time_<condition>.svg` and `ripple_<condition>.svg`.
pub fn render_comparison(c: &Comparison) -> Result<Vec<(String, String)>> {
    let Some(first) = c.runs.first() else {
        return Err(Error::EmptyInput("comparison"));
    };
    let mut files = Vec::new();
    for cond in &first.metrics.conditions {
        let pick = |f: fn(&crate::metrics::ConditionMetrics) -> f64| -> Vec<(String, f64)> {
            c.runs
                .iter()
                .filter_map(|r| {
                    let m = r.metrics.condition(&cond.label)?;
                    Some((r.scenario.strategy.name().to_string(), f(m)))
                })
                .collect()
        };
        files.push((
            format!("search_time_{}.svg", cond.label),
            render_bars(
                &format!("search time, {}", cond.label),
                "s",
                &pick(|m| m.search_time_or_inf()),
            )?,
        ));
        files.push((
            format!("ripple_{}.svg", cond.label),
            render_bars(
                &format!("torque ripple, {}", cond.label),
                "N m",
                &pick(|m| m.torque_ripple),
            )?,
        ));
    }
    Ok(files)
}

pub fn write_svg(path: &Path, svg: &str) -> Result<()> {
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adhesion::builtin_profile;

    fn rows() -> Vec<TraceRow> {
        (0..100)
            .map(|k| TraceRow {
                t: k as f64 * 1e-3,
                v_slip: 0.002 * k as f64,
                mu_hat: 0.001 * k as f64,
                ..TraceRow::default()
            })
            .collect()
    }

    #[test]
    fn empty_inputs_are_rejected() {
        assert!(matches!(render_time_stack(&[]), Err(Error::EmptyInput(_))));
        assert!(matches!(render_trajectory(&[], &[]), Err(Error::EmptyInput(_))));
        assert!(matches!(render_bars("x", "s", &[]), Err(Error::EmptyInput(_))));
        let empty = Comparison { runs: vec![] };
        assert!(matches!(render_comparison(&empty), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn time_stack_has_four_panels() {
        let svg = render_time_stack(&rows()).unwrap();
        assert_eq!(svg.matches(r#"fill="none" stroke="black""#).count(), 4);
        assert_eq!(svg.matches("<polyline").count(), 9);
    }

    #[test]
    fn curves_have_500_points() {
        let p = vec![builtin_profile("P1").unwrap(), builtin_profile("P3").unwrap()];
        let svg = render_trajectory(&rows(), &p).unwrap();
        let curves: Vec<&str> = svg
            .lines()
            .filter(|l| l.contains(r#"class="curve "#))
            .collect();
        assert_eq!(curves.len(), 2);
        for l in curves {
            let pts = l.split("points=\"").nth(1).unwrap();
            assert_eq!(pts.split_whitespace().count(), CURVE_POINTS);
        }
    }
}
