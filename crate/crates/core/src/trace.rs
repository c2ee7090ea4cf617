//! Trace CSV: fixed header, `,` separated, `\n` terminated, six
//! significant digits per value.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result, TraceParseError};
use crate::scenario::TraceRow;

pub const CSV_HEADER: &str = "t,Te_cmd,Te_limited,Te_hat,omega_W,omega_R,v_slip_ref,v_slip,mu_hat,mu_actual";

const COLUMNS: usize = 10;

/// Format with six significant digits, switching to exponent notation
/// for very small or large magnitudes.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        return format!("{m}e{exp}");
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn row_values(r: &TraceRow) -> [f64; COLUMNS] {
    [
        r.t,
        r.te_cmd,
        r.te_limited,
        r.te_hat,
        r.omega_w,
        r.omega_r,
        r.v_slip_ref,
        r.v_slip,
        r.mu_hat,
        r.mu_actual,
    ]
}

pub fn trace_to_csv(rows: &[TraceRow]) -> String {
    let mut out = String::with_capacity(80 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        for (i, v) in row_values(r).iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", format_sig6(*v));
        }
        out.push('\n');
    }
    out
}

/// Write the trace to `path`. An empty trace is rejected.
pub fn emit_trace_csv(rows: &[TraceRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("trace"));
    }
    std::fs::write(path, trace_to_csv(rows)).map_err(|e| Error::io(path, e))
}

/// Parse text produced by [`trace_to_csv`].
pub fn parse_trace_csv(text: &str) -> std::result::Result<Vec<TraceRow>, TraceParseError> {
    let mut lines = text.split('\n');
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        Some(h) => {
            return Err(TraceParseError {
                line: 1,
                message: format!("unexpected header `{}`", truncate(h)),
            })
        }
        None => {
            return Err(TraceParseError {
                line: 1,
                message: "missing header".into(),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        if line.is_empty() {
            continue;
        }
        let mut v = [0.0; COLUMNS];
        let mut n = 0;
        for field in line.split(',') {
            if n == COLUMNS {
                return Err(TraceParseError {
                    line: lineno,
                    message: format!("more than {COLUMNS} fields"),
                });
            }
            v[n] = field.parse().map_err(|_| TraceParseError {
                line: lineno,
                message: format!("field {} is not a number: `{}`", n + 1, truncate(field)),
            })?;
            n += 1;
        }
        if n != COLUMNS {
            return Err(TraceParseError {
                line: lineno,
                message: format!("expected {COLUMNS} fields, found {n}"),
            });
        }
        rows.push(TraceRow {
            t: v[0],
            te_cmd: v[1],
            te_limited: v[2],
            te_hat: v[3],
            omega_w: v[4],
            omega_r: v[5],
            v_slip_ref: v[6],
            v_slip: v[7],
            mu_hat: v[8],
            mu_actual: v[9],
        });
    }
    Ok(rows)
}

fn truncate(s: &str) -> String {
    s.chars().take(40).collect()
}
