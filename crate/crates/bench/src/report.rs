//! CSV / JSON / SVG writers. Floats carry 17 significant digits and rows are
//! written in a fixed order, so equal inputs give byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bench::{BenchmarkOutput, BenchmarkSummary, TrialReport};
use crate::propagate::PropagationReport;
use crate::RunError;

/// Formats with 17 significant digits; non-finite values become `NaN`/`inf`.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

fn write_file(path: PathBuf, contents: &str) -> Result<PathBuf, RunError> {
    fs::write(&path, contents).map_err(io_err(&path))?;
    Ok(path)
}

/// Converts a serializable value to JSON with every float re-rendered at 17
/// significant digits (`null` for non-finite values).
pub fn to_json_17(value: &impl Serialize) -> Result<String, RunError> {
    let v = serde_json::to_value(value).map_err(|e| RunError::Config(e.to_string()))?;
    let mut out = String::new();
    write_json(&v, 0, &mut out);
    out.push('\n');
    Ok(out)
}

fn write_json(v: &serde_json::Value, indent: usize, out: &mut String) {
    use serde_json::Value;
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Number(n) if n.is_f64() => {
            out.push_str(&fmt17(n.as_f64().unwrap()));
        }
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) if items.iter().all(|i| !i.is_array() && !i.is_object()) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_json(item, indent, out);
            }
            out.push(']');
        }
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_json(item, indent + 1, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            out.push_str("{\n");
            for (i, (k, item)) in map.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&serde_json::to_string(k).unwrap());
                out.push_str(": ");
                write_json(item, indent + 1, out);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
        other => out.push_str(&other.to_string()),
    }
}

fn sorted(reports: &[TrialReport]) -> Vec<&TrialReport> {
    let mut v: Vec<&TrialReport> = reports.iter().collect();
    v.sort_by_key(|r| (r.trial, r.estimator.tag()));
    v
}

pub fn errors_csv(reports: &[TrialReport], times: &[f64]) -> String {
    let mut s = String::from("trial,estimator,t,state_index,abs_error\n");
    for r in sorted(reports) {
        let m = &r.per_step_abs_error;
        for k in 0..m.nrows() {
            let t = times.get(k).copied().unwrap_or(f64::NAN);
            for d in 0..m.ncols() {
                let _ = writeln!(s, "{},{},{},{},{}", r.trial, r.estimator.tag(), fmt17(t), d, fmt17(m[(k, d)]));
            }
        }
    }
    s
}

pub fn mse_csv(reports: &[TrialReport]) -> String {
    let mut s = String::from("trial,estimator,mse\n");
    for r in sorted(reports) {
        let _ = writeln!(s, "{},{},{}", r.trial, r.estimator.tag(), fmt17(r.mse));
    }
    s
}

const PALETTE: [&str; 3] = ["firebrick", "steelblue", "seagreen"];

/// One panel per error column, one polyline per estimator.
pub fn curves_svg(summary: &BenchmarkSummary) -> String {
    let (pw, ph, margin) = (320.0, 180.0, 40.0);
    let cols = summary.mean_error_curves.values().next().and_then(|c| c.first()).map_or(0, |r| r.len());
    let per_row = cols.clamp(1, 4);
    let rows = cols.div_ceil(per_row).max(1);
    let width = per_row as f64 * (pw + margin) + margin;
    let height = rows as f64 * (ph + margin) + margin + 20.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let t_max = summary.times.last().copied().unwrap_or(1.0).max(f64::MIN_POSITIVE);
    for d in 0..cols {
        let x0 = margin + (d % per_row) as f64 * (pw + margin);
        let y0 = margin + (d / per_row) as f64 * (ph + margin);
        let e_max =
            summary.mean_error_curves.values().flat_map(|c| c.iter().map(move |r| r[d])).fold(0.0_f64, f64::max).max(f64::MIN_POSITIVE);
        let _ = writeln!(s, r#"<rect x="{x0}" y="{y0}" width="{pw}" height="{ph}" fill="none" stroke="gray"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="{}">state {d} (max {:.3e})</text>"#, x0 + 4.0, y0 - 4.0, e_max);
        if let (Some(a), Some(b)) = (summary.first_impact_t, summary.last_impact_t) {
            let (xa, xb) = (x0 + a / t_max * pw, x0 + b / t_max * pw);
            let _ = writeln!(
                s,
                r#"<rect x="{xa:.2}" y="{y0}" width="{:.2}" height="{ph}" fill="lightgray" opacity="0.6"/>"#,
                (xb - xa).max(0.5)
            );
        }
        for (i, (tag, curve)) in summary.mean_error_curves.iter().enumerate() {
            let pts: Vec<String> = summary
                .times
                .iter()
                .zip(curve)
                .map(|(t, r)| format!("{:.2},{:.2}", x0 + t / t_max * pw, y0 + ph - r[d] / e_max * ph))
                .collect();
            let dash = if tag == "SKF" { r#" stroke-dasharray="5,3""# } else { "" };
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{}" stroke-width="1.2"{dash} points="{}"/>"#,
                PALETTE[i % PALETTE.len()],
                pts.join(" ")
            );
        }
    }
    for (i, tag) in summary.mean_error_curves.keys().enumerate() {
        let y = height - 8.0;
        let x = margin + i as f64 * 90.0;
        let _ = writeln!(s, r#"<text x="{x}" y="{y}" fill="{}">{tag}</text>"#, PALETTE[i % PALETTE.len()]);
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `errors.csv` (unless disabled), `mse.csv`, `summary.json` and
/// optionally `curves.svg`; returns the written paths.
pub fn write_reports(out: &BenchmarkOutput, dir: &Path, errors: bool, curves: bool) -> Result<Vec<PathBuf>, RunError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    if errors {
        written.push(write_file(dir.join("errors.csv"), &errors_csv(&out.reports, &out.summary.times))?);
    }
    written.push(write_file(dir.join("mse.csv"), &mse_csv(&out.reports))?);
    written.push(write_file(dir.join("summary.json"), &to_json_17(&out.summary)?)?);
    if curves {
        written.push(write_file(dir.join("curves.svg"), &curves_svg(&out.summary))?);
    }
    Ok(written)
}

pub fn propagation_csv(report: &PropagationReport) -> String {
    let mut s = String::from("case,sigma_g,sigma_theta_diag,n_used,excluded,kl_saltation_only,kl_uncertainty_aware,kl_saltation_only_reverse,kl_uncertainty_aware_reverse,status\n");
    let opt = |v: Option<f64>| v.map(fmt17).unwrap_or_default();
    for c in &report.cases {
        let theta: Vec<String> = c.sigma_theta_diag.iter().map(|v| fmt17(*v)).collect();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            c.case.label(),
            fmt17(c.sigma_g),
            theta.join(";"),
            c.n_used,
            c.excluded,
            opt(c.kl_saltation_only),
            opt(c.kl_uncertainty_aware),
            opt(c.kl_saltation_only_reverse),
            opt(c.kl_uncertainty_aware_reverse),
            c.status.replace(',', ";")
        );
    }
    s
}

pub fn write_propagation(report: &PropagationReport, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    Ok(vec![
        write_file(dir.join("propagation.csv"), &propagation_csv(report))?,
        write_file(dir.join("propagation.json"), &to_json_17(report)?)?,
    ])
}
