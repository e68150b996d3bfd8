use super::sweep::{ResultRow, SweepResult};
use crate::asymptotics::{fit_power_law, q_law_fit, RateFit, RateModel};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

pub const RESULTS_CSV: &str = "results.csv";
pub const TIMINGS_CSV: &str = "timings.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const GRADIENT_SVG: &str = "gradient_vs_epsilon.svg";
pub const CAPACITY_SVG: &str = "capacity_vs_log_epsilon.svg";

pub fn write_results_csv<W: Write>(writer: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results_csv<R: Read>(reader: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Fits for one value of α, over the rows that succeeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSummary {
    pub alpha: f64,
    pub omega: f64,
    pub rows: usize,
    pub failed_rows: usize,
    /// Log-corrected fit of the gap gradient against ε.
    pub gradient_fit: Option<RateFit>,
    pub gradient_fit_error: Option<String>,
    /// `(slope, intercept, r²)` of `Q` against `|ln ε|`.
    pub q_law: Option<(f64, f64, f64)>,
    pub normalized_band: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub rows: usize,
    pub failed_rows: usize,
    pub groups: Vec<AlphaSummary>,
}

fn key(x: f64) -> u64 {
    x.to_bits()
}

pub fn summarize(rows: &[ResultRow]) -> Summary {
    let mut groups: BTreeMap<(u64, u64), Vec<&ResultRow>> = BTreeMap::new();
    let mut order = Vec::new();
    for r in rows {
        let k = (key(r.alpha), key(r.omega));
        if !groups.contains_key(&k) {
            order.push(k);
        }
        groups.entry(k).or_default().push(r);
    }
    let groups = order
        .into_iter()
        .map(|k| {
            let g = &groups[&k];
            let ok: Vec<&&ResultRow> = g.iter().filter(|r| r.is_ok() || r.sup_gradient.is_some()).collect();
            let grad: Vec<(f64, f64)> = ok
                .iter()
                .filter_map(|r| r.sup_gradient.map(|v| (r.epsilon, v)))
                .collect();
            let (gradient_fit, gradient_fit_error) = match fit_power_law(&grad, RateModel::PowerOverLog) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let qs: Vec<(f64, f64)> = ok.iter().filter_map(|r| r.q.map(|q| (r.epsilon, q))).collect();
            let norm: Vec<f64> = ok.iter().filter_map(|r| r.normalized_gradient).collect();
            AlphaSummary {
                alpha: g[0].alpha,
                omega: g[0].omega,
                rows: g.len(),
                failed_rows: g.iter().filter(|r| !r.is_ok()).count(),
                gradient_fit,
                gradient_fit_error,
                q_law: q_law_fit(&qs).ok(),
                normalized_band: (!norm.is_empty()).then(|| {
                    (
                        norm.iter().cloned().fold(f64::INFINITY, f64::min),
                        norm.iter().cloned().fold(0.0, f64::max),
                    )
                }),
            }
        })
        .collect();
    Summary {
        rows: rows.len(),
        failed_rows: rows.iter().filter(|r| !r.is_ok()).count(),
        groups,
    }
}

/// Writes the result table, wall times, summary and both plots into `dir`.
pub fn emit_report(result: &SweepResult, dir: &Path) -> Result<Vec<PathBuf>> {
    if result.rows.is_empty() {
        return Err(Error::Domain("no results to report".into()));
    }
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let path = dir.join(RESULTS_CSV);
    write_results_csv(std::fs::File::create(&path)?, &result.rows)?;
    written.push(path);

    let path = dir.join(TIMINGS_CSV);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["alpha", "epsilon", "omega", "wall_seconds"])?;
    for (r, t) in result.rows.iter().zip(&result.wall_seconds) {
        w.write_record([r.alpha.to_string(), r.epsilon.to_string(), r.omega.to_string(), format!("{t:.6}")])?;
    }
    w.flush()?;
    written.push(path);

    let summary = summarize(&result.rows);
    let path = dir.join(SUMMARY_JSON);
    std::fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n")?;
    written.push(path);

    let path = dir.join(GRADIENT_SVG);
    std::fs::write(&path, gradient_plot(&result.rows, &summary))?;
    written.push(path);

    let path = dir.join(CAPACITY_SVG);
    std::fs::write(&path, capacity_plot(&result.rows))?;
    written.push(path);
    Ok(written)
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
    line: Option<Vec<(f64, f64)>>,
}

/// Minimal scatter-plus-line chart in plot coordinates.
fn render(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 20.0, 40.0, 50.0);
    let all = series
        .iter()
        .flat_map(|s| s.points.iter().chain(s.line.iter().flatten()))
        .filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
    let sy = |y: f64| h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - left - right,
        h - top - bottom
    );
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{fx:.3}</text>"#,
            sx(fx),
            h - bottom + 16.0
        );
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{fy:.3}</text>"#, left - 6.0, sy(fy) + 4.0);
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (left + w - right) / 2.0,
        h - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        (top + h - bottom) / 2.0,
        (top + h - bottom) / 2.0,
        escape(y_label)
    );
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for &(x, y) in ser.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{color}"/>"#, sx(x), sy(y));
        }
        if let Some(line) = &ser.line {
            let pts: Vec<String> = line.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-dasharray="5,3"/>"#,
                pts.join(" ")
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            left + 10.0,
            top + 16.0 + 15.0 * i as f64,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn gradient_plot(rows: &[ResultRow], summary: &Summary) -> String {
    let series: Vec<Series> = summary
        .groups
        .iter()
        .map(|g| {
            let points: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.alpha == g.alpha && r.omega == g.omega)
                .filter_map(|r| r.sup_gradient.map(|v| (r.epsilon.log10(), v.log10())))
                .collect();
            // Fitted model v = e^b ε^s / |ln ε| drawn through the sample range.
            let line = g.gradient_fit.as_ref().map(|f| {
                f.samples
                    .iter()
                    .map(|&(e, _)| {
                        let v = (f.intercept + f.slope * e.ln()).exp() / e.ln().abs();
                        (e.log10(), v.log10())
                    })
                    .collect()
            });
            let label = match &g.gradient_fit {
                Some(f) => format!("α = {}, ω = {}: slope {:.3}", g.alpha, g.omega, f.slope),
                None => format!("α = {}, ω = {}", g.alpha, g.omega),
            };
            Series { label, points, line }
        })
        .collect();
    render("gap gradient against gap width", "log10 ε", "log10 sup |∇h|", &series)
}

fn capacity_plot(rows: &[ResultRow]) -> String {
    let mut alphas: Vec<f64> = Vec::new();
    for r in rows {
        if !alphas.contains(&r.alpha) {
            alphas.push(r.alpha);
        }
    }
    let series: Vec<Series> = alphas
        .iter()
        .map(|&a| {
            let mut seen = Vec::new();
            let points: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.alpha == a)
                .filter_map(|r| r.q.map(|q| (r.epsilon.ln().abs(), q)))
                .filter(|p| {
                    let fresh = !seen.contains(&p.0.to_bits());
                    seen.push(p.0.to_bits());
                    fresh
                })
                .collect();
            let line = q_law_fit(&points.iter().map(|&(l, q)| ((-l).exp(), q)).collect::<Vec<_>>())
                .ok()
                .map(|(s, b, _)| points.iter().map(|&(l, _)| (l, b + s * l)).collect());
            Series {
                label: format!("α = {a}"),
                points,
                line,
            }
        })
        .collect();
    render("capacity sum against |ln ε|", "|ln ε|", "Q", &series)
}
