//! Standalone SVG charts built from report rows.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::report::CsvRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Tsr,
    Tns,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Tsr => "tsr",
            Metric::Tns => "tns",
        }
    }

    fn value(&self, r: &CsvRow) -> Option<f64> {
        match self {
            Metric::Tsr => Some(r.tsr),
            Metric::Tns => r.tns,
        }
    }
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Seed-averaged `metric` per policy, keyed by x position.
fn series(rows: &[CsvRow], metric: Metric) -> (BTreeMap<String, Vec<(f64, f64)>>, bool) {
    let has_axis = rows.iter().all(|r| r.axis_value.is_some()) && !rows.is_empty();
    let mut order: Vec<String> = Vec::new();
    let mut acc: BTreeMap<(String, u64), (f64, f64, usize)> = BTreeMap::new();
    for r in rows {
        if !order.contains(&r.policy) {
            order.push(r.policy.clone());
        }
        let x = if has_axis {
            r.axis_value.unwrap_or(0.0)
        } else {
            order.iter().position(|p| *p == r.policy).unwrap_or(0) as f64
        };
        if let Some(v) = metric.value(r) {
            let e = acc.entry((r.policy.clone(), x.to_bits())).or_insert((x, 0.0, 0));
            e.1 += v;
            e.2 += 1;
        }
    }
    let mut out: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for ((policy, _), (x, sum, n)) in acc {
        out.entry(policy).or_default().push((x, sum / n as f64));
    }
    for pts in out.values_mut() {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    (out, has_axis)
}

/// Line chart of `metric` against the sweep axis, or a dot chart per policy without one.
pub fn svg(rows: &[CsvRow], metric: Metric) -> String {
    let (series, has_axis) = series(rows, metric);
    let xs: Vec<f64> = series.values().flatten().map(|p| p.0).collect();
    let ys: Vec<f64> = series.values().flatten().map(|p| p.1).collect();
    let (mut x0, mut x1) = bounds(&xs);
    let (mut y0, mut y1) = bounds(&ys);
    if metric == Metric::Tsr {
        y0 = y0.min(0.0);
        y1 = y1.max(1.0);
    }
    if x1 - x0 < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let py = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);
    let axis_name = rows.first().map(|r| r.axis.as_str()).filter(|a| !a.is_empty() && has_axis);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{m}" y1="{t}" x2="{m}" y2="{b}" stroke="black"/>"#,
        m = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN,
        t = MARGIN
    );
    for i in 0..=4 {
        let y = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
            MARGIN - 6.0,
            py(y) + 4.0,
            fmt(y)
        );
    }
    let mut ticks: Vec<f64> = xs.clone();
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    for x in &ticks {
        let label = if has_axis {
            fmt(*x)
        } else {
            series
                .iter()
                .find(|(_, pts)| pts.iter().any(|p| p.0 == *x))
                .map(|(k, _)| k.clone())
                .unwrap_or_default()
        };
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
            px(*x),
            H - MARGIN + 18.0,
            escape(&label)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 12.0,
        escape(axis_name.unwrap_or("policy"))
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">{}</text>"#,
        H / 2.0,
        H / 2.0,
        metric.name()
    );
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        if pts.len() > 1 {
            let path: Vec<String> = pts.iter().map(|(x, y)| format!("{:.1},{:.1}", px(*x), py(*y))).collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
                path.join(" ")
            );
        }
        for (x, y) in pts {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.1}" cy="{:.1}" r="4" fill="{color}"/>"#,
                px(*x),
                py(*y)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            W - MARGIN + 6.0,
            MARGIN + 16.0 * i as f64,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}

fn fmt(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".into()
    } else {
        s.into()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(policy: &str, x: f64, tsr: f64) -> CsvRow {
        CsvRow {
            policy: policy.into(),
            task: "correlated".into(),
            config_hash: "0".into(),
            seed: 0,
            episodes: 10,
            tsr,
            tsr_ci_lo: 0.0,
            tsr_ci_hi: 1.0,
            tns: Some(2.0),
            pc_recip: None,
            axis: "correlation_length".into(),
            axis_value: Some(x),
        }
    }

    #[test]
    fn one_polyline_per_policy() {
        let rows = vec![row("SP", 0.0, 0.5), row("SP", 5.0, 0.6), row("FMP-2", 0.0, 0.5), row("FMP-2", 5.0, 0.7)];
        let out = svg(&rows, Metric::Tsr);
        assert_eq!(out.matches("<polyline").count(), 2);
        assert!(out.contains("correlation_length"));
        assert_eq!(out, svg(&rows, Metric::Tsr));
    }
}
