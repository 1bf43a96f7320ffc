//! CSV and SVG renderings of study results.

use std::fmt::Write as _;

use super::{CriticalValues, DiscrepancyCurve, PowerResult, SimResult};
use crate::error::{Error, Result};

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// One row per statistic and nominal level.
pub fn size_csv(r: &SimResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["statistic", "alpha", "rate", "rejections", "evaluated", "failed", "failed_replicates", "reps"])
        .map_err(csv_err)?;
    for s in &r.statistics {
        for (i, a) in r.alphas.iter().enumerate() {
            let rate = if s.unsupported { "unsupported".to_string() } else { s.rates[i].to_string() };
            w.write_record([
                s.statistic.name().to_string(),
                a.to_string(),
                rate,
                s.rejections[i].to_string(),
                s.evaluated.to_string(),
                s.failed.to_string(),
                r.failures.to_string(),
                r.reps.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    finish(w)
}

pub fn critical_values_csv(cv: &CriticalValues) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["statistic", "alpha", "critical_value"]).map_err(csv_err)?;
    for (s, vals) in &cv.values {
        for (a, v) in cv.alphas.iter().zip(vals) {
            w.write_record([s.name().to_string(), a.to_string(), v.to_string()]).map_err(csv_err)?;
        }
    }
    finish(w)
}

/// One row per statistic, alternative and nominal level.
pub fn power_csv(p: &PowerResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["statistic", "epsilon", "alpha", "rate"]).map_err(csv_err)?;
    for (s, rows) in &p.rates {
        for (e, row) in p.epsilons.iter().zip(rows) {
            for (a, rate) in p.alphas.iter().zip(row) {
                w.write_record([s.name().to_string(), e.to_string(), a.to_string(), rate.to_string()])
                    .map_err(csv_err)?;
            }
        }
    }
    finish(w)
}

/// Grid column followed by one column per statistic.
pub fn discrepancy_csv(c: &DiscrepancyCurve) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["asymptotic_p".to_string()];
    header.extend(c.curves.keys().map(|s| s.name().to_string()));
    w.write_record(&header).map_err(csv_err)?;
    for (i, p) in c.grid.iter().enumerate() {
        let mut row = vec![p.to_string()];
        row.extend(c.curves.values().map(|v| v[i].to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    finish(w)
}

const COLORS: [&str; 6] = ["#1b1b1b", "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e"];

/// Line plot of the discrepancy curves with axes and a legend.
pub fn discrepancy_svg(c: &DiscrepancyCurve) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (60.0, 130.0, 20.0, 50.0);
    let xmax = c.grid.iter().copied().fold(0.0, f64::max);
    let finite = c.curves.values().flatten().copied().filter(|v| v.is_finite());
    let (mut ylo, mut yhi) = finite.fold((0.0f64, 0.0f64), |(a, b), v| (a.min(v), b.max(v)));
    if yhi - ylo < 1e-9 {
        ylo -= 0.5;
        yhi += 0.5;
    }
    let pad = 0.05 * (yhi - ylo);
    let (ylo, yhi) = (ylo - pad, yhi + pad);
    let sx = |x: f64| left + (w - left - right) * x / xmax;
    let sy = |y: f64| top + (h - top - bottom) * (yhi - y) / (yhi - ylo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<line x1="{l}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{l}" y1="{t}" x2="{l}" y2="{b}" stroke="black"/>"#,
        l = left,
        r = w - right,
        t = top,
        b = h - bottom
    );
    let _ = writeln!(
        s,
        r##"<line x1="{l}" y1="{z:.2}" x2="{r}" y2="{z:.2}" stroke="#999" stroke-dasharray="4 3"/>"##,
        l = left,
        r = w - right,
        z = sy(0.0)
    );
    for i in 0..=5 {
        let x = xmax * i as f64 / 5.0;
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{:.2}</text>"#, sx(x), h - bottom + 16.0, x);
        let y = ylo + (yhi - ylo) * i as f64 / 5.0;
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{:.2}</text>"#, left - 6.0, sy(y) + 4.0, y);
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{}" text-anchor="middle">asymptotic p-value</text>"#,
        (left + w - right) / 2.0,
        h - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">relative discrepancy</text>"#,
        (top + h - bottom) / 2.0,
        (top + h - bottom) / 2.0
    );
    for (k, (stat, ys)) in c.curves.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = c
            .grid
            .iter()
            .zip(ys)
            .filter(|(_, y)| y.is_finite())
            .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ =
            writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let ly = top + 14.0 + 16.0 * k as f64;
        let lx = w - right + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, stat.name());
    }
    s.push_str("</svg>\n");
    s
}
