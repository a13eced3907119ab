//! Minimal hand-rolled SVG line/step charts. No plotting dependency: the
//! files are deterministic text, stable under diffing.

use std::fmt::Write;

const W: f64 = 860.0;
const H: f64 = 360.0;
const ML: f64 = 64.0;
const MR: f64 = 18.0;
const MT: f64 = 34.0;
const MB: f64 = 46.0;

const COLORS: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

pub struct Series {
    pub label: String,
    pub values: Vec<f64>,
}

/// Renders step-plot series over scheduling steps.
pub fn step_chart(title: &str, y_label: &str, n_k: usize, series: &[Series]) -> String {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in series {
        for &v in &s.values {
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    if (hi - lo).abs() < 1e-12 {
        hi = lo + 1.0;
    }
    let pad = 0.06 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);

    let x = |k: f64| ML + (W - ML - MR) * k / n_k as f64;
    let y = |v: f64| H - MB - (H - MT - MB) * (v - lo) / (hi - lo);

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{title}</text>\n",
        W / 2.0
    );
    // Axes.
    let _ = write!(
        svg,
        "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{:.1}\" stroke=\"#333\"/>\n\
         <line x1=\"{ML}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#333\"/>\n",
        H - MB,
        H - MB,
        W - MR,
        H - MB
    );
    // Y ticks.
    for t in 0..=4 {
        let v = lo + (hi - lo) * t as f64 / 4.0;
        let yy = y(v);
        let _ = write!(
            svg,
            "<line x1=\"{:.1}\" y1=\"{yy:.1}\" x2=\"{:.1}\" y2=\"{yy:.1}\" stroke=\"#ccc\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{v:.3}</text>\n",
            ML,
            W - MR,
            ML - 6.0,
            yy + 3.0
        );
    }
    // X ticks every few steps.
    let stride = (n_k / 8).max(1);
    for k in (0..=n_k).step_by(stride) {
        let xx = x(k as f64);
        let _ = write!(
            svg,
            "<text x=\"{xx:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">{k}</text>\n",
            H - MB + 16.0
        );
    }
    let _ = write!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">step</text>\n\
         <text x=\"16\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{y_label}</text>\n",
        (ML + W - MR) / 2.0,
        H - 10.0,
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0
    );
    // Series as step plots.
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut d = String::new();
        for (k, &v) in s.values.iter().enumerate() {
            if !v.is_finite() {
                continue;
            }
            let x0 = x(k as f64);
            let x1 = x(k as f64 + 1.0);
            let yy = y(v);
            if d.is_empty() {
                let _ = write!(d, "M {x0:.2} {yy:.2} ");
            } else {
                let _ = write!(d, "L {x0:.2} {yy:.2} ");
            }
            let _ = write!(d, "L {x1:.2} {yy:.2} ");
        }
        if !d.is_empty() {
            let _ = write!(svg, "<path d=\"{d}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\"/>\n");
        }
        let lx = ML + 10.0 + 150.0 * i as f64;
        let _ = write!(
            svg,
            "<rect x=\"{lx:.1}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            MT - 8.0,
            lx + 14.0,
            MT + 1.0,
            s.label
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Position timeline: y axis is the station id, gaps are transit.
pub fn position_chart(title: &str, n_k: usize, station_ids: &[u32], series: &[(String, Vec<Option<u32>>)]) -> String {
    let n_st = station_ids.len().max(1);
    let x = |k: f64| ML + (W - ML - MR) * k / n_k as f64;
    let y_of = |slot: usize| H - MB - (H - MT - MB) * (slot as f64 + 0.5) / n_st as f64;

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{title}</text>\n",
        W / 2.0
    );
    for (slot, id) in station_ids.iter().enumerate() {
        let yy = y_of(slot);
        let _ = write!(
            svg,
            "<line x1=\"{ML}\" y1=\"{yy:.1}\" x2=\"{:.1}\" y2=\"{yy:.1}\" stroke=\"#eee\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">st {id}</text>\n",
            W - MR,
            ML - 6.0,
            yy + 3.0
        );
    }
    let stride = (n_k / 8).max(1);
    for k in (0..=n_k).step_by(stride) {
        let xx = x(k as f64);
        let _ = write!(
            svg,
            "<text x=\"{xx:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">{k}</text>\n",
            H - MB + 16.0
        );
    }
    for (i, (label, positions)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        for (k, pos) in positions.iter().enumerate() {
            if let Some(id) = pos {
                let slot = station_ids.iter().position(|s| s == id).unwrap_or(0);
                let yy = y_of(slot) + (i as f64) * 3.0 - 1.5;
                let _ = write!(
                    svg,
                    "<line x1=\"{:.2}\" y1=\"{yy:.2}\" x2=\"{:.2}\" y2=\"{yy:.2}\" stroke=\"{color}\" stroke-width=\"3\"/>\n",
                    x(k as f64),
                    x(k as f64 + 1.0)
                );
            }
        }
        let lx = ML + 10.0 + 120.0 * i as f64;
        let _ = write!(
            svg,
            "<rect x=\"{lx:.1}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\">{label}</text>\n",
            MT - 8.0,
            lx + 14.0,
            MT + 1.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}
