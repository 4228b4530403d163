use std::fmt::Write as _;

use super::metrics::{mean_std, smooth, EvalSeries};
use crate::error::{Error, Result};

/// One algorithm's evaluation curves across seeds.
#[derive(Debug, Clone)]
pub struct Curve {
    pub label: String,
    pub runs: Vec<EvalSeries>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

struct Band {
    steps: Vec<f64>,
    mean: Vec<f64>,
    half_std: Vec<f64>,
}

fn band(curve: &Curve, smoothing: f64) -> Result<Band> {
    let len = curve.runs.iter().map(EvalSeries::len).min().unwrap_or(0);
    if len == 0 {
        return Err(Error::InsufficientData(format!("no evaluations for `{}`", curve.label)));
    }
    let steps: Vec<f64> = curve.runs[0].records()[..len].iter().map(|r| r.step as f64).collect();
    let mut mean = Vec::with_capacity(len);
    let mut half_std = Vec::with_capacity(len);
    for k in 0..len {
        let column: Vec<f64> = curve.runs.iter().map(|s| s.records()[k].mean_return).collect();
        let (m, sd) = mean_std(&column);
        mean.push(m);
        half_std.push(0.5 * sd);
    }
    Ok(Band {
        steps,
        mean: smooth(&mean, smoothing)?,
        half_std: smooth(&half_std, smoothing)?,
    })
}

/// Line plot of the seed-mean return per algorithm with a shaded band of
/// half a standard deviation across seeds. Smoothing affects only the drawing.
pub fn svg_curves(curves: &[Curve], smoothing: f64, title: &str) -> Result<String> {
    let bands = curves.iter().map(|c| band(c, smoothing)).collect::<Result<Vec<_>>>()?;
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for b in &bands {
        for k in 0..b.steps.len() {
            x0 = x0.min(b.steps[k]);
            x1 = x1.max(b.steps[k]);
            y0 = y0.min(b.mean[k] - b.half_std[k]);
            y1 = y1.max(b.mean[k] + b.half_std[k]);
        }
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let w = &mut svg;
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .expect("write to string");
    writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#).expect("write to string");
    writeln!(
        w,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    )
    .expect("write to string");
    writeln!(
        w,
        r#"<path d="M{m} {t} V{b} H{r}" fill="none" stroke="black"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    )
    .expect("write to string");
    for (x, anchor, label) in [(MARGIN, "start", x0), (WIDTH - MARGIN, "end", x1)] {
        writeln!(
            w,
            r#"<text x="{x}" y="{}" text-anchor="{anchor}" font-family="sans-serif" font-size="11">{label}</text>"#,
            HEIGHT - MARGIN + 16.0
        )
        .expect("write to string");
    }
    for (y, label) in [(HEIGHT - MARGIN, y0), (MARGIN, y1)] {
        writeln!(
            w,
            r#"<text x="{}" y="{y:.1}" text-anchor="end" font-family="sans-serif" font-size="11">{label:.1}</text>"#,
            MARGIN - 4.0
        )
        .expect("write to string");
    }

    for (i, (b, curve)) in bands.iter().zip(curves).enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut area = String::new();
        for k in 0..b.steps.len() {
            let cmd = if k == 0 { 'M' } else { 'L' };
            write!(area, "{cmd}{:.2} {:.2} ", px(b.steps[k]), py(b.mean[k] + b.half_std[k])).expect("write to string");
        }
        for k in (0..b.steps.len()).rev() {
            write!(area, "L{:.2} {:.2} ", px(b.steps[k]), py(b.mean[k] - b.half_std[k])).expect("write to string");
        }
        writeln!(w, r#"<path d="{}Z" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, area).expect("write to string");
        let line: Vec<String> = (0..b.steps.len())
            .map(|k| format!("{:.2},{:.2}", px(b.steps[k]), py(b.mean[k])))
            .collect();
        writeln!(
            w,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            line.join(" ")
        )
        .expect("write to string");
        writeln!(
            w,
            r#"<text x="{}" y="{}" fill="{color}" font-family="sans-serif" font-size="12">{}</text>"#,
            MARGIN + 8.0,
            MARGIN + 14.0 * (i as f64 + 1.0),
            escape(&curve.label)
        )
        .expect("write to string");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
