//! Minimal SVG plotting: line charts and heatmaps with labelled axes.

use std::fmt::Write;

const PANEL_W: f64 = 480.0;
const PANEL_H: f64 = 340.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

pub struct Heatmap {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub colorbar_label: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major over `ys`, then `xs`. None marks a failed cell.
    pub values: Vec<Option<f64>>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Round tick positions covering [lo, hi].
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let s = format!("{:.4}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * lo.abs().max(1.0) {
        let pad = 0.5 * lo.abs().max(1.0) * 0.1;
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn frame(out: &mut String, title: &str, x_label: &str, y_label: &str, ox: f64) {
    let (w, h) = (PANEL_W - LEFT - RIGHT, PANEL_H - TOP - BOTTOM);
    let _ = writeln!(
        out,
        r##"<rect x="{:.1}" y="{TOP}" width="{w}" height="{h}" fill="none" stroke="#333"/>"##,
        ox + LEFT
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        ox + LEFT + w / 2.0,
        esc(title)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="13">{}</text>"#,
        ox + LEFT + w / 2.0,
        PANEL_H - 12.0,
        esc(x_label)
    );
    let (yx, yy) = (ox + 18.0, TOP + h / 2.0);
    let _ = writeln!(
        out,
        r#"<text x="{yx:.1}" y="{yy:.1}" text-anchor="middle" font-size="13" transform="rotate(-90 {yx:.1} {yy:.1})">{}</text>"#,
        esc(y_label)
    );
}

fn axes(out: &mut String, ox: f64, (x0, x1): (f64, f64), (y0, y1): (f64, f64)) {
    let (w, h) = (PANEL_W - LEFT - RIGHT, PANEL_H - TOP - BOTTOM);
    for t in ticks(x0, x1) {
        let x = ox + LEFT + (t - x0) / (x1 - x0) * w;
        let _ = writeln!(
            out,
            r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#333"/><text x="{x:.1}" y="{:.1}" text-anchor="middle" font-size="11">{}</text>"##,
            TOP + h,
            TOP + h + 5.0,
            TOP + h + 18.0,
            tick_label(t)
        );
    }
    for t in ticks(y0, y1) {
        let y = TOP + h - (t - y0) / (y1 - y0) * h;
        let _ = writeln!(
            out,
            r##"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#333"/><text x="{:.1}" y="{:.1}" text-anchor="end" font-size="11">{}</text>"##,
            ox + LEFT - 5.0,
            ox + LEFT,
            ox + LEFT - 8.0,
            y + 4.0,
            tick_label(t)
        );
    }
}

fn line_panel(out: &mut String, chart: &LineChart, ox: f64) {
    let (w, h) = (PANEL_W - LEFT - RIGHT, PANEL_H - TOP - BOTTOM);
    let all = || chart.series.iter().flat_map(|s| s.points.iter());
    let xr = bounds(all().map(|p| p.0));
    let yr = bounds(all().map(|p| p.1));
    frame(out, &chart.title, &chart.x_label, &chart.y_label, ox);
    axes(out, ox, xr, yr);
    for (k, s) in chart.series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|(x, y)| {
                format!(
                    "{:.2},{:.2}",
                    ox + LEFT + (x - xr.0) / (xr.1 - xr.0) * w,
                    TOP + h - (y - yr.0) / (yr.1 - yr.0) * h
                )
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            pts.join(" ")
        );
        for p in &pts {
            let (x, y) = p.split_once(',').unwrap();
            let _ = writeln!(out, r#"<circle cx="{x}" cy="{y}" r="3" fill="{color}"/>"#);
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" fill="{color}">{}</text>"#,
            ox + LEFT + 8.0,
            TOP + 16.0 + 15.0 * k as f64,
            esc(&s.label)
        );
    }
}

/// Charts side by side in one document.
pub fn line_charts(charts: &[LineChart]) -> String {
    let width = PANEL_W * charts.len().max(1) as f64;
    let mut out = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{PANEL_H}" font-family="sans-serif">"#
    );
    out.push('\n');
    for (k, c) in charts.iter().enumerate() {
        line_panel(&mut out, c, k as f64 * PANEL_W);
    }
    out.push_str("</svg>\n");
    out
}

/// Blue → yellow ramp for t in [0, 1].
fn ramp(t: f64) -> String {
    const STOPS: [(f64, f64, f64); 5] = [
        (68.0, 1.0, 84.0),
        (59.0, 82.0, 139.0),
        (33.0, 145.0, 140.0),
        (94.0, 201.0, 98.0),
        (253.0, 231.0, 37.0),
    ];
    let t = t.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let i = (t.floor() as usize).min(STOPS.len() - 2);
    let f = t - i as f64;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    let mix = |x: f64, y: f64| (x + f * (y - x)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

pub fn heatmap(map: &Heatmap) -> String {
    let bar = 70.0;
    let (w, h) = (PANEL_W - LEFT - RIGHT, PANEL_H - TOP - BOTTOM);
    let mut out = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{PANEL_H}" font-family="sans-serif">"#,
        PANEL_W + bar
    );
    out.push('\n');
    let (nx, ny) = (map.xs.len().max(1), map.ys.len().max(1));
    let half_step = |v: &[f64]| if v.len() > 1 { 0.5 * (v[1] - v[0]) } else { 0.5 };
    let xr = (
        map.xs.first().copied().unwrap_or(0.0) - half_step(&map.xs),
        map.xs.last().copied().unwrap_or(1.0) + half_step(&map.xs),
    );
    let yr = (
        map.ys.first().copied().unwrap_or(0.0) - half_step(&map.ys),
        map.ys.last().copied().unwrap_or(1.0) + half_step(&map.ys),
    );
    let (lo, hi) = bounds(map.values.iter().flatten().copied());
    let (cw, ch) = (w / nx as f64, h / ny as f64);
    for (j, _) in map.ys.iter().enumerate() {
        for (i, _) in map.xs.iter().enumerate() {
            let fill = match map.values.get(j * nx + i).copied().flatten() {
                Some(v) => ramp((v - lo) / (hi - lo)),
                None => "#cccccc".into(),
            };
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                LEFT + i as f64 * cw,
                TOP + h - (j + 1) as f64 * ch,
                cw + 0.3,
                ch + 0.3
            );
        }
    }
    frame(&mut out, &map.title, &map.x_label, &map.y_label, 0.0);
    axes(&mut out, 0.0, xr, yr);
    let bx = PANEL_W - RIGHT + 10.0;
    for k in 0..50 {
        let _ = writeln!(
            out,
            r#"<rect x="{bx:.1}" y="{:.2}" width="14" height="{:.2}" fill="{}"/>"#,
            TOP + h - (k + 1) as f64 * h / 50.0,
            h / 50.0 + 0.3,
            ramp((k as f64 + 0.5) / 50.0)
        );
    }
    for (v, y) in [(hi, TOP + 10.0), (lo, TOP + h)] {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{y:.1}" font-size="11">{}</text>"#,
            bx + 18.0,
            tick_label(v)
        );
    }
    let (lx, ly) = (bx + 60.0, TOP + h / 2.0);
    let _ = writeln!(
        out,
        r#"<text x="{lx:.1}" y="{ly:.1}" text-anchor="middle" font-size="12" transform="rotate(-90 {lx:.1} {ly:.1})">{}</text>"#,
        esc(&map.colorbar_label)
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round_and_inside() {
        let t = ticks(0.0, 1.0);
        assert_eq!(t.first(), Some(&0.0));
        assert!(t.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(ticks(-11.5, 30.3).contains(&0.0));
    }

    #[test]
    fn ramp_endpoints() {
        assert_eq!(ramp(0.0), "#440154");
        assert_eq!(ramp(1.0), "#fde725");
    }
}
