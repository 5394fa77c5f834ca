//! Minimal static SVG plotting: line/scatter panels and histograms.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const PANEL_HEIGHT: f64 = 360.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 48.0;

const PALETTE: [&str; 5] = ["#1f6fb2", "#d1495b", "#3a7d44", "#8655b0", "#c88018"];

/// One curve or point set on a panel.
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    /// Draw circles at the points.
    pub markers: bool,
    /// Connect the points with a polyline.
    pub line: bool,
}

impl Series {
    pub fn line(name: &str, points: Vec<(f64, f64)>) -> Self {
        Self { name: name.into(), points, markers: false, line: true }
    }

    pub fn scatter(name: &str, points: Vec<(f64, f64)>) -> Self {
        Self { name: name.into(), points, markers: true, line: false }
    }
}

pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).abs().max(1e-30);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(2.0 * mag);
    let start = (lo / step).ceil() * step;
    let mut ticks = Vec::new();
    let mut t = start;
    while t <= hi + 1e-9 * span {
        ticks.push(t);
        t += step;
    }
    ticks
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e4).contains(&a) {
        format!("{v:.1e}")
    } else if a >= 10.0 {
        format!("{v:.0}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn render_panel(svg: &mut String, panel: &Panel, y_offset: f64) {
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in &panel.series {
        for &(x, y) in &s.points {
            if x.is_finite() && y.is_finite() {
                x_min = x_min.min(x);
                x_max = x_max.max(x);
                y_min = y_min.min(y);
                y_max = y_max.max(y);
            }
        }
    }
    if !x_min.is_finite() {
        x_min = 0.0;
        x_max = 1.0;
        y_min = 0.0;
        y_max = 1.0;
    }
    if x_max == x_min {
        x_max = x_min + 1.0;
    }
    if y_max == y_min {
        y_max = y_min + 1.0;
    }
    let y_pad = 0.06 * (y_max - y_min);
    y_min -= y_pad;
    y_max += y_pad;

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = PANEL_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + (x - x_min) / (x_max - x_min) * plot_w;
    let py = |y: f64| y_offset + MARGIN_TOP + plot_h - (y - y_min) / (y_max - y_min) * plot_h;

    let _ = write!(
        svg,
        r##"<rect x="{:.1}" y="{:.1}" width="{plot_w:.1}" height="{plot_h:.1}" fill="none" stroke="#444" stroke-width="1"/>"##,
        MARGIN_LEFT,
        y_offset + MARGIN_TOP
    );
    let _ = write!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="15" font-weight="bold" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        y_offset + 20.0,
        panel.title
    );

    for t in nice_ticks(x_min, x_max) {
        let x = px(t);
        let _ = write!(
            svg,
            r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#bbb" stroke-width="0.6"/>"##,
            y_offset + MARGIN_TOP,
            y_offset + MARGIN_TOP + plot_h
        );
        let _ = write!(
            svg,
            r#"<text x="{x:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#,
            y_offset + MARGIN_TOP + plot_h + 16.0,
            fmt_tick(t)
        );
    }
    for t in nice_ticks(y_min, y_max) {
        let y = py(t);
        let _ = write!(
            svg,
            r##"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#bbb" stroke-width="0.6"/>"##,
            MARGIN_LEFT,
            MARGIN_LEFT + plot_w
        );
        let _ = write!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 6.0,
            y + 4.0,
            fmt_tick(t)
        );
    }
    let _ = write!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        y_offset + PANEL_HEIGHT - 10.0,
        panel.x_label
    );
    let _ = write!(
        svg,
        r#"<text x="16" y="{:.1}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        y_offset + MARGIN_TOP + plot_h / 2.0,
        y_offset + MARGIN_TOP + plot_h / 2.0,
        panel.y_label
    );

    for (i, s) in panel.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if s.line && s.points.len() > 1 {
            let mut path = String::new();
            for (j, &(x, y)) in s.points.iter().enumerate() {
                if !x.is_finite() || !y.is_finite() {
                    continue;
                }
                let _ = write!(path, "{}{:.2},{:.2} ", if j == 0 { "M" } else { "L" }, px(x), py(y));
            }
            let _ = write!(
                svg,
                r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.6"/>"#,
                path.trim_end()
            );
        }
        if s.markers {
            for &(x, y) in &s.points {
                if x.is_finite() && y.is_finite() {
                    let _ = write!(
                        svg,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                        px(x),
                        py(y)
                    );
                }
            }
        }
        if panel.series.len() > 1 {
            let lx = MARGIN_LEFT + plot_w - 150.0;
            let ly = y_offset + MARGIN_TOP + 16.0 + 16.0 * i as f64;
            let _ = write!(
                svg,
                r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#,
                lx + 22.0,
                lx + 28.0,
                ly + 4.0,
                s.name
            );
        }
    }
}

/// Render panels stacked vertically into one SVG document.
pub fn render(panels: &[Panel]) -> String {
    let height = PANEL_HEIGHT * panels.len() as f64;
    let mut svg = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif"><rect width="100%" height="100%" fill="white"/>"#
    );
    for (i, panel) in panels.iter().enumerate() {
        render_panel(&mut svg, panel, i as f64 * PANEL_HEIGHT);
    }
    svg.push_str("</svg>\n");
    svg
}

/// Render a bar histogram over `[0, 1]` with uniform bins.
pub fn histogram(title: &str, x_label: &str, counts: &[u64]) -> String {
    let total: u64 = counts.iter().sum();
    let n = counts.len().max(1);
    let points: Vec<(f64, f64)> = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| ((i as f64 + 0.5) / n as f64, c as f64 / total.max(1) as f64))
        .collect();

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = PANEL_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let y_max = points.iter().map(|p| p.1).fold(0.0f64, f64::max).max(1e-12) * 1.08;
    let mut svg = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{PANEL_HEIGHT}" viewBox="0 0 {WIDTH} {PANEL_HEIGHT}" font-family="sans-serif"><rect width="100%" height="100%" fill="white"/>"#
    );
    let px = |x: f64| MARGIN_LEFT + x * plot_w;
    let py = |y: f64| MARGIN_TOP + plot_h - y / y_max * plot_h;
    let _ = write!(
        svg,
        r##"<rect x="{MARGIN_LEFT:.1}" y="{MARGIN_TOP:.1}" width="{plot_w:.1}" height="{plot_h:.1}" fill="none" stroke="#444"/>"##
    );
    let _ = write!(
        svg,
        r#"<text x="{:.1}" y="20" font-size="15" font-weight="bold" text-anchor="middle">{title}</text>"#,
        MARGIN_LEFT + plot_w / 2.0
    );
    let bar_w = plot_w / n as f64;
    for (i, &(_, frac)) in points.iter().enumerate() {
        let x = px(i as f64 / n as f64);
        let y = py(frac);
        let h = MARGIN_TOP + plot_h - y;
        let _ = write!(
            svg,
            r##"<rect x="{:.2}" y="{y:.2}" width="{:.2}" height="{h:.2}" fill="#1f6fb2" stroke="white" stroke-width="0.5"/>"##,
            x,
            bar_w
        );
    }
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = write!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#,
            px(t),
            MARGIN_TOP + plot_h + 16.0,
            fmt_tick(t)
        );
    }
    let _ = write!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">{x_label}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        PANEL_HEIGHT - 10.0
    );
    svg.push_str("</svg>\n");
    svg
}

/// Thin a long point list for plotting.
pub fn decimate(points: Vec<(f64, f64)>, max_points: usize) -> Vec<(f64, f64)> {
    if points.len() <= max_points {
        return points;
    }
    let stride = points.len().div_ceil(max_points);
    points.into_iter().step_by(stride).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_wellformed_svg() {
        let panel = Panel {
            title: "test".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            series: vec![
                Series::line("a", vec![(0.0, 0.0), (1.0, 1.0), (2.0, 0.5)]),
                Series::scatter("b", vec![(0.5, 0.7)]),
            ],
        };
        let svg = render(&[panel]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("<path"));
        assert!(svg.contains("<circle"));
    }

    #[test]
    fn histogram_and_decimate() {
        let svg = histogram("h", "value", &[1, 5, 2]);
        assert!(svg.contains("<rect"));
        let pts: Vec<(f64, f64)> = (0..1000).map(|i| (i as f64, 0.0)).collect();
        assert!(decimate(pts, 100).len() <= 100);
    }

    #[test]
    fn ticks_cover_range() {
        let t = nice_ticks(0.0, 8.0);
        assert!(t.len() >= 3 && t.len() <= 7);
        assert!(t[0] >= 0.0 && *t.last().unwrap() <= 8.0 + 1e-9);
    }
}
