//! Static SVG line charts of recorded time series.

use std::fmt::Write as _;
use std::path::Path;

use schroreg::sim::TimeSeries;
use schroreg::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
/// Floor for log-scale plots.
const LOG_FLOOR: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

fn num(v: f64) -> String {
    format!("{v:.2}")
}

/// SVG text of `columns` against time.
pub fn render_svg(series: &TimeSeries, columns: &[&str], scale: Scale, title: &str) -> Result<String> {
    let mut data = Vec::new();
    for name in columns {
        let ys = series.column(name)?;
        let ys: Vec<f64> = match scale {
            Scale::Linear => ys.to_vec(),
            Scale::Log => ys.iter().map(|v| v.max(LOG_FLOOR).log10()).collect(),
        };
        data.push((*name, ys));
    }
    let finite = |v: &&f64| v.is_finite();
    let (t0, t1) = match (series.times.first(), series.times.last()) {
        (Some(a), Some(b)) if b > a => (*a, *b),
        (Some(a), _) => (*a, a + 1.0),
        _ => (0.0, 1.0),
    };
    let mut lo = data.iter().flat_map(|(_, ys)| ys.iter()).filter(finite).copied().fold(f64::INFINITY, f64::min);
    let mut hi = data.iter().flat_map(|(_, ys)| ys.iter()).filter(finite).copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite()) {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-300 {
        (lo, hi) = (lo - 0.5, hi + 0.5);
    }
    let px = |t: f64| LEFT + (t - t0) / (t1 - t0) * (WIDTH - LEFT - RIGHT);
    let py = |y: f64| HEIGHT - BOTTOM - (y - lo) / (hi - lo) * (HEIGHT - TOP - BOTTOM);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" font-size="14" text-anchor="middle">{}</text>"#, num(WIDTH / 2.0), escape(title));
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(
        svg,
        r#"<path d="M{} {} L{} {} L{} {}" fill="none" stroke="black"/>"#,
        num(x0),
        num(y0),
        num(x0),
        num(y1),
        num(x1),
        num(y1)
    );
    let ylabel = |v: f64| match scale {
        Scale::Linear => format!("{v:.3e}"),
        Scale::Log => format!("1e{v:.1}"),
    };
    for (v, y) in [(lo, y1), (hi, y0)] {
        let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{}</text>"#, num(x0 - 4.0), num(y + 4.0), ylabel(v));
    }
    for (t, anchor) in [(t0, "start"), (t1, "end")] {
        let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="11" text-anchor="{anchor}">{t:.3}</text>"#, num(px(t)), num(y1 + 16.0));
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">t</text>"#, num((x0 + x1) / 2.0), num(HEIGHT - 10.0));

    for (k, (name, ys)) in data.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let points: Vec<String> = series
            .times
            .iter()
            .zip(ys)
            .filter(|(_, y)| y.is_finite())
            .map(|(t, y)| format!("{},{}", num(px(*t)), num(py(*y))))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline data-column="{}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            escape(name),
            points.join(" ")
        );
        let ly = TOP + 14.0 * (k as f64 + 1.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="11" fill="{color}" text-anchor="end">{}</text>"#, num(x1 - 4.0), num(ly), escape(name));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Write [`render_svg`] output to `path`.
pub fn emit_plot(series: &TimeSeries, columns: &[&str], path: &Path, scale: Scale) -> Result<()> {
    let title = columns.join(", ");
    let svg = render_svg(series, columns, scale, &title)?;
    std::fs::write(path, svg).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}
