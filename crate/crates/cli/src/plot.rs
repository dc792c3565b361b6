//! Minimal SVG learning-curve chart.

use std::fmt::Write as _;
use std::path::Path;

use crate::curves::{read_curve, CurveRow};
use crate::error::{usage, CliResult};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// A named curve ready for drawing.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub rows: Vec<CurveRow>,
}

/// Loads every CSV; the legend label is the file stem. Header-only or
/// unreadable files are usage errors.
pub fn load_series(paths: &[impl AsRef<Path>]) -> CliResult<Vec<Series>> {
    if paths.is_empty() {
        return Err(usage("plot needs at least one CSV"));
    }
    paths
        .iter()
        .map(|p| {
            let p = p.as_ref();
            let rows = read_curve(p)?;
            if rows.is_empty() {
                return Err(usage(format!("{}: no data rows", p.display())));
            }
            if rows.iter().any(|r| !r.return_mean.is_finite() || !r.return_std_over_seeds.is_finite()) {
                return Err(usage(format!("{}: non-finite return values", p.display())));
            }
            let label = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok(Series { label, rows })
        })
        .collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn nice_range(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo < 1e-12 {
        let pad = lo.abs().max(1.0) * 0.05;
        (lo - pad, hi + pad)
    } else {
        let pad = (hi - lo) * 0.05;
        (lo - pad, hi + pad)
    }
}

/// Renders the chart: one mean polyline per series over a shaded ±std
/// polygon, labelled axes, and a legend.
pub fn render_svg(series: &[Series]) -> String {
    let xs = series.iter().flat_map(|s| s.rows.iter().map(|r| r.iteration as f64));
    let (x_lo, x_hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let (x_lo, x_hi) = if x_hi > x_lo { (x_lo, x_hi) } else { (x_lo - 0.5, x_hi + 0.5) };
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for r in series.iter().flat_map(|s| &s.rows) {
        y_lo = y_lo.min(r.return_mean - r.return_std_over_seeds);
        y_hi = y_hi.max(r.return_mean + r.return_std_over_seeds);
    }
    let (y_lo, y_hi) = nice_range(y_lo, y_hi);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * pw;
    let py = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let (x0, x1, y0, y1) = (LEFT, LEFT + pw, TOP, TOP + ph);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let xv = x_lo + t * (x_hi - x_lo);
        let yv = y_lo + t * (y_hi - y_lo);
        let (tx, ty) = (px(xv), py(yv));
        let _ = writeln!(s, r#"<line x1="{tx:.2}" y1="{y1}" x2="{tx:.2}" y2="{:.2}" stroke="black"/>"#, y1 + 5.0);
        let _ = writeln!(s, r#"<text x="{tx:.2}" y="{:.2}" text-anchor="middle">{xv:.0}</text>"#, y1 + 20.0);
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{ty:.2}" x2="{x0}" y2="{ty:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{yv:.1}</text>"#, x0 - 8.0, ty + 4.0);
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">iteration</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">mean return</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let upper = ser.rows.iter().map(|r| (px(r.iteration as f64), py(r.return_mean + r.return_std_over_seeds)));
        let lower = ser.rows.iter().rev().map(|r| (px(r.iteration as f64), py(r.return_mean - r.return_std_over_seeds)));
        let band: Vec<String> = upper.chain(lower).map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(s, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, band.join(" "));
        let line: Vec<String> = ser
            .rows
            .iter()
            .map(|r| format!("{:.2},{:.2}", px(r.iteration as f64), py(r.return_mean)))
            .collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, line.join(" "));
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = LEFT + pw + 15.0;
        let _ = writeln!(s, r#"<rect x="{lx}" y="{:.2}" width="14" height="4" fill="{color}"/>"#, ly - 2.0);
        let _ = writeln!(s, r#"<text class="legend" x="{:.2}" y="{:.2}">{}</text>"#, lx + 20.0, ly + 4.0, escape(&ser.label));
    }
    s.push_str("</svg>\n");
    s
}

/// Loads, renders and writes. Nothing is written when loading fails.
pub fn plot_files(inputs: &[impl AsRef<Path>], out: &Path) -> CliResult<()> {
    let series = load_series(inputs)?;
    let svg = render_svg(&series);
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(out, svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(label: &str, n: usize) -> Series {
        Series {
            label: label.into(),
            rows: (0..n)
                .map(|i| CurveRow {
                    iteration: i,
                    env_steps: 0.0,
                    return_mean: -1000.0 + 10.0 * i as f64,
                    return_std_over_seeds: 5.0,
                    penalty_value: 0.0,
                    beta: 0.0,
                    wall_time_s: 0.0,
                    nonfinite_grad_count: 0,
                })
                .collect(),
        }
    }

    #[test]
    fn one_polyline_per_series() {
        let svg = render_svg(&[series("a", 10)]);
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(svg.matches("<polygon").count(), 1);
        let svg = render_svg(&[series("a", 10), series("b<&>", 3)]);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("b&lt;&amp;&gt;"));
        assert!(svg.contains(">iteration<") && svg.contains(">mean return<"));
    }

    #[test]
    fn single_point_and_flat_curves_render_finite_coordinates() {
        let mut s = series("flat", 1);
        s.rows[0].return_std_over_seeds = 0.0;
        let svg = render_svg(&[s]);
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }
}
