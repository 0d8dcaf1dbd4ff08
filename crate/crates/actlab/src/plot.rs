//! SVG rendering: grid heatmaps and line charts with shaded bands.
//!
//! Output depends only on the inputs (fixed number formatting, no
//! timestamps), so rendering the same data twice gives identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::fs;
use std::path::{Path, PathBuf};

use actlab_core::gradsim::GradQualityRecord;
use actlab_core::ppo::CurvePoint;

use crate::error::{AppError, Result};
use crate::tables::{read_curves, read_grid_surface, GridSurface};

// ---------------------------------------------------------------------------
// Colors

/// Viridis anchor colors; luminance increases monotonically along the map.
const VIRIDIS: [(f64, f64, f64); 9] = [
    (68.0, 1.0, 84.0),
    (72.0, 40.0, 120.0),
    (62.0, 74.0, 137.0),
    (49.0, 104.0, 142.0),
    (38.0, 130.0, 142.0),
    (31.0, 158.0, 137.0),
    (53.0, 183.0, 121.0),
    (109.0, 205.0, 89.0),
    (253.0, 231.0, 37.0),
];

/// Maps `t ∈ [0, 1]` to a hex color.
pub fn colormap(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * (VIRIDIS.len() - 1) as f64;
    let i = (x.floor() as usize).min(VIRIDIS.len() - 2);
    let f = x - i as f64;
    let (a, b) = (VIRIDIS[i], VIRIDIS[i + 1]);
    let mix = |p: f64, q: f64| (p + f * (q - p)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Compact tick label.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        return format!("{v:.2e}");
    }
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

// ---------------------------------------------------------------------------
// Heatmaps

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapOptions {
    pub title: String,
    /// Plot `−value` (loss surfaces are shown negated).
    pub negate: bool,
    /// Coordinate range shown on both axes.
    pub span: f64,
}

const CELL_PX: f64 = 12.0;

/// Heatmap of a square grid. Row 0 is drawn at the bottom; the center cell
/// gets a cross marker; invalid cells are hatched.
pub fn render_heatmap(grid: &GridSurface, opts: &HeatmapOptions) -> String {
    let res = grid.resolution;
    let sign = if opts.negate { -1.0 } else { 1.0 };
    let vals: Vec<f64> = grid.values.iter().map(|v| sign * v).collect();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (v, ok) in vals.iter().zip(&grid.valid) {
        if *ok && v.is_finite() {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    if lo > hi {
        lo = 0.0;
        hi = 0.0;
    }
    let side = res as f64 * CELL_PX;
    let (left, top) = (60.0, 40.0);
    let bar_x = left + side + 30.0;
    let width = bar_x + 90.0;
    let height = top + side + 50.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    s.push_str(concat!(
        r#"<defs><pattern id="hatch" width="4" height="4" patternUnits="userSpaceOnUse" patternTransform="rotate(45)">"#,
        r##"<rect width="4" height="4" fill="#ffffff"/><line x1="0" y1="0" x2="0" y2="4" stroke="#888888" stroke-width="1.5"/></pattern></defs>"##,
        "\n"
    ));
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
        left + side / 2.0,
        escape(&opts.title)
    );
    for row in 0..res {
        for col in 0..res {
            let k = row * res + col;
            let x = left + col as f64 * CELL_PX;
            let y = top + (res - 1 - row) as f64 * CELL_PX;
            if grid.valid[k] && vals[k].is_finite() {
                let t = if hi > lo { (vals[k] - lo) / (hi - lo) } else { 0.5 };
                let _ = writeln!(
                    s,
                    r#"<rect class="cell" data-row="{row}" data-col="{col}" x="{x}" y="{y}" width="{CELL_PX}" height="{CELL_PX}" fill="{}"/>"#,
                    colormap(t)
                );
            } else {
                let _ = writeln!(
                    s,
                    r#"<rect class="cell invalid" data-row="{row}" data-col="{col}" x="{x}" y="{y}" width="{CELL_PX}" height="{CELL_PX}" fill="url(#hatch)"/>"#
                );
            }
        }
    }
    // center marker
    let c = (res / 2) as f64;
    let cx = left + (c + 0.5) * CELL_PX;
    let cy = top + (res as f64 - 1.0 - c + 0.5) * CELL_PX;
    let arm = CELL_PX * 0.8;
    let _ = writeln!(
        s,
        r##"<g class="center" stroke="#000000" stroke-width="2"><line x1="{}" y1="{cy}" x2="{}" y2="{cy}"/><line x1="{cx}" y1="{}" x2="{cx}" y2="{}"/></g>"##,
        cx - arm,
        cx + arm,
        cy - arm,
        cy + arm
    );
    // axes labels
    let _ = writeln!(
        s,
        r#"<text x="{left}" y="{}" text-anchor="start">{}</text><text x="{}" y="{}" text-anchor="end">{}</text>"#,
        top + side + 15.0,
        fmt_num(-opts.span),
        left + side,
        top + side + 15.0,
        fmt_num(opts.span)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">direction 1</text>"#,
        left + side / 2.0,
        top + side + 32.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" transform="rotate(-90 {} {})">direction 2</text>"#,
        left - 25.0,
        top + side / 2.0,
        left - 25.0,
        top + side / 2.0
    );
    // colorbar
    let steps = 64;
    let bh = side / steps as f64;
    for i in 0..steps {
        let t = 1.0 - (i as f64 + 0.5) / steps as f64;
        let _ = writeln!(
            s,
            r#"<rect class="bar" x="{bar_x}" y="{}" width="16" height="{}" fill="{}"/>"#,
            top + i as f64 * bh,
            bh + 0.05,
            colormap(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text class="bar-max" x="{}" y="{}">{}</text><text class="bar-min" x="{}" y="{}">{}</text>"#,
        bar_x + 20.0,
        top + 8.0,
        fmt_num(hi),
        bar_x + 20.0,
        top + side,
        fmt_num(lo)
    );
    s.push_str("</svg>\n");
    s
}

// ---------------------------------------------------------------------------
// Line charts

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Half-width of a shaded band around `y`.
    pub band: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartOptions {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
}

fn nice_ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        return vec![lo];
    }
    let raw = (hi - lo) / n as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let start = (lo / step).ceil() as i64;
    let end = (hi / step).floor() as i64;
    (start..=end).map(|k| k as f64 * step).collect()
}

pub fn render_line_chart(series: &[Series], opts: &ChartOptions) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (70.0, 160.0, 40.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let (mut xlo, mut xhi, mut ylo, mut yhi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for (i, (&x, &y)) in s.x.iter().zip(&s.y).enumerate() {
            let b = s.band.as_ref().map_or(0.0, |b| b[i]);
            if x.is_finite() && y.is_finite() {
                xlo = xlo.min(x);
                xhi = xhi.max(x);
                ylo = ylo.min(y - b);
                yhi = yhi.max(y + b);
            }
        }
    }
    if xlo > xhi {
        (xlo, xhi, ylo, yhi) = (0.0, 1.0, 0.0, 1.0);
    }
    if xhi == xlo {
        xhi = xlo + 1.0;
    }
    if yhi == ylo {
        yhi = ylo + 1.0;
        ylo -= 1.0;
    }
    let sx = |x: f64| left + (x - xlo) / (xhi - xlo) * pw;
    let sy = |y: f64| top + (1.0 - (y - ylo) / (yhi - ylo)) * ph;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
        left + pw / 2.0,
        escape(&opts.title)
    );
    let _ = writeln!(
        s,
        r##"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#000000"/>"##
    );
    for t in nice_ticks(xlo, xhi, 6) {
        let x = sx(t);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="#000000"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"##,
            top + ph,
            top + ph + 4.0,
            top + ph + 16.0,
            fmt_num(t)
        );
    }
    for t in nice_ticks(ylo, yhi, 5) {
        let y = sy(t);
        let _ = writeln!(
            s,
            r##"<line x1="{}" y1="{y:.2}" x2="{left}" y2="{y:.2}" stroke="#000000"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
            left - 4.0,
            left - 6.0,
            y + 4.0,
            fmt_num(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        h - 12.0,
        escape(&opts.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        escape(&opts.y_label)
    );
    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<(f64, f64, f64)> = ser
            .x
            .iter()
            .zip(&ser.y)
            .enumerate()
            .filter(|(_, (x, y))| x.is_finite() && y.is_finite())
            .map(|(i, (x, y))| (*x, *y, ser.band.as_ref().map_or(0.0, |b| b[i])))
            .collect();
        if pts.is_empty() {
            continue;
        }
        if ser.band.is_some() {
            let mut d = String::new();
            for (i, (x, y, b)) in pts.iter().enumerate() {
                let _ = write!(d, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, sx(*x), sy(y + b));
            }
            for (x, y, b) in pts.iter().rev() {
                let _ = write!(d, "L{:.2},{:.2} ", sx(*x), sy(y - b));
            }
            let _ = writeln!(
                s,
                r#"<path class="band" d="{}Z" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                d
            );
        }
        let line: Vec<String> = pts.iter().map(|(x, y, _)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline class="mean" points="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"#,
            line.join(" ")
        );
        let ly = top + 10.0 + 18.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/><text x="{}" y="{}">{}</text>"#,
            left + pw + 10.0,
            left + pw + 30.0,
            left + pw + 36.0,
            ly + 4.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

// ---------------------------------------------------------------------------
// Learning-curve aggregation

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XAxis {
    EnvSteps,
    GradientSteps,
}

impl XAxis {
    fn of(self, p: &CurvePoint) -> f64 {
        match self {
            XAxis::EnvSteps => p.env_step as f64,
            XAxis::GradientSteps => p.gradient_step as f64,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            XAxis::EnvSteps => "environment steps",
            XAxis::GradientSteps => "gradient steps",
        }
    }
}

/// Mean and population std of the per-seed curves on a common x grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveAggregate {
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub seeds: usize,
    /// Set when seeds used different step grids and were interpolated.
    pub warnings: Vec<String>,
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let i = xs.partition_point(|v| *v < x);
    if i < xs.len() && xs[i] == x {
        return ys[i];
    }
    if i == 0 {
        return ys[0];
    }
    if i == xs.len() {
        return ys[xs.len() - 1];
    }
    let (x0, x1, y0, y1) = (xs[i - 1], xs[i], ys[i - 1], ys[i]);
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Groups points by seed and aggregates `mean_return` across seeds. When
/// the seeds' x grids differ, every seed is linearly interpolated onto the
/// union of grid points inside the common range.
pub fn aggregate_curves(points: &[CurvePoint], axis: XAxis) -> Result<CurveAggregate> {
    let mut by_seed: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for p in points {
        by_seed.entry(p.seed).or_default().push((axis.of(p), p.mean_return));
    }
    if by_seed.is_empty() {
        return Err(AppError::config("learning-curve input contains no points"));
    }
    let curves: Vec<(Vec<f64>, Vec<f64>)> = by_seed
        .values_mut()
        .map(|v| {
            v.sort_by(|a, b| a.0.total_cmp(&b.0));
            v.iter().copied().unzip()
        })
        .collect();
    let mut warnings = Vec::new();
    let same = curves.iter().all(|(x, _)| *x == curves[0].0);
    let grid: Vec<f64> = if same {
        curves[0].0.clone()
    } else {
        let lo = curves.iter().map(|(x, _)| x[0]).fold(f64::NEG_INFINITY, f64::max);
        let hi = curves.iter().map(|(x, _)| x[x.len() - 1]).fold(f64::INFINITY, f64::min);
        let mut g: Vec<f64> = curves
            .iter()
            .flat_map(|(x, _)| x.iter().copied())
            .filter(|x| *x >= lo && *x <= hi)
            .collect();
        g.sort_by(f64::total_cmp);
        g.dedup();
        warnings.push(format!(
            "seeds use different step grids; interpolated onto {} common points in [{lo}, {hi}]",
            g.len()
        ));
        g
    };
    let n = curves.len() as f64;
    let mut mean = Vec::with_capacity(grid.len());
    let mut std = Vec::with_capacity(grid.len());
    for &x in &grid {
        let ys: Vec<f64> = curves.iter().map(|(xs, ys)| interpolate(xs, ys, x)).collect();
        let m = ys.iter().sum::<f64>() / n;
        let v = ys.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / n;
        mean.push(m);
        std.push(v.sqrt());
    }
    Ok(CurveAggregate {
        x: grid,
        mean,
        std,
        seeds: curves.len(),
        warnings,
    })
}

// ---------------------------------------------------------------------------
// Plot specifications

#[derive(Debug, Clone, PartialEq)]
pub enum PlotKind {
    /// One column of a landscape grid CSV.
    Heatmap { column: String, negate: bool, span: f64 },
    /// Mean ± std learning curves, one labelled curves CSV per configuration.
    LearningCurves { axis: XAxis },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub kind: PlotKind,
    /// `(label, csv path)` inputs.
    pub inputs: Vec<(String, PathBuf)>,
    pub title: String,
    pub output: PathBuf,
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| AppError::io(path, e))
}

impl PlotSpec {
    /// Renders to SVG text; returns warnings produced on the way.
    pub fn render_svg(&self) -> Result<(String, Vec<String>)> {
        match &self.kind {
            PlotKind::Heatmap { column, negate, span } => {
                let [(_, path)] = self.inputs.as_slice() else {
                    return Err(AppError::config("a heatmap takes exactly one grid CSV"));
                };
                let grid = read_grid_surface(path, column)?;
                let opts = HeatmapOptions {
                    title: self.title.clone(),
                    negate: *negate,
                    span: *span,
                };
                Ok((render_heatmap(&grid, &opts), Vec::new()))
            }
            PlotKind::LearningCurves { axis } => {
                if self.inputs.is_empty() {
                    return Err(AppError::config("no learning-curve inputs"));
                }
                let mut series = Vec::new();
                let mut warnings = Vec::new();
                for (label, path) in &self.inputs {
                    let agg = aggregate_curves(&read_curves(path)?, *axis)?;
                    warnings.extend(agg.warnings.iter().map(|w| format!("{label}: {w}")));
                    series.push(Series {
                        label: format!("{label} (n={})", agg.seeds),
                        x: agg.x,
                        y: agg.mean,
                        band: Some(agg.std),
                    });
                }
                let opts = ChartOptions {
                    title: self.title.clone(),
                    x_label: axis.label().into(),
                    y_label: "evaluation return".into(),
                };
                Ok((render_line_chart(&series, &opts), warnings))
            }
        }
    }

    pub fn render(&self) -> Result<Vec<String>> {
        let (svg, warnings) = self.render_svg()?;
        write_text(&self.output, &svg)?;
        Ok(warnings)
    }
}

/// One chart per loss term: mean cosine against env step, one line per
/// batch size, ±std band.
pub fn render_grad_quality(records: &[GradQualityRecord], term: actlab_core::ppo::LossTerm, title: &str) -> String {
    let mut by_batch: BTreeMap<usize, Vec<&GradQualityRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.term == term) {
        by_batch.entry(r.batch_size).or_default().push(r);
    }
    let series: Vec<Series> = by_batch
        .into_iter()
        .map(|(b, mut rs)| {
            rs.sort_by_key(|r| r.env_step);
            Series {
                label: format!("batch {b}"),
                x: rs.iter().map(|r| r.env_step as f64).collect(),
                y: rs.iter().map(|r| r.mean_cos).collect(),
                band: Some(rs.iter().map(|r| r.std_cos).collect()),
            }
        })
        .collect();
    render_line_chart(
        &series,
        &ChartOptions {
            title: title.into(),
            x_label: "environment steps".into(),
            y_label: "mean cosine similarity".into(),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn luminance(hex: &str) -> f64 {
        let v = u32::from_str_radix(&hex[1..], 16).unwrap();
        let (r, g, b) = ((v >> 16) & 255, (v >> 8) & 255, v & 255);
        0.2126 * r as f64 + 0.7152 * g as f64 + 0.0722 * b as f64
    }

    fn fills(svg: &str) -> Vec<(usize, usize, String)> {
        svg.lines()
            .filter(|l| l.contains(r#"class="cell""#))
            .map(|l| {
                let attr = |name: &str| {
                    let start = l.find(&format!("{name}=\"")).unwrap() + name.len() + 2;
                    let end = start + l[start..].find('"').unwrap();
                    l[start..end].to_string()
                };
                (attr("data-row").parse().unwrap(), attr("data-col").parse().unwrap(), attr("fill"))
            })
            .collect()
    }

    fn surface(res: usize, f: impl Fn(usize, usize) -> f64) -> GridSurface {
        GridSurface {
            resolution: res,
            values: (0..res * res).map(|k| f(k / res, k % res)).collect(),
            valid: vec![true; res * res],
        }
    }

    fn opts() -> HeatmapOptions {
        HeatmapOptions {
            title: "t".into(),
            negate: false,
            span: 1.0,
        }
    }

    #[test]
    fn colormap_luminance_is_monotone() {
        let mut last = -1.0;
        for i in 0..=200 {
            let l = luminance(&colormap(i as f64 / 200.0));
            assert!(l >= last, "{i}");
            last = l;
        }
    }

    #[test]
    fn full_grid_has_one_rect_per_cell() {
        let svg = render_heatmap(&surface(31, |r, c| (r * c) as f64), &opts());
        assert_eq!(svg.matches(r#"class="cell"#).count(), 961);
        assert!(svg.contains(r#"class="center""#));
        assert_eq!(svg, render_heatmap(&surface(31, |r, c| (r * c) as f64), &opts()));
    }

    #[test]
    fn constant_grid_is_uniform() {
        let svg = render_heatmap(&surface(5, |_, _| 2.5), &opts());
        let f = fills(&svg);
        assert!(f.iter().all(|(_, _, c)| *c == f[0].2));
        assert!(svg.contains(r#"class="bar-max" x="#) && svg.matches(">2.5<").count() == 2);
    }

    #[test]
    fn paraboloid_color_order_follows_values() {
        let res = 31;
        let g = surface(res, |r, c| {
            let (a, b) = (c as f64 - 15.0, r as f64 - 15.0);
            a * a + 0.5 * b * b
        });
        let f = fills(&render_heatmap(&g, &opts()));
        let lum = |row: usize, col: usize| luminance(&f.iter().find(|(r, c, _)| *r == row && *c == col).unwrap().2);
        // 8-bit colors can tie between neighbours near the minimum
        for i in 15..30 {
            assert!(lum(15, i + 1) >= lum(15, i));
            assert!(lum(i + 1, 15) >= lum(i, 15));
            assert!(lum(15, 29 - i) >= lum(15, 30 - i));
        }
        assert!(lum(15, 30) > lum(15, 20) && lum(15, 20) > lum(15, 15));
        assert!(lum(30, 15) > lum(20, 15) && lum(20, 15) > lum(15, 15));
        let neg = render_heatmap(&g, &HeatmapOptions { negate: true, ..opts() });
        let nf = fills(&neg);
        let nl = |col: usize| luminance(&nf.iter().find(|(r, c, _)| *r == 15 && *c == col).unwrap().2);
        assert!(nl(15) > nl(20));
    }

    #[test]
    fn invalid_cells_are_hatched() {
        let mut g = surface(3, |_, _| 1.0);
        g.valid[4] = false;
        let svg = render_heatmap(&g, &opts());
        assert_eq!(svg.matches("cell invalid").count(), 1);
        assert!(svg.contains("url(#hatch)"));
    }

    fn pt(seed: u64, step: u64, y: f64) -> CurvePoint {
        CurvePoint {
            seed,
            env_step: step,
            gradient_step: step / 10,
            mean_return: y,
            std_return: 0.0,
            discounted_return: 0.0,
        }
    }

    #[test]
    fn single_and_identical_seeds_have_zero_band() {
        let one: Vec<CurvePoint> = (1..5).map(|i| pt(0, i * 100, i as f64)).collect();
        let a = aggregate_curves(&one, XAxis::EnvSteps).unwrap();
        assert!(a.std.iter().all(|s| *s == 0.0));
        let mut two = one.clone();
        two.extend(one.iter().map(|p| CurvePoint { seed: 1, ..*p }));
        let b = aggregate_curves(&two, XAxis::EnvSteps).unwrap();
        assert!(b.std.iter().all(|s| *s == 0.0));
        assert_eq!(b.mean, a.mean);
    }

    #[test]
    fn band_equals_population_std_of_seed_index() {
        let pts: Vec<CurvePoint> = (0..4u64).flat_map(|s| (1..4).map(move |i| pt(s, i * 10, s as f64))).collect();
        let a = aggregate_curves(&pts, XAxis::GradientSteps).unwrap();
        // values 0,1,2,3: mean 1.5, population std sqrt(1.25)
        for (m, s) in a.mean.iter().zip(&a.std) {
            assert_eq!(*m, 1.5);
            assert!((s - 1.25f64.sqrt()).abs() < 1e-15);
        }
        assert_eq!(a.x, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn mismatched_grids_are_interpolated_with_warning() {
        let mut pts = vec![pt(0, 0, 0.0), pt(0, 100, 10.0)];
        pts.extend([pt(1, 0, 0.0), pt(1, 50, 5.0), pt(1, 100, 10.0)]);
        let a = aggregate_curves(&pts, XAxis::EnvSteps).unwrap();
        assert_eq!(a.x, vec![0.0, 50.0, 100.0]);
        assert_eq!(a.mean, vec![0.0, 5.0, 10.0]);
        assert_eq!(a.warnings.len(), 1);
    }

    #[test]
    fn line_chart_is_deterministic_xml() {
        let s = vec![Series {
            label: "a<b".into(),
            x: vec![0.0, 1.0, 2.0],
            y: vec![1.0, 3.0, 2.0],
            band: Some(vec![0.5, 0.5, 0.0]),
        }];
        let o = ChartOptions {
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
        };
        let a = render_line_chart(&s, &o);
        assert_eq!(a, render_line_chart(&s, &o));
        assert!(a.contains("a&lt;b") && a.contains(r#"class="band""#));
        assert_eq!(a.matches("<svg").count(), a.matches("</svg>").count());
    }
}
