//! SVG heatmaps of normalized relevance.
//!
//! Cell colours follow a diverging ramp: 0 is blue `#0B3D91`, 0.5 white,
//! 1 red `#C1272D`, interpolated linearly in RGB. Rows keep record order top
//! to bottom; the mean row, when present, sits below a small gap.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lrp::HeatmapMatrix;

pub const LOW: [u8; 3] = [0x0B, 0x3D, 0x91];
pub const MID: [u8; 3] = [0xFF, 0xFF, 0xFF];
pub const HIGH: [u8; 3] = [0xC1, 0x27, 0x2D];

const CELL_W: f64 = 22.0;
const LEFT: f64 = 70.0;
const TOP: f64 = 130.0;
const MAX_GRID_H: f64 = 900.0;

/// Hex colour of a value in [0,1] (clamped).
pub fn ramp(v: f64) -> String {
    let v = if v.is_nan() { 0.5 } else { v.clamp(0.0, 1.0) };
    let (a, b, t) = if v < 0.5 {
        (LOW, MID, v / 0.5)
    } else {
        (MID, HIGH, (v - 0.5) / 0.5)
    };
    let mix = |i: usize| (a[i] as f64 + (b[i] as f64 - a[i] as f64) * t).round() as u8;
    format!("#{:02X}{:02X}{:02X}", mix(0), mix(1), mix(2))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders the matrix. `threshold` is marked on the legend; `description`
/// goes into the SVG `<desc>` element.
pub fn render_heatmap_svg(
    m: &HeatmapMatrix,
    title: &str,
    threshold: f64,
    description: &str,
) -> Result<String> {
    if m.rows.is_empty() {
        return Err(Error::Relevance("cannot render an empty heatmap".into()));
    }
    let n = m.feature_names.len();
    let rows = m.rows.len();
    let cell_h = (MAX_GRID_H / rows as f64).clamp(1.0, 16.0);
    let grid_w = CELL_W * n as f64;
    let grid_h = cell_h * rows as f64;
    let mean_gap = if m.mean.is_some() { 6.0 } else { 0.0 };
    let mean_h = if m.mean.is_some() { 16.0 } else { 0.0 };
    let legend_y = TOP + grid_h + mean_gap + mean_h + 30.0;
    let width = LEFT + grid_w + 20.0;
    let height = legend_y + 50.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    let _ = writeln!(s, "<desc>{}</desc>", escape(description));
    let _ = writeln!(
        s,
        r#"<text x="{LEFT}" y="16" font-size="13">{}</text>"#,
        escape(title)
    );
    for (j, name) in m.feature_names.iter().enumerate() {
        let x = LEFT + CELL_W * (j as f64 + 0.5);
        let _ = writeln!(
            s,
            r#"<text class="feature" x="{x:.1}" y="{:.1}" transform="rotate(-60 {x:.1} {:.1})">{}</text>"#,
            TOP - 6.0,
            TOP - 6.0,
            escape(name)
        );
    }
    let label_every = (rows / 40).max(1);
    for (i, row) in m.rows.iter().enumerate() {
        let y = TOP + cell_h * i as f64;
        if i % label_every == 0 && cell_h >= 8.0 {
            let id = m.record_ids.get(i).copied().unwrap_or(i);
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{id}</text>"#,
                LEFT - 4.0,
                y + cell_h * 0.75
            );
        }
        for (j, &v) in row.iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<rect class="cell" data-row="{i}" data-col="{j}" x="{:.1}" y="{y:.3}" width="{CELL_W}" height="{cell_h:.3}" fill="{}"/>"#,
                LEFT + CELL_W * j as f64,
                ramp(v)
            );
        }
    }
    if let Some(mean) = &m.mean {
        let y = TOP + grid_h + mean_gap;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">mean</text>"#,
            LEFT - 4.0,
            y + 12.0
        );
        for (j, &v) in mean.iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<rect class="cell mean" data-row="mean" data-col="{j}" x="{:.1}" y="{y:.3}" width="{CELL_W}" height="{mean_h}" fill="{}"/>"#,
                LEFT + CELL_W * j as f64,
                ramp(v)
            );
        }
    }
    // Legend: 50-step ramp from 0 to 1 with a threshold marker.
    let legend_w = (grid_w).clamp(120.0, 300.0);
    let steps = 50;
    for k in 0..steps {
        let v = k as f64 / (steps - 1) as f64;
        let _ = writeln!(
            s,
            r#"<rect class="legend" x="{:.2}" y="{legend_y:.1}" width="{:.2}" height="10" fill="{}"/>"#,
            LEFT + legend_w * k as f64 / steps as f64,
            legend_w / steps as f64 + 0.3,
            ramp(v)
        );
    }
    for (v, label) in [(0.0, "0"), (0.5, "0.5"), (1.0, "1")] {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{label}</text>"#,
            LEFT + legend_w * v,
            legend_y + 22.0
        );
    }
    let tx = LEFT + legend_w * threshold.clamp(0.0, 1.0);
    let _ = writeln!(
        s,
        r#"<line class="threshold" x1="{tx:.1}" y1="{:.1}" x2="{tx:.1}" y2="{:.1}" stroke="black" stroke-width="1.5"/>"#,
        legend_y - 4.0,
        legend_y + 14.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{tx:.1}" y="{:.1}" text-anchor="middle">τ = {threshold}</text>"#,
        legend_y + 36.0
    );
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn write_heatmap_svg(
    m: &HeatmapMatrix,
    title: &str,
    threshold: f64,
    description: &str,
    path: &Path,
) -> Result<()> {
    std::fs::write(path, render_heatmap_svg(m, title, threshold, description)?)?;
    Ok(())
}
