//! Report serialization, success heatmaps and top-down scene drawings.

use std::fmt::Write as _;

use crate::geometry::Point2;
use crate::harness::ExperimentReport;
use crate::planner::PlanReport;
use crate::scene::SceneDescription;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Ppm,
    Svg,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "ppm" => Ok(ReportFormat::Ppm),
            "svg" => Ok(ReportFormat::Svg),
            _ => Err(Error::Format(s.to_owned())),
        }
    }
}

/// Heatmap cell edge in pixels.
pub const CELL_PX: usize = 40;

/// Six-step ramp from red (no successes) to green (all successes).
pub const COLOR_RAMP: [[u8; 3]; 6] = [
    [215, 48, 39],
    [244, 109, 67],
    [253, 174, 97],
    [217, 239, 139],
    [102, 189, 99],
    [26, 152, 80],
];

/// Ramp color for a success count out of `trials`.
pub fn ramp_color(successes: usize, trials: usize) -> [u8; 3] {
    let steps = COLOR_RAMP.len() - 1;
    let idx = if trials == 0 {
        0
    } else {
        ((successes.min(trials) * steps) as f64 / trials as f64).round() as usize
    };
    COLOR_RAMP[idx]
}

pub fn render_report(report: &ExperimentReport, format: ReportFormat) -> Result<Vec<u8>> {
    render_reports(std::slice::from_ref(report), format)
}

/// Renders several reports together. Heatmaps place one panel per report,
/// left to right, separated by a white gutter of `CELL_PX / 4`.
pub fn render_reports(reports: &[ExperimentReport], format: ReportFormat) -> Result<Vec<u8>> {
    match format {
        ReportFormat::Json => {
            let value = if reports.len() == 1 {
                serde_json::to_value(&reports[0])
            } else {
                serde_json::to_value(serde_json::json!({ "reports": reports }))
            }
            .expect("report serializes");
            let mut out = serde_json::to_vec_pretty(&value).expect("report serializes");
            out.push(b'\n');
            Ok(out)
        }
        ReportFormat::Csv => Ok(render_csv(reports).into_bytes()),
        ReportFormat::Ppm => Ok(render_ppm(reports, CELL_PX)),
        ReportFormat::Svg => Ok(render_heatmap_svg(reports, CELL_PX).into_bytes()),
    }
}

fn render_csv(reports: &[ExperimentReport]) -> String {
    let mut out = String::from("approach,x,y,successes,failures,trials\n");
    for r in reports {
        for c in &r.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.approach.label(),
                c.cell.0,
                c.cell.1,
                c.successes,
                c.failures,
                c.successes + c.failures
            );
        }
    }
    out
}

fn panel_layout(reports: &[ExperimentReport], cell_px: usize) -> (usize, usize, usize) {
    let gutter = cell_px / 4;
    let cols = reports.first().map_or(0, |r| r.grid_cols);
    let rows = reports.first().map_or(0, |r| r.grid_rows);
    let width = reports.len() * cols * cell_px + reports.len().saturating_sub(1) * gutter;
    (width, rows * cell_px, gutter)
}

/// Binary PPM; grid row y = 0 is drawn at the top.
pub fn render_ppm(reports: &[ExperimentReport], cell_px: usize) -> Vec<u8> {
    let (width, height, gutter) = panel_layout(reports, cell_px);
    let mut pixels = vec![255u8; width * height * 3];
    for (k, r) in reports.iter().enumerate() {
        let x0 = k * (r.grid_cols * cell_px + gutter);
        for c in &r.cells {
            let color = ramp_color(c.successes, r.trials_per_cell);
            for py in c.cell.1 * cell_px..(c.cell.1 + 1) * cell_px {
                for px in x0 + c.cell.0 * cell_px..x0 + (c.cell.0 + 1) * cell_px {
                    let at = (py * width + px) * 3;
                    pixels[at..at + 3].copy_from_slice(&color);
                }
            }
        }
    }
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend(pixels);
    out
}

fn hex(c: [u8; 3]) -> String {
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

pub fn render_heatmap_svg(reports: &[ExperimentReport], cell_px: usize) -> String {
    let (width, height, gutter) = panel_layout(reports, cell_px);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{}\" viewBox=\"0 0 {width} {}\">\n",
        height + cell_px / 2,
        height + cell_px / 2
    );
    for (k, r) in reports.iter().enumerate() {
        let x0 = k * (r.grid_cols * cell_px + gutter);
        for c in &r.cells {
            let (x, y) = (x0 + c.cell.0 * cell_px, c.cell.1 * cell_px);
            let _ = writeln!(
                out,
                "  <rect class=\"cell\" x=\"{x}\" y=\"{y}\" width=\"{cell_px}\" height=\"{cell_px}\" fill=\"{}\" stroke=\"#ffffff\"/>",
                hex(ramp_color(c.successes, r.trials_per_cell))
            );
            let _ = writeln!(
                out,
                "  <text x=\"{}\" y=\"{}\" font-size=\"{}\" text-anchor=\"middle\" dominant-baseline=\"middle\">{}</text>",
                x + cell_px / 2,
                y + cell_px / 2,
                cell_px / 3,
                c.successes
            );
        }
        let _ = writeln!(
            out,
            "  <text x=\"{}\" y=\"{}\" font-size=\"{}\" text-anchor=\"middle\">{}</text>",
            x0 + r.grid_cols * cell_px / 2,
            height + cell_px / 3,
            cell_px / 4,
            r.approach.label()
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Top-down drawing of a scene and a plan: table, object, accepted
/// candidates as green arrows and pruned probes as red dots.
pub fn render_scene_svg(scene: &SceneDescription, plan: Option<&PlanReport>) -> Result<String> {
    const PX_PER_M: f64 = 200.0;
    let object = crate::scene::observe_object(scene)?;
    let mut extent: Vec<Point2> = vec![object.position.planar(), scene.robot_start.position()];
    if let Some(t) = &scene.table {
        extent.extend(t.footprint_corners());
    }
    for b in &scene.obstacles {
        extent.extend(b.footprint_corners());
    }
    if let Some(p) = plan {
        extent.extend(p.set.iter().map(|c| c.pose.position()));
        extent.extend(p.pruned.iter().map(|c| c.position));
    }
    let pad = 0.5;
    let min_x = extent.iter().map(|p| p.x).fold(f64::INFINITY, f64::min) - pad;
    let max_x = extent.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max) + pad;
    let min_y = extent.iter().map(|p| p.y).fold(f64::INFINITY, f64::min) - pad;
    let max_y = extent.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max) + pad;
    // SVG y grows downward; flip map y.
    let sx = |x: f64| (x - min_x) * PX_PER_M;
    let sy = |y: f64| (max_y - y) * PX_PER_M;
    let points = |ps: &[Point2]| {
        ps.iter()
            .map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.y)))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let (w, h) = ((max_x - min_x) * PX_PER_M, (max_y - min_y) * PX_PER_M);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.2} {h:.2}\">\n"
    );
    if let Some(t) = &scene.table {
        let _ = writeln!(
            out,
            "  <polygon class=\"table\" points=\"{}\" fill=\"#c8b496\" stroke=\"#5a4632\"/>",
            points(&t.footprint_corners())
        );
    }
    for b in &scene.obstacles {
        let _ = writeln!(
            out,
            "  <polygon class=\"obstacle\" points=\"{}\" fill=\"#777777\"/>",
            points(&b.footprint_corners())
        );
    }
    let o = object.position;
    let _ = writeln!(
        out,
        "  <circle class=\"object\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"{:.2}\" fill=\"#1f4fbf\"/>",
        sx(o.x),
        sy(o.y),
        (object.width / 2.0 * PX_PER_M).max(3.0)
    );
    if let Some(p) = plan {
        for probe in &p.pruned {
            let _ = writeln!(
                out,
                "  <circle class=\"pruned\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"#d73027\"/>",
                sx(probe.position.x),
                sy(probe.position.y)
            );
        }
        let len = 0.15 * PX_PER_M;
        for c in p.set.iter() {
            let (x, y) = (sx(c.pose.x), sy(c.pose.y));
            // Screen rotation is clockwise, so negate the map heading.
            let _ = writeln!(
                out,
                "  <g class=\"candidate\" data-radial-index=\"{}\" data-heading=\"{}\" transform=\"translate({x:.2},{y:.2}) rotate({:.4})\">\
<line x1=\"0\" y1=\"0\" x2=\"{len:.1}\" y2=\"0\" stroke=\"#1a9850\" stroke-width=\"3\"/>\
<polygon points=\"{len:.1},0 {:.1},-6 {:.1},6\" fill=\"#1a9850\"/></g>",
                c.radial_index,
                c.pose.heading,
                -c.pose.heading.to_degrees(),
                len - 10.0,
                len - 10.0
            );
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}
