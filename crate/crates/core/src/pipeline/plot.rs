//! Scatter rendering: one marker per person colored by cluster, a circled
//! centroid per cluster, and a dashed rectangle around each flagged
//! cluster's extent.

use super::PipelineError;
use crate::congestion::CongestionReport;
use crate::geometry::GroundPoint;
use crate::svg::{DataViewport, SvgDoc, CLUSTER_PALETTE};
use std::path::Path;

const PLOT_SIZE: f64 = 640.0;
const PLOT_MARGIN: f64 = 40.0;

/// Render the scatter SVG. Identical inputs produce byte-identical output.
pub fn render_scatter(
    report: &CongestionReport,
    points: &[GroundPoint],
) -> Result<String, PipelineError> {
    if report.assignments.len() != points.len() {
        return Err(PipelineError::Inconsistent {
            message: format!(
                "{} assignments for {} points",
                report.assignments.len(),
                points.len()
            ),
        });
    }

    // Fit the extent to the data with a 10% margin; centroids count too.
    let mut xs: Vec<f64> = points.iter().map(|p| p.x).collect();
    let mut ys: Vec<f64> = points.iter().map(|p| p.y).collect();
    xs.extend(report.centroids.iter().map(|c| c.x));
    ys.extend(report.centroids.iter().map(|c| c.y));
    let (x_min, x_max, y_min, y_max) = if xs.is_empty() {
        (0.0, 1.0, 0.0, 1.0)
    } else {
        let x_min = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let x_max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let y_min = ys.iter().copied().fold(f64::INFINITY, f64::min);
        let y_max = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let pad_x = 0.1 * (x_max - x_min).max(1e-9);
        let pad_y = 0.1 * (y_max - y_min).max(1e-9);
        (x_min - pad_x, x_max + pad_x, y_min - pad_y, y_max + pad_y)
    };
    let view = DataViewport {
        x_min,
        x_max,
        y_min,
        y_max,
        width: PLOT_SIZE,
        height: PLOT_SIZE,
        margin: PLOT_MARGIN,
    };

    let mut doc = SvgDoc::new(PLOT_SIZE, PLOT_SIZE);
    // Axes along the viewport edges.
    let edge = PLOT_SIZE - PLOT_MARGIN;
    doc.line(PLOT_MARGIN, edge, edge, edge, "stroke:#444444;stroke-width:1");
    doc.line(
        PLOT_MARGIN,
        PLOT_MARGIN,
        PLOT_MARGIN,
        edge,
        "stroke:#444444;stroke-width:1",
    );

    for (point, assignment) in points.iter().zip(&report.assignments) {
        let color = CLUSTER_PALETTE[assignment.cluster_index % CLUSTER_PALETTE.len()];
        doc.circle(
            view.px(point.x),
            view.py(point.y),
            3.0,
            &format!("fill:{color}"),
            Some("person"),
        );
    }

    for centroid in &report.centroids {
        doc.circle(
            view.px(centroid.x),
            view.py(centroid.y),
            7.0,
            "fill:none;stroke:#d62728;stroke-width:2",
            Some("centroid"),
        );
    }

    for &cluster in &report.congested_clusters {
        let members: Vec<&GroundPoint> = points
            .iter()
            .zip(&report.assignments)
            .filter(|(_, a)| a.cluster_index == cluster)
            .map(|(p, _)| p)
            .collect();
        if members.is_empty() {
            continue;
        }
        let bx_min = members.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
        let bx_max = members
            .iter()
            .map(|p| p.x)
            .fold(f64::NEG_INFINITY, f64::max);
        let by_min = members.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
        let by_max = members
            .iter()
            .map(|p| p.y)
            .fold(f64::NEG_INFINITY, f64::max);
        // Pixel-space corners; y flips, so y_max maps to the rect top.
        let x = view.px(bx_min) - 6.0;
        let y = view.py(by_max) - 6.0;
        let w = view.px(bx_max) - view.px(bx_min) + 12.0;
        let h = view.py(by_min) - view.py(by_max) + 12.0;
        doc.rect(
            x,
            y,
            w,
            h,
            "fill:none;stroke:#d62728;stroke-width:1.5;stroke-dasharray:6 4",
            Some("congestion-box"),
        );
    }

    Ok(doc.finish())
}

/// Render and write `frame_<id>.svg`-style files; unwritable paths surface
/// as I/O errors.
pub fn write_scatter(
    report: &CongestionReport,
    points: &[GroundPoint],
    path: impl AsRef<Path>,
) -> Result<(), PipelineError> {
    let svg = render_scatter(report, points)?;
    std::fs::write(path, svg)?;
    Ok(())
}
