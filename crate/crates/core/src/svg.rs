//! Minimal deterministic SVG assembly shared by the plot emitters.
//!
//! Coordinates are formatted with fixed precision so identical inputs
//! always produce byte-identical files.

use std::fmt::Write as _;

/// Maps a data-space rectangle onto a pixel viewport (y axis flipped).
#[derive(Debug, Clone, Copy)]
pub struct DataViewport {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub width: f64,
    pub height: f64,
    pub margin: f64,
}

impl DataViewport {
    pub fn px(&self, x: f64) -> f64 {
        let span = (self.x_max - self.x_min).max(f64::MIN_POSITIVE);
        self.margin + (x - self.x_min) / span * (self.width - 2.0 * self.margin)
    }

    pub fn py(&self, y: f64) -> f64 {
        let span = (self.y_max - self.y_min).max(f64::MIN_POSITIVE);
        self.height - self.margin - (y - self.y_min) / span * (self.height - 2.0 * self.margin)
    }
}

/// Accumulates SVG elements and serializes the document.
#[derive(Debug)]
pub struct SvgDoc {
    width: f64,
    height: f64,
    body: String,
}

impl SvgDoc {
    pub fn new(width: f64, height: f64) -> Self {
        Self {
            width,
            height,
            body: String::new(),
        }
    }

    pub fn circle(&mut self, cx: f64, cy: f64, r: f64, style: &str, class: Option<&str>) {
        let class_attr = class.map(|c| format!(" class=\"{c}\"")).unwrap_or_default();
        let _ = writeln!(
            self.body,
            "  <circle{class_attr} cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"{r:.2}\" style=\"{style}\"/>"
        );
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, style: &str, class: Option<&str>) {
        let class_attr = class.map(|c| format!(" class=\"{c}\"")).unwrap_or_default();
        let _ = writeln!(
            self.body,
            "  <rect{class_attr} x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" style=\"{style}\"/>"
        );
    }

    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, style: &str) {
        let _ = writeln!(
            self.body,
            "  <line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" style=\"{style}\"/>"
        );
    }

    pub fn text(&mut self, x: f64, y: f64, size: f64, content: &str) {
        let _ = writeln!(
            self.body,
            "  <text x=\"{x:.2}\" y=\"{y:.2}\" font-size=\"{size:.1}\" font-family=\"sans-serif\">{content}</text>"
        );
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" viewBox=\"0 0 {:.0} {:.0}\">\n{}</svg>\n",
            self.width, self.height, self.width, self.height, self.body
        )
    }
}

/// Fixed cluster palette; indices wrap for clusters beyond its length.
pub const CLUSTER_PALETTE: [&str; 8] = [
    "#1f77b4", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];
