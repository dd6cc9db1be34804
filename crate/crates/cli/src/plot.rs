use std::fmt::Write as _;

use serde_json::{json, Value};
use wildgen::TrajectorySet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetKind {
    Real,
    Generated,
    Baseline,
}

impl SetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SetKind::Real => "real",
            SetKind::Generated => "generated",
            SetKind::Baseline => "baseline",
        }
    }

    fn colour(self) -> &'static str {
        match self {
            SetKind::Real => "#2e7d32",
            SetKind::Generated => "#1565c0",
            SetKind::Baseline => "#c62828",
        }
    }
}

pub struct Layer {
    pub kind: SetKind,
    pub name: String,
    pub set: TrajectorySet,
}

pub fn geojson(layers: &[Layer]) -> Value {
    let features: Vec<Value> = layers
        .iter()
        .flat_map(|layer| {
            layer.set.iter().enumerate().map(move |(i, t)| {
                let coords: Vec<[f64; 2]> = t.points.iter().map(|p| [p.lon, p.lat]).collect();
                json!({
                    "type": "Feature",
                    "properties": { "set": layer.kind.as_str(), "source": layer.name, "index": i },
                    "geometry": { "type": "LineString", "coordinates": coords },
                })
            })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": features })
}

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 600.0;
const MARGIN: f64 = 20.0;

/// Maps data coordinates into the SVG canvas, preserving aspect ratio.
struct Frame {
    min_x: f64,
    max_y: f64,
    scale: f64,
}

impl Frame {
    fn fit(points: impl Iterator<Item = (f64, f64)>) -> Frame {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in points {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        let span_x = (x1 - x0).max(1e-9);
        let span_y = (y1 - y0).max(1e-9);
        let scale = ((WIDTH - 2.0 * MARGIN) / span_x).min((HEIGHT - 2.0 * MARGIN) / span_y);
        Frame {
            min_x: x0,
            max_y: y1,
            scale,
        }
    }

    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        (
            MARGIN + (x - self.min_x) * self.scale,
            MARGIN + (self.max_y - y) * self.scale,
        )
    }
}

fn svg_open() -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

/// Polyline overlay: real green, generated blue, baselines red.
pub fn svg(layers: &[Layer]) -> String {
    let frame = Frame::fit(
        layers
            .iter()
            .flat_map(|l| l.set.iter())
            .flat_map(|t| t.points.iter().map(|p| (p.lon, p.lat))),
    );
    let mut out = svg_open();
    for layer in layers {
        let _ = writeln!(
            out,
            "<g class=\"{}\" stroke=\"{}\" stroke-width=\"1\" stroke-opacity=\"0.6\" fill=\"none\">",
            layer.kind.as_str(),
            layer.kind.colour()
        );
        for t in &layer.set {
            let pts: Vec<String> = t
                .points
                .iter()
                .map(|p| {
                    let (x, y) = frame.map(p.lon, p.lat);
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            let _ = writeln!(out, "<polyline points=\"{}\"/>", pts.join(" "));
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}

/// Scatter of the first two latent coordinates with mixture means marked.
pub fn latent_svg(codes: &[(f64, f64)], means: &[(f64, f64)]) -> String {
    let frame = Frame::fit(codes.iter().chain(means).copied());
    let mut out = svg_open();
    out.push_str("<g class=\"codes\" fill=\"#2e7d32\">\n");
    for &(x, y) in codes {
        let (cx, cy) = frame.map(x, y);
        let _ = writeln!(out, "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"3\"/>");
    }
    out.push_str("</g>\n<g class=\"means\" stroke=\"#1565c0\" stroke-width=\"2\">\n");
    for &(x, y) in means {
        let (cx, cy) = frame.map(x, y);
        let _ = writeln!(
            out,
            "<path d=\"M{:.2},{:.2}L{:.2},{:.2}M{:.2},{:.2}L{:.2},{:.2}\"/>",
            cx - 5.0,
            cy - 5.0,
            cx + 5.0,
            cy + 5.0,
            cx - 5.0,
            cy + 5.0,
            cx + 5.0,
            cy - 5.0
        );
    }
    out.push_str("</g>\n</svg>\n");
    out
}
