use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::trajectory::{GeoPoint, TrajectorySet};

/// Cross-product tolerance for boundary-inclusive containment.
const CONTAINS_TOL: f64 = 1e-12;

/// A strictly convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexRegion {
    vertices: Vec<GeoPoint>,
}

fn cross(o: &GeoPoint, a: &GeoPoint, b: &GeoPoint) -> f64 {
    (a.lon - o.lon) * (b.lat - o.lat) - (a.lat - o.lat) * (b.lon - o.lon)
}

impl ConvexRegion {
    pub fn vertices(&self) -> &[GeoPoint] {
        &self.vertices
    }

    /// Inside or on the boundary.
    pub fn contains(&self, p: &GeoPoint) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| cross(&self.vertices[i], &self.vertices[(i + 1) % n], p) >= -CONTAINS_TOL)
    }

    pub fn contains_all(&self, points: &[GeoPoint]) -> bool {
        points.iter().all(|p| self.contains(p))
    }

    /// GeoJSON Polygon with a closed outer ring.
    pub fn to_geojson(&self) -> Value {
        let mut ring: Vec<[f64; 2]> = self.vertices.iter().map(|p| [p.lon, p.lat]).collect();
        ring.push([self.vertices[0].lon, self.vertices[0].lat]);
        json!({ "type": "Polygon", "coordinates": [ring] })
    }

    /// Reads a GeoJSON Polygon; the hull of its outer ring is rebuilt so the
    /// result satisfies the region invariants.
    pub fn from_geojson(value: &Value) -> Result<Self> {
        let bad = || Error::InvalidArgument("expected a GeoJSON Polygon".into());
        if value.get("type").and_then(Value::as_str) != Some("Polygon") {
            return Err(bad());
        }
        let ring = value
            .get("coordinates")
            .and_then(|c| c.get(0))
            .and_then(Value::as_array)
            .ok_or_else(bad)?;
        let points = ring
            .iter()
            .map(|p| {
                let lon = p.get(0).and_then(Value::as_f64).ok_or_else(bad)?;
                let lat = p.get(1).and_then(Value::as_f64).ok_or_else(bad)?;
                Ok(GeoPoint::new(lon, lat))
            })
            .collect::<Result<Vec<_>>>()?;
        convex_hull(&points)
    }
}

/// Andrew's monotone chain. Collinear boundary points are dropped and the
/// result starts at the lexicographically smallest vertex.
pub fn convex_hull(points: &[GeoPoint]) -> Result<ConvexRegion> {
    if points.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidArgument("non-finite point".into()));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.lon.total_cmp(&b.lon).then(a.lat.total_cmp(&b.lat)));
    pts.dedup();
    if pts.len() < 3 {
        return Err(Error::DegenerateHull);
    }

    let mut hull: Vec<GeoPoint> = Vec::with_capacity(2 * pts.len());
    for p in pts.iter() {
        while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    let lower_len = hull.len() + 1;
    for p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    hull.pop();
    if hull.len() < 3 {
        return Err(Error::DegenerateHull);
    }
    Ok(ConvexRegion { vertices: hull })
}

/// Keeps trajectories whose every point lies in `region`, preserving order.
pub fn mbr_filter(candidates: &TrajectorySet, region: &ConvexRegion) -> Result<(TrajectorySet, usize)> {
    let (kept, discarded): (Vec<_>, Vec<_>) = candidates
        .iter()
        .cloned()
        .partition(|t| region.contains_all(&t.points));
    Ok((
        TrajectorySet::with_horizon(kept, candidates.horizon())?,
        discarded.len(),
    ))
}
