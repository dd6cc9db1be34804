use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A position in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lon: f64,
    pub lat: f64,
}

impl GeoPoint {
    pub const fn new(lon: f64, lat: f64) -> Self {
        GeoPoint { lon, lat }
    }

    /// Builds a point and checks it is a valid geographic coordinate.
    pub fn checked(lon: f64, lat: f64) -> Result<Self> {
        if !lon.is_finite() || !lat.is_finite() {
            return Err(Error::InvalidArgument("non-finite coordinate".into()));
        }
        if !(-180.0..=180.0).contains(&lon) {
            return Err(Error::InvalidArgument("longitude out of range".into()));
        }
        if !(-90.0..=90.0).contains(&lat) {
            return Err(Error::InvalidArgument("latitude out of range".into()));
        }
        Ok(GeoPoint { lon, lat })
    }

    pub fn is_finite(&self) -> bool {
        self.lon.is_finite() && self.lat.is_finite()
    }

    /// Euclidean distance in degree space.
    pub fn distance(&self, other: &GeoPoint) -> f64 {
        (self.lon - other.lon).hypot(self.lat - other.lat)
    }

    pub fn distance_sq(&self, other: &GeoPoint) -> f64 {
        let dx = self.lon - other.lon;
        let dy = self.lat - other.lat;
        dx * dx + dy * dy
    }
}

/// One daily track of fixed length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<GeoPoint>,
}

impl Trajectory {
    pub fn new(points: Vec<GeoPoint>) -> Result<Self> {
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument("trajectory has non-finite points".into()));
        }
        Ok(Trajectory { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn lons(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.lon).collect()
    }

    pub fn lats(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.lat).collect()
    }

    pub fn from_coords(lons: &[f64], lats: &[f64]) -> Result<Self> {
        if lons.len() != lats.len() {
            return Err(Error::Shape("lon/lat lengths differ".into()));
        }
        Trajectory::new(
            lons.iter()
                .zip(lats)
                .map(|(&lon, &lat)| GeoPoint::new(lon, lat))
                .collect(),
        )
    }

    /// Sum of consecutive point distances.
    pub fn path_length(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].distance(&w[1])).sum()
    }
}

/// A corpus of trajectories sharing one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySet {
    trajectories: Vec<Trajectory>,
    horizon: usize,
}

impl TrajectorySet {
    pub fn new(trajectories: Vec<Trajectory>) -> Result<Self> {
        let horizon = trajectories
            .first()
            .map(Trajectory::len)
            .ok_or_else(|| Error::InvalidArgument("trajectory set is empty".into()))?;
        Self::with_horizon(trajectories, horizon)
    }

    /// Like [`TrajectorySet::new`] but allows an empty set of known horizon.
    pub fn with_horizon(trajectories: Vec<Trajectory>, horizon: usize) -> Result<Self> {
        if let Some(t) = trajectories.iter().find(|t| t.len() != horizon) {
            return Err(Error::Shape(format!(
                "trajectory of length {} in a set of horizon {horizon}",
                t.len()
            )));
        }
        Ok(TrajectorySet {
            trajectories,
            horizon,
        })
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn into_trajectories(self) -> Vec<Trajectory> {
        self.trajectories
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Trajectory> {
        self.trajectories.get(i)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Trajectory> {
        self.trajectories.iter()
    }

    /// Every point of every trajectory, in order.
    pub fn pooled_points(&self) -> Vec<GeoPoint> {
        self.trajectories
            .iter()
            .flat_map(|t| t.points.iter().copied())
            .collect()
    }

    /// Keeps the first `n` trajectories.
    pub fn truncated(&self, n: usize) -> TrajectorySet {
        TrajectorySet {
            trajectories: self.trajectories.iter().take(n).cloned().collect(),
            horizon: self.horizon,
        }
    }

    pub fn mean_path_length(&self) -> f64 {
        if self.trajectories.is_empty() {
            return 0.0;
        }
        self.trajectories.iter().map(Trajectory::path_length).sum::<f64>()
            / self.trajectories.len() as f64
    }
}

impl<'a> IntoIterator for &'a TrajectorySet {
    type Item = &'a Trajectory;
    type IntoIter = std::slice::Iter<'a, Trajectory>;

    fn into_iter(self) -> Self::IntoIter {
        self.trajectories.iter()
    }
}
