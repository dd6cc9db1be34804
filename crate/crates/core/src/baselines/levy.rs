use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::quantile;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::trajectory::{GeoPoint, Trajectory, TrajectorySet};

const MIN_SCALE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyParams {
    /// Cauchy location of step lengths, degrees.
    pub step_location: f64,
    /// Cauchy scale of step lengths, degrees.
    pub step_scale: f64,
    /// Spread of turning angles, radians.
    pub angular_sd: f64,
    /// Step-length jitter, degrees.
    pub linear_sd: f64,
    pub alpha_estimate: f64,
    /// Counter-clockwise rotation applied about the start, radians.
    pub rotation: f64,
    /// Steps are truncated at this length (the corpus 99.9th percentile).
    pub max_step: f64,
}

/// Planar angle clockwise from north: `atan2(dlon, dlat)`.
pub fn azimuth(from: GeoPoint, to: GeoPoint) -> Result<f64> {
    let (dx, dy) = (to.lon - from.lon, to.lat - from.lat);
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::InvalidArgument("azimuth of identical points".into()));
    }
    Ok(dx.atan2(dy))
}

fn mean_point(points: impl Iterator<Item = GeoPoint>) -> GeoPoint {
    let (mut x, mut y, mut n) = (0.0, 0.0, 0usize);
    for p in points {
        x += p.lon;
        y += p.lat;
        n += 1;
    }
    GeoPoint::new(x / n as f64, y / n as f64)
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI { PI } else { w }
}

/// Tail exponent from a log-log regression of the empirical survival
/// function over the upper half of the steps.
fn tail_exponent(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    let xs: Vec<(f64, f64)> = (n / 2..n)
        .filter(|&i| sorted[i] > 0.0)
        .map(|i| (sorted[i].ln(), ((n - i) as f64 / n as f64).ln()))
        .collect();
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = xs.len() as f64;
    let mx = xs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = xs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return f64::INFINITY;
    }
    let sxy: f64 = xs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    -sxy / sxx
}

pub fn fit_levy(real: &TrajectorySet) -> Result<LevyParams> {
    if real.is_empty() {
        return Err(Error::InvalidArgument("levy fit on an empty set".into()));
    }
    if real.horizon() < 3 {
        return Err(Error::InvalidArgument(
            "levy fit needs at least 3 points per trajectory".into(),
        ));
    }
    let mut steps = Vec::new();
    let (mut cos_sum, mut sin_sum, mut turns) = (0.0, 0.0, 0usize);
    for t in real {
        let mut prev_heading: Option<f64> = None;
        for w in t.points.windows(2) {
            let (dx, dy) = (w[1].lon - w[0].lon, w[1].lat - w[0].lat);
            steps.push(dx.hypot(dy));
            if dx == 0.0 && dy == 0.0 {
                continue;
            }
            let heading = dy.atan2(dx);
            if let Some(h) = prev_heading {
                let turn = wrap_angle(heading - h);
                cos_sum += turn.cos();
                sin_sum += turn.sin();
                turns += 1;
            }
            prev_heading = Some(heading);
        }
    }
    steps.sort_by(f64::total_cmp);

    let q1 = quantile(&steps, 0.25);
    let q3 = quantile(&steps, 0.75);
    let step_location = quantile(&steps, 0.5);
    let step_scale = ((q3 - q1) / 2.0).max(MIN_SCALE);

    let angular_sd = if turns == 0 {
        0.0
    } else {
        let r = (cos_sum.hypot(sin_sum) / turns as f64).min(1.0);
        (-2.0 * r.ln()).max(0.0).sqrt()
    };

    let cap = quantile(&steps, 0.99);
    let clipped: Vec<f64> = steps.iter().map(|&s| s.min(cap)).collect();
    let mean = clipped.iter().sum::<f64>() / clipped.len() as f64;
    let var = clipped.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / clipped.len() as f64;

    let start = mean_point(real.iter().map(|t| t.points[0]));
    let end = mean_point(real.iter().map(|t| t.points[t.len() - 1]));
    // A closed-loop corpus has no preferred direction.
    let rotation = azimuth(start, end).unwrap_or(0.0);

    Ok(LevyParams {
        step_location,
        step_scale,
        angular_sd,
        linear_sd: var.sqrt(),
        alpha_estimate: tail_exponent(&steps),
        rotation,
        max_step: quantile(&steps, 0.999),
    })
}

/// Walk of `steps` steps (so `steps + 1` points) from `start`.
///
/// The walk starts heading along +lon; the whole path is then rotated
/// counter-clockwise by `params.rotation` about `start`.
pub fn generate_levy(params: &LevyParams, steps: usize, start: GeoPoint, rng: &mut Rng) -> Result<Trajectory> {
    if steps < 1 {
        return Err(Error::InvalidArgument("levy walk needs at least one step".into()));
    }
    let turn = Normal::new(0.0, params.angular_sd.max(0.0))
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let jitter = Normal::new(0.0, params.linear_sd.max(0.0))
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let max_step = if params.max_step > 0.0 { params.max_step } else { f64::INFINITY };

    let (sin_r, cos_r) = params.rotation.sin_cos();
    let mut points = Vec::with_capacity(steps + 1);
    points.push(start);
    let (mut x, mut y, mut heading) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..steps {
        let u: f64 = rng.random();
        let cauchy = params.step_location + params.step_scale * (PI * (u - 0.5)).tan();
        let len = (cauchy.abs() + jitter.sample(rng)).clamp(0.0, max_step);
        x += len * heading.cos();
        y += len * heading.sin();
        heading += turn.sample(rng);
        points.push(GeoPoint::new(
            start.lon + cos_r * x - sin_r * y,
            start.lat + sin_r * x + cos_r * y,
        ));
    }
    Trajectory::new(points)
}
