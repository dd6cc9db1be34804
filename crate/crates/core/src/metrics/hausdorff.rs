use crate::error::{Error, Result};
use crate::trajectory::{GeoPoint, TrajectorySet};

/// `max_{a in A} min_{b in B} |a - b|` in degree space.
pub fn hausdorff_directed(a: &[GeoPoint], b: &[GeoPoint]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("hausdorff distance of an empty set".into()));
    }
    let mut worst_sq: f64 = 0.0;
    for p in a {
        let mut best = f64::INFINITY;
        for q in b {
            let d = p.distance_sq(q);
            if d < best {
                best = d;
                // Cannot raise the running maximum any further.
                if best <= worst_sq {
                    break;
                }
            }
        }
        worst_sq = worst_sq.max(best);
    }
    Ok(worst_sq.sqrt())
}

pub fn hausdorff(a: &[GeoPoint], b: &[GeoPoint]) -> Result<f64> {
    Ok(hausdorff_directed(a, b)?.max(hausdorff_directed(b, a)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NearestRealSummary {
    pub min: f64,
    pub max: f64,
    pub avg: f64,
    /// Distance of each generated trajectory to its closest real one.
    pub per_trajectory: Vec<f64>,
}

/// For every generated trajectory, the Hausdorff distance to the closest
/// real trajectory; then min, max and mean over generated trajectories.
pub fn nearest_real_summary(generated: &TrajectorySet, real: &TrajectorySet) -> Result<NearestRealSummary> {
    if generated.is_empty() || real.is_empty() {
        return Err(Error::InvalidArgument("nearest-real summary of an empty set".into()));
    }
    let per_trajectory = generated
        .iter()
        .map(|g| {
            real.iter()
                .map(|r| hausdorff(&g.points, &r.points))
                .try_fold(f64::INFINITY, |acc, d| d.map(|d| acc.min(d)))
        })
        .collect::<Result<Vec<_>>>()?;
    let min = per_trajectory.iter().copied().fold(f64::INFINITY, f64::min);
    let max = per_trajectory.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let avg = per_trajectory.iter().sum::<f64>() / per_trajectory.len() as f64;
    Ok(NearestRealSummary {
        min,
        max,
        // Rounding in the mean can nudge it just outside [min, max].
        avg: avg.clamp(min, max),
        per_trajectory,
    })
}
