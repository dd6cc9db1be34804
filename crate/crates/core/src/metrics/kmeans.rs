use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::trajectory::GeoPoint;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub k: usize,
    pub centroids: Vec<GeoPoint>,
    /// Sum of squared distances to the assigned centroids.
    pub distortion: f64,
    pub iterations: usize,
}

impl KMeansModel {
    /// Index of the nearest centroid; ties go to the lower index.
    pub fn assign(&self, p: &GeoPoint) -> usize {
        nearest(&self.centroids, p)
    }
}

fn nearest(centroids: &[GeoPoint], p: &GeoPoint) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.iter().enumerate() {
        let d = p.distance_sq(c);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

/// Randomized farthest-point seeding: each new centroid is drawn with
/// probability proportional to its squared distance from the chosen ones.
fn seed_centroids(points: &[GeoPoint], k: usize, rng: &mut rng::Rng) -> Vec<GeoPoint> {
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)]];
    let mut d2: Vec<f64> = points.iter().map(|p| p.distance_sq(&centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            d2.iter()
                .position(|&d| {
                    u -= d;
                    u < 0.0
                })
                .unwrap_or(n - 1)
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick];
        for (slot, p) in d2.iter_mut().zip(points) {
            *slot = slot.min(p.distance_sq(&c));
        }
        centroids.push(c);
    }
    centroids
}

/// Lloyd iterations until the assignment stops changing or `max_iters`.
/// Also returns the distortion after every update step.
pub fn kmeans_fit_traced(
    points: &[GeoPoint],
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<(KMeansModel, Vec<f64>)> {
    if k < 1 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if points.len() < k {
        return Err(Error::InvalidArgument(format!(
            "{} points cannot form {k} clusters",
            points.len()
        )));
    }
    let mut rng = rng::seeded(seed);
    let mut centroids = seed_centroids(points, k, &mut rng);
    let mut assignment = vec![usize::MAX; points.len()];
    let mut trace = Vec::new();
    let mut iterations = 0;
    for _ in 0..max_iters.max(1) {
        let mut changed = false;
        for (slot, p) in assignment.iter_mut().zip(points) {
            let j = nearest(&centroids, p);
            if *slot != j {
                *slot = j;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        iterations += 1;
        let mut sums = vec![(0.0, 0.0, 0usize); k];
        for (&j, p) in assignment.iter().zip(points) {
            sums[j].0 += p.lon;
            sums[j].1 += p.lat;
            sums[j].2 += 1;
        }
        for (c, (sx, sy, n)) in centroids.iter_mut().zip(sums) {
            if n > 0 {
                *c = GeoPoint::new(sx / n as f64, sy / n as f64);
            }
        }
        trace.push(distortion_of(points, &centroids, &assignment));
    }
    let distortion = distortion_of(points, &centroids, &assignment);
    Ok((
        KMeansModel {
            k,
            centroids,
            distortion,
            iterations,
        },
        trace,
    ))
}

fn distortion_of(points: &[GeoPoint], centroids: &[GeoPoint], assignment: &[usize]) -> f64 {
    points
        .iter()
        .zip(assignment)
        .map(|(p, &j)| p.distance_sq(&centroids[j]))
        .sum()
}

pub fn kmeans_fit(points: &[GeoPoint], k: usize, seed: u64, max_iters: usize) -> Result<KMeansModel> {
    kmeans_fit_traced(points, k, seed, max_iters).map(|(m, _)| m)
}

/// Points per cluster under the nearest-centroid rule.
pub fn cluster_histogram(model: &KMeansModel, points: &[GeoPoint]) -> Vec<usize> {
    let mut counts = vec![0; model.k];
    for p in points {
        counts[model.assign(p)] += 1;
    }
    counts
}

/// Mean silhouette over all points. Points in singleton clusters, and points
/// whose intra- and nearest-cluster distances are both zero, score 0.
pub fn silhouette_score(points: &[GeoPoint], assignments: &[usize]) -> Result<f64> {
    if points.len() != assignments.len() {
        return Err(Error::Shape("points and assignments differ in length".into()));
    }
    let k = assignments.iter().copied().max().map_or(0, |m| m + 1);
    if k < 2 {
        return Err(Error::InvalidArgument("silhouette needs at least 2 clusters".into()));
    }
    let mut sizes = vec![0usize; k];
    for &a in assignments {
        sizes[a] += 1;
    }
    if sizes.contains(&0) {
        return Err(Error::InvalidArgument("silhouette with an empty cluster".into()));
    }
    let mut sums = vec![0.0; k];
    let mut total = 0.0;
    for (i, p) in points.iter().enumerate() {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for (q, &b) in points.iter().zip(assignments) {
            sums[b] += p.distance(q);
        }
        let own = assignments[i];
        if sizes[own] == 1 {
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&j| j != own)
            .map(|j| sums[j] / sizes[j] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / points.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KChoice {
    pub k: usize,
    /// `(k, silhouette)` for every candidate.
    pub silhouettes: Vec<(usize, f64)>,
    /// `(k, distortion)` for the elbow plot.
    pub distortions: Vec<(usize, f64)>,
}

/// Picks the k in `k_min..=k_max` with the best silhouette (ties to the
/// smaller k).
pub fn choose_k(points: &[GeoPoint], k_min: usize, k_max: usize, seed: u64) -> Result<KChoice> {
    if k_min < 2 || k_max < k_min {
        return Err(Error::InvalidArgument("need 2 <= k_min <= k_max".into()));
    }
    let mut silhouettes = Vec::new();
    let mut distortions = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for k in k_min..=k_max {
        let model = kmeans_fit(points, k, seed, 300)?;
        let assignments: Vec<usize> = points.iter().map(|p| model.assign(p)).collect();
        // Clusters left empty by the fit make the silhouette undefined.
        let s = silhouette_score(points, &assignments).unwrap_or(f64::NEG_INFINITY);
        silhouettes.push((k, s));
        distortions.push((k, model.distortion));
        if best.is_none_or(|(_, bs)| s > bs) {
            best = Some((k, s));
        }
    }
    Ok(KChoice {
        k: best.map_or(k_min, |b| b.0),
        silhouettes,
        distortions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cluster_closed_form() {
        let pts = vec![
            GeoPoint::new(0.0, 0.0),
            GeoPoint::new(2.0, 0.0),
            GeoPoint::new(1.0, 3.0),
        ];
        let m = kmeans_fit(&pts, 1, 0, 100).unwrap();
        assert!((m.centroids[0].lon - 1.0).abs() < 1e-12);
        assert!((m.centroids[0].lat - 1.0).abs() < 1e-12);
        // Per-point variance 2/3 + 2 = 8/3, times 3 points.
        assert!((m.distortion - 8.0).abs() < 1e-12);
        assert!(kmeans_fit(&pts, 4, 0, 100).is_err());
    }

    #[test]
    fn histogram_rules() {
        let m = KMeansModel {
            k: 2,
            centroids: vec![GeoPoint::new(0.0, 0.0), GeoPoint::new(10.0, 0.0)],
            distortion: 0.0,
            iterations: 0,
        };
        assert_eq!(cluster_histogram(&m, &[]), vec![0, 0]);
        // Equidistant point goes to the lower index.
        assert_eq!(cluster_histogram(&m, &[GeoPoint::new(5.0, 0.0)]), vec![1, 0]);
        let far: Vec<GeoPoint> = (0..5).map(|i| GeoPoint::new(-1000.0, i as f64)).collect();
        assert_eq!(cluster_histogram(&m, &far), vec![5, 0]);
    }

    #[test]
    fn silhouette_degenerate_and_errors() {
        let pts = vec![GeoPoint::new(1.0, 1.0); 4];
        assert_eq!(silhouette_score(&pts, &[0, 0, 1, 1]).unwrap(), 0.0);
        assert!(silhouette_score(&pts, &[0, 0, 0, 0]).is_err());
        assert!(silhouette_score(&pts, &[0, 0, 2, 2]).is_err());
    }
}
