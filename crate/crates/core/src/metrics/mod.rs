//! Evaluation metrics: nearest-real Hausdorff distance summaries and the
//! Pearson correlation of per-cluster point counts.

mod hausdorff;
mod kmeans;

pub use hausdorff::{hausdorff, hausdorff_directed, nearest_real_summary, NearestRealSummary};
pub use kmeans::{choose_k, cluster_histogram, kmeans_fit, kmeans_fit_traced, silhouette_score, KChoice, KMeansModel};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::TrajectorySet;

/// Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument(
            "pearson needs two vectors of equal length >= 2".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Number of clusters for the histogram comparison.
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            k: 13,
            seed: 0,
            max_iters: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub hausdorff_min: f64,
    pub hausdorff_max: f64,
    pub hausdorff_avg: f64,
    pub pearson_r: f64,
    #[serde(rename = "k")]
    pub k_used: usize,
    pub cluster_counts_real: Vec<usize>,
    pub cluster_counts_generated: Vec<usize>,
}

impl MetricsReport {
    pub fn table_header() -> String {
        format!(
            "{:<24} {:>10} {:>10} {:>10} {:>12}",
            "Method", "Min", "Max", "Avg", "Pearson (r)"
        )
    }

    pub fn table_row(&self, label: &str) -> String {
        format!(
            "{:<24} {:>10.3} {:>10.3} {:>10.3} {:>12.4}",
            label, self.hausdorff_min, self.hausdorff_max, self.hausdorff_avg, self.pearson_r
        )
    }
}

/// Compares the first `real.len()` generated trajectories with the real set.
///
/// Clusters are fitted on the pooled real points only and then applied to
/// the generated points.
pub fn evaluate(real: &TrajectorySet, generated: &TrajectorySet, cfg: &EvalConfig) -> Result<MetricsReport> {
    if real.is_empty() {
        return Err(Error::InvalidArgument("real set is empty".into()));
    }
    if generated.len() < real.len() {
        return Err(Error::InvalidArgument(format!(
            "{} generated trajectories for {} real ones",
            generated.len(),
            real.len()
        )));
    }
    if generated.horizon() != real.horizon() {
        return Err(Error::Shape(format!(
            "horizon mismatch: real {} vs generated {}",
            real.horizon(),
            generated.horizon()
        )));
    }
    let generated = generated.truncated(real.len());
    let summary = nearest_real_summary(&generated, real)?;

    let real_points = real.pooled_points();
    let model = kmeans_fit(&real_points, cfg.k, cfg.seed, cfg.max_iters)?;
    let counts_real = cluster_histogram(&model, &real_points);
    let counts_gen = cluster_histogram(&model, &generated.pooled_points());
    let as_f64 = |v: &[usize]| v.iter().map(|&c| c as f64).collect::<Vec<_>>();
    let r = pearson(&as_f64(&counts_real), &as_f64(&counts_gen))?;

    Ok(MetricsReport {
        hausdorff_min: summary.min,
        hausdorff_max: summary.max,
        hausdorff_avg: summary.avg,
        pearson_r: r,
        k_used: model.k,
        cluster_counts_real: counts_real,
        cluster_counts_generated: counts_gen,
    })
}
