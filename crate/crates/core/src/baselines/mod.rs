//! Comparison generators: a Levy walk with fitted step statistics and a
//! heteroscedastic Gaussian-process regressor over day index.

mod hgpr;
mod levy;

pub use hgpr::{fit_hgpr, sample_hgpr, GpDimension, HgprModel, Kernel};
pub use levy::{azimuth, fit_levy, generate_levy, LevyParams};

/// Linear-interpolation quantile of an ascending slice.
pub(crate) fn quantile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let t = pos - lo as f64;
    sorted[lo] + t * (sorted[hi] - sorted[lo])
}
