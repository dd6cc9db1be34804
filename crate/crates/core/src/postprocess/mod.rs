//! Post-processing of generated trajectories: Savitzky–Golay smoothing and
//! the convex-hull region filter.

mod hull;
mod savgol;

pub use hull::{convex_hull, mbr_filter, ConvexRegion};
pub use savgol::{savgol_coefficients, smooth_series, smooth_set, smooth_trajectory, SavgolSpec};
