//! Long-horizon trajectory generation for wildlife movement.
//!
//! A small variational autoencoder learns a sparse corpus of fixed-horizon
//! daily trajectories, a Gaussian mixture fitted to the latent codes is
//! sampled to produce new trajectories, and the decoded output is smoothed
//! with a Savitzky–Golay filter and filtered against the convex hull of the
//! real corpus. Two baseline generators (Levy walk and a heteroscedastic
//! Gaussian process) and the evaluation metrics (nearest-real Hausdorff
//! distance, cluster-histogram Pearson correlation) live alongside.

pub mod baselines;
pub mod error;
pub mod gmm;
pub mod ingest;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod postprocess;
pub mod rng;
pub mod synthgen;
pub mod trajectory;
pub mod vae;

pub use error::{Error, Result};
pub use trajectory::{GeoPoint, Trajectory, TrajectorySet};
