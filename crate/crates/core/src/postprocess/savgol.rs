use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve};
use crate::trajectory::{Trajectory, TrajectorySet};

/// Window of `2n + 1` samples and the order of the local polynomial fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SavgolSpec {
    pub window: usize,
    pub polyorder: usize,
}

impl Default for SavgolSpec {
    fn default() -> Self {
        SavgolSpec {
            window: 21,
            polyorder: 3,
        }
    }
}

impl SavgolSpec {
    pub fn new(window: usize, polyorder: usize) -> Result<Self> {
        let spec = SavgolSpec { window, polyorder };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "savgol window {} must be odd",
                self.window
            )));
        }
        if self.window < self.polyorder + 2 {
            return Err(Error::InvalidArgument(format!(
                "savgol window {} must be at least polyorder + 2 = {}",
                self.window,
                self.polyorder + 2
            )));
        }
        Ok(())
    }

    pub fn half_width(&self) -> usize {
        self.window / 2
    }
}

/// Smoothing weights `c_{-n} ..= c_n`: the value at offset 0 of the
/// least-squares polynomial fit, as a linear function of the window samples.
pub fn savgol_coefficients(spec: &SavgolSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let n = spec.half_width() as f64;
    let cols = spec.polyorder + 1;
    // Offsets scaled into [-1, 1] for conditioning; the value at 0 is unchanged.
    let design = Array2::from_shape_fn((spec.window, cols), |(i, j)| {
        let t = if n > 0.0 { (i as f64 - n) / n } else { 0.0 };
        t.powi(j as i32)
    });
    let gram = design.t().dot(&design);
    let l = cholesky(gram.view())?;
    let mut e0 = Array1::<f64>::zeros(cols);
    e0[0] = 1.0;
    let y = cholesky_solve(l.view(), e0.view());
    Ok(design.dot(&y).to_vec())
}

/// Convolves a series with the smoothing weights, mirroring `n` samples at
/// each end (`x[-k] = x[k]`).
pub fn smooth_series(values: &[f64], coeffs: &[f64]) -> Result<Vec<f64>> {
    let window = coeffs.len();
    if values.len() < window {
        return Err(Error::InvalidArgument(format!(
            "series of length {} is shorter than the window {window}",
            values.len()
        )));
    }
    let n = window / 2;
    let len = values.len() as isize;
    let at = |i: isize| -> f64 {
        let j = if i < 0 {
            -i
        } else if i >= len {
            2 * (len - 1) - i
        } else {
            i
        };
        values[j as usize]
    };
    Ok((0..len)
        .map(|i| {
            coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c * at(i + k as isize - n as isize))
                .sum()
        })
        .collect())
}

pub fn smooth_trajectory(traj: &Trajectory, spec: &SavgolSpec) -> Result<Trajectory> {
    let coeffs = savgol_coefficients(spec)?;
    smooth_with(traj, &coeffs)
}

fn smooth_with(traj: &Trajectory, coeffs: &[f64]) -> Result<Trajectory> {
    let lons = smooth_series(&traj.lons(), coeffs)?;
    let lats = smooth_series(&traj.lats(), coeffs)?;
    Trajectory::from_coords(&lons, &lats)
}

pub fn smooth_set(set: &TrajectorySet, spec: &SavgolSpec) -> Result<TrajectorySet> {
    let coeffs = savgol_coefficients(spec)?;
    let smoothed = set
        .iter()
        .map(|t| smooth_with(t, &coeffs))
        .collect::<Result<Vec<_>>>()?;
    TrajectorySet::with_horizon(smoothed, set.horizon())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_invalid_specs() {
        assert!(SavgolSpec::new(4, 1).is_err());
        assert!(SavgolSpec::new(3, 2).is_err());
        assert!(SavgolSpec::new(3, 1).is_ok());
        assert!(SavgolSpec::new(1, 0).is_err());
    }

    #[test]
    fn weights_sum_to_one() {
        for window in (3..=31).step_by(2) {
            for order in 0..=(window - 2).min(8) {
                let c = savgol_coefficients(&SavgolSpec::new(window, order).unwrap()).unwrap();
                let s: f64 = c.iter().sum();
                assert!((s - 1.0).abs() < 1e-12, "w{window} p{order}: {s}");
            }
        }
    }

    #[test]
    fn constant_series_unchanged() {
        let t = Trajectory::from_coords(&[4.0; 30], &[-2.0; 30]).unwrap();
        let s = smooth_trajectory(&t, &SavgolSpec::default()).unwrap();
        for (a, b) in s.points.iter().zip(&t.points) {
            assert!((a.lon - b.lon).abs() < 1e-12 && (a.lat - b.lat).abs() < 1e-12);
        }
    }

    #[test]
    fn short_trajectory_rejected() {
        let t = Trajectory::from_coords(&[0.0; 10], &[0.0; 10]).unwrap();
        assert!(smooth_trajectory(&t, &SavgolSpec::default()).is_err());
        let t = Trajectory::from_coords(&[0.0; 21], &[0.0; 21]).unwrap();
        assert_eq!(smooth_trajectory(&t, &SavgolSpec::default()).unwrap().len(), 21);
    }
}
