use ndarray::{Array1, Array2};
use rand::seq::index::sample;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, log_det_from_cholesky};
use crate::rng::{seeded, Rng};
use crate::trajectory::{Trajectory, TrajectorySet};

const NOISE_FLOOR: f64 = 1e-6;

/// Squared-exponential plus constant bias kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub signal_variance: f64,
    pub length_scale: f64,
    pub bias_variance: f64,
}

impl Kernel {
    pub fn eval(&self, a: f64, b: f64) -> f64 {
        let r = (a - b) / self.length_scale;
        self.signal_variance * (-0.5 * r * r).exp() + self.bias_variance
    }

    fn to_log(self) -> [f64; 3] {
        [
            self.signal_variance.ln(),
            self.length_scale.ln(),
            self.bias_variance.ln(),
        ]
    }

    fn from_log(v: [f64; 3]) -> Self {
        Kernel {
            signal_variance: v[0].exp(),
            length_scale: v[1].exp(),
            bias_variance: v[2].exp(),
        }
    }
}

/// GP over one output coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpDimension {
    pub kernel: Kernel,
    /// Per-day mean of the subsampled trajectories.
    pub targets: Vec<f64>,
    /// Lower Cholesky factor of `K + diag(g / n_used)`, row-major.
    pub cholesky: Vec<f64>,
    pub posterior_mean: Vec<f64>,
    pub log_marginal_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HgprModel {
    pub horizon: usize,
    /// Indices into the real set of the trajectories used for fitting.
    pub subsample: Vec<usize>,
    /// Per-day noise variance `g(day)`.
    pub noise: Vec<f64>,
    pub lon: GpDimension,
    pub lat: GpDimension,
}

impl HgprModel {
    pub fn n_used(&self) -> usize {
        self.subsample.len()
    }

    pub fn posterior_mean(&self) -> Result<Trajectory> {
        Trajectory::from_coords(&self.lon.posterior_mean, &self.lat.posterior_mean)
    }
}

struct Fit {
    chol: Array2<f64>,
    alpha: Array1<f64>,
    lml: f64,
}

/// Exact GP with one observation per day whose noise is `noise[d]`.
fn fit_kernel(kernel: &Kernel, y: &Array1<f64>, noise: &[f64]) -> Result<Fit> {
    let m = y.len();
    let mut k = Array2::zeros((m, m));
    for i in 0..m {
        for j in 0..=i {
            let v = kernel.eval(i as f64, j as f64);
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
        k[[i, i]] += noise[i];
    }
    let chol = cholesky(k.view())?;
    let alpha = cholesky_solve(chol.view(), y.view());
    let lml = -0.5 * y.dot(&alpha)
        - 0.5 * log_det_from_cholesky(chol.view())
        - 0.5 * m as f64 * (2.0 * std::f64::consts::PI).ln();
    if !lml.is_finite() {
        return Err(Error::NumericalOverflow("gp log marginal likelihood".into()));
    }
    Ok(Fit { chol, alpha, lml })
}

/// Gradient-free coordinate search in log-hyperparameter space.
fn optimize_kernel(y: &Array1<f64>, noise: &[f64]) -> Result<(Kernel, Fit)> {
    let m = y.len() as f64;
    let mean = y.mean().unwrap_or(0.0);
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
    let start = Kernel {
        signal_variance: var.max(1e-6),
        length_scale: (m / 10.0).max(1.0),
        bias_variance: (mean * mean).max(1e-6),
    };
    let mut best_log = start.to_log();
    let mut best = fit_kernel(&start, y, noise)?;
    // Keep the length-scale within the observed span.
    let ls_bounds = (0.5f64.ln(), m.max(2.0).ln());
    let mut step = 1.0;
    while step > 1e-3 {
        let mut improved = false;
        for dim in 0..3 {
            for dir in [1.0, -1.0] {
                let mut cand = best_log;
                cand[dim] += dir * step;
                if dim == 1 && !(ls_bounds.0..=ls_bounds.1).contains(&cand[1]) {
                    continue;
                }
                if let Ok(fit) = fit_kernel(&Kernel::from_log(cand), y, noise) {
                    if fit.lml > best.lml {
                        best = fit;
                        best_log = cand;
                        improved = true;
                        break;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok((Kernel::from_log(best_log), best))
}

fn fit_dimension(y: Array1<f64>, noise: &[f64]) -> Result<GpDimension> {
    let (kernel, fit) = optimize_kernel(&y, noise)?;
    let m = y.len();
    // Posterior mean at the training days: K alpha = y - diag(noise) alpha.
    let posterior_mean = (0..m).map(|i| y[i] - noise[i] * fit.alpha[i]).collect();
    Ok(GpDimension {
        kernel,
        targets: y.to_vec(),
        cholesky: fit.chol.iter().copied().collect(),
        posterior_mean,
        log_marginal_likelihood: fit.lml,
    })
}

/// Fits the regressor on a seeded random `subsample_fraction` of `real`.
///
/// Every subsampled trajectory contributes one observation per day with
/// noise variance `g(day)`. Repeated observations at a day are replaced by
/// their mean with variance `g(day) / n`, which leaves the posterior and the
/// hyperparameter objective unchanged.
pub fn fit_hgpr(real: &TrajectorySet, subsample_fraction: f64, seed: u64) -> Result<HgprModel> {
    if !(subsample_fraction > 0.0 && subsample_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "subsample fraction {subsample_fraction} outside (0, 1]"
        )));
    }
    if real.is_empty() {
        return Err(Error::InvalidArgument("hgpr fit on an empty set".into()));
    }
    let n = real.len();
    let n_used = ((subsample_fraction * n as f64).round() as usize).clamp(1, n);
    let mut subsample = sample(&mut seeded(seed), n, n_used).into_vec();
    subsample.sort_unstable();

    let m = real.horizon();
    let mut noise = vec![0.0; m];
    let mut lon_mean = Array1::zeros(m);
    let mut lat_mean = Array1::zeros(m);
    for d in 0..m {
        let pts: Vec<_> = subsample.iter().map(|&i| real.trajectories()[i].points[d]).collect();
        let k = pts.len() as f64;
        lon_mean[d] = pts.iter().map(|p| p.lon).sum::<f64>() / k;
        lat_mean[d] = pts.iter().map(|p| p.lat).sum::<f64>() / k;
        let norms: Vec<f64> = pts.iter().map(|p| p.lon.hypot(p.lat)).collect();
        let nm = norms.iter().sum::<f64>() / k;
        let var = norms.iter().map(|v| (v - nm).powi(2)).sum::<f64>() / k;
        noise[d] = var.max(NOISE_FLOOR);
    }
    let mean_noise: Vec<f64> = noise.iter().map(|g| g / n_used as f64).collect();

    let not_pd = |e: Error| match e {
        Error::NotPositiveDefinite(msg) => Error::NotPositiveDefinite(format!("hgpr kernel: {msg}")),
        other => other,
    };
    let lon = fit_dimension(lon_mean, &mean_noise).map_err(not_pd)?;
    let lat = fit_dimension(lat_mean, &mean_noise).map_err(not_pd)?;
    Ok(HgprModel {
        horizon: m,
        subsample,
        noise,
        lon,
        lat,
    })
}

/// Posterior mean plus independent `Normal(0, g(day))` noise per coordinate.
pub fn sample_hgpr(model: &HgprModel, count: usize, rng: &mut Rng) -> Result<TrajectorySet> {
    if count < 1 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let sd: Vec<f64> = model.noise.iter().map(|g| g.sqrt()).collect();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut lons = Vec::with_capacity(model.horizon);
        let mut lats = Vec::with_capacity(model.horizon);
        for d in 0..model.horizon {
            let e1: f64 = StandardNormal.sample(rng);
            let e2: f64 = StandardNormal.sample(rng);
            lons.push(model.lon.posterior_mean[d] + sd[d] * e1);
            lats.push(model.lat.posterior_mean[d] + sd[d] * e2);
        }
        out.push(Trajectory::from_coords(&lons, &lats)?);
    }
    TrajectorySet::new(out)
}
