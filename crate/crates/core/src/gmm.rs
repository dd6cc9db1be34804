//! Full-covariance Gaussian mixture fitted by expectation-maximization, used
//! to model the distribution of latent codes and to sample new ones.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, log_det_from_cholesky, solve_lower, symmetric_eigen};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmConfig {
    pub k: usize,
    /// Lower bound on every covariance eigenvalue.
    pub reg: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            k: 15,
            reg: 1e-4,
            max_iters: 500,
            tol: 1e-7,
            seed: 0,
        }
    }
}

impl GmmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Config("gmm k must be at least 1".into()));
        }
        if !(self.reg > 0.0 && self.reg.is_finite()) {
            return Err(Error::Config("gmm reg must be positive".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::Config("gmm tol must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub k: usize,
    pub dim: usize,
    pub weights: Vec<f64>,
    /// k rows of length `dim`.
    pub means: Vec<Vec<f64>>,
    /// k row-major `dim × dim` matrices.
    pub covariances: Vec<Vec<f64>>,
    pub fit_log_likelihood: f64,
    pub iterations: usize,
}

impl GmmModel {
    pub fn covariance(&self, j: usize) -> Array2<f64> {
        Array2::from_shape_vec((self.dim, self.dim), self.covariances[j].clone())
            .expect("covariance shape")
    }

    pub fn mean(&self, j: usize) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.means[j])
    }
}

/// Per-component Cholesky factors and log normalizers.
struct Components {
    log_weights: Vec<f64>,
    means: Vec<Array1<f64>>,
    chol: Vec<Array2<f64>>,
    log_norm: Vec<f64>,
}

impl Components {
    fn new(model: &GmmModel) -> Result<Self> {
        let d = model.dim as f64;
        let mut chol = Vec::with_capacity(model.k);
        let mut log_norm = Vec::with_capacity(model.k);
        for j in 0..model.k {
            let l = cholesky(model.covariance(j).view())?;
            log_norm.push(-0.5 * (d * (2.0 * PI).ln() + log_det_from_cholesky(l.view())));
            chol.push(l);
        }
        Ok(Components {
            log_weights: model.weights.iter().map(|w| w.ln()).collect(),
            means: (0..model.k).map(|j| model.mean(j).to_owned()).collect(),
            chol,
            log_norm,
        })
    }

    /// `log w_j + log N(x; mean_j, cov_j)` for every component.
    fn joint_log_densities(&self, x: ArrayView1<f64>, out: &mut [f64]) {
        for (j, slot) in out.iter_mut().enumerate() {
            if self.log_weights[j] == f64::NEG_INFINITY {
                *slot = f64::NEG_INFINITY;
                continue;
            }
            let diff = &x - &self.means[j];
            let y = solve_lower(self.chol[j].view(), diff.view());
            *slot = self.log_weights[j] + self.log_norm[j] - 0.5 * y.dot(&y);
        }
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn check_dims(model: &GmmModel, codes: ArrayView2<f64>) -> Result<()> {
    if codes.ncols() != model.dim {
        return Err(Error::Shape(format!(
            "codes have {} columns, model has dimension {}",
            codes.ncols(),
            model.dim
        )));
    }
    Ok(())
}

/// `Σ_i log Σ_j w_j N(x_i; mean_j, cov_j)`.
pub fn gmm_log_likelihood(model: &GmmModel, codes: ArrayView2<f64>) -> Result<f64> {
    check_dims(model, codes)?;
    let comps = Components::new(model)?;
    let mut buf = vec![0.0; model.k];
    Ok(codes
        .rows()
        .into_iter()
        .map(|x| {
            comps.joint_log_densities(x, &mut buf);
            log_sum_exp(&buf)
        })
        .sum())
}

/// Seeded k-means++ seeding followed by a few Lloyd passes.
fn kmeans_init(codes: ArrayView2<f64>, k: usize, rng: &mut Rng) -> Vec<Array1<f64>> {
    let n = codes.nrows();
    let sq = |a: ArrayView1<f64>, b: &Array1<f64>| (&a - b).mapv(|v| v * v).sum();
    let mut centers = vec![codes.row(rng.random_range(0..n)).to_owned()];
    while centers.len() < k {
        let d2: Vec<f64> = codes
            .rows()
            .into_iter()
            .map(|x| centers.iter().map(|c| sq(x, c)).fold(f64::INFINITY, f64::min))
            .collect();
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
        centers.push(codes.row(pick).to_owned());
    }
    for _ in 0..20 {
        let mut sums = vec![Array1::<f64>::zeros(codes.ncols()); k];
        let mut counts = vec![0usize; k];
        for x in codes.rows() {
            let j = (0..k)
                .min_by(|&a, &b| sq(x, &centers[a]).total_cmp(&sq(x, &centers[b])))
                .unwrap_or(0);
            sums[j] += &x;
            counts[j] += 1;
        }
        for j in 0..k {
            if counts[j] > 0 {
                centers[j] = &sums[j] / counts[j] as f64;
            }
        }
    }
    centers
}

/// Fits a mixture and returns it with the log-likelihood at every E-step.
pub fn fit_gmm_traced(codes: ArrayView2<f64>, cfg: &GmmConfig) -> Result<(GmmModel, Vec<f64>)> {
    cfg.validate()?;
    let (n, d) = codes.dim();
    let k = cfg.k;
    if n < k {
        return Err(Error::InvalidArgument(format!(
            "{n} codes cannot support {k} mixture components"
        )));
    }
    if codes.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite latent code".into()));
    }
    let mut rng = rng::seeded(cfg.seed);

    let global_mean = codes.mean_axis(ndarray::Axis(0)).expect("n >= 1");
    let centered = &codes - &global_mean;
    let global_cov = floor_eigenvalues((centered.t().dot(&centered) / n as f64).view(), cfg.reg);
    let mut model = GmmModel {
        k,
        dim: d,
        weights: vec![1.0 / k as f64; k],
        means: kmeans_init(codes, k, &mut rng).into_iter().map(|c| c.to_vec()).collect(),
        covariances: vec![global_cov.iter().copied().collect(); k],
        fit_log_likelihood: f64::NEG_INFINITY,
        iterations: 0,
    };

    let mut trace = Vec::new();
    let mut resp = Array2::<f64>::zeros((n, k));
    let mut buf = vec![0.0; k];
    for iter in 0..=cfg.max_iters {
        // E-step.
        let comps = Components::new(&model)?;
        let mut ll = 0.0;
        for (i, x) in codes.rows().into_iter().enumerate() {
            comps.joint_log_densities(x, &mut buf);
            let lse = log_sum_exp(&buf);
            if !lse.is_finite() {
                return Err(Error::NumericalOverflow("non-finite responsibility".into()));
            }
            ll += lse;
            for j in 0..k {
                resp[[i, j]] = (buf[j] - lse).exp();
            }
        }
        trace.push(ll);
        model.fit_log_likelihood = ll;
        model.iterations = iter;
        let converged = trace.len() >= 2 && (ll - trace[trace.len() - 2]).abs() < cfg.tol;
        if converged || iter == cfg.max_iters {
            break;
        }

        // M-step.
        for j in 0..k {
            let r = resp.column(j);
            let nk: f64 = r.sum();
            model.weights[j] = nk / n as f64;
            if nk <= 0.0 {
                continue;
            }
            let mean = r.dot(&codes) / nk;
            let mut cov = Array2::<f64>::zeros((d, d));
            for (x, &w) in codes.rows().into_iter().zip(r.iter()) {
                let diff = &x - &mean;
                for a in 0..d {
                    for b in a..d {
                        cov[[a, b]] += w * diff[a] * diff[b];
                    }
                }
            }
            for a in 0..d {
                for b in 0..a {
                    cov[[a, b]] = cov[[b, a]];
                }
            }
            cov /= nk;
            let cov = floor_eigenvalues(cov.view(), cfg.reg);
            model.means[j] = mean.to_vec();
            model.covariances[j] = cov.iter().copied().collect();
        }
    }
    Ok((model, trace))
}

/// Replaces every eigenvalue below `floor` with `floor`.
///
/// This is the maximizer of the Gaussian likelihood over covariances whose
/// spectrum is bounded below by `floor`, so the M-step stays a true
/// maximization and the log-likelihood cannot decrease.
pub fn floor_eigenvalues(cov: ArrayView2<f64>, floor: f64) -> Array2<f64> {
    let (values, vectors) = symmetric_eigen(cov);
    let clipped = values.mapv(|v| v.max(floor));
    let mut out = vectors.dot(&Array2::from_diag(&clipped)).dot(&vectors.t());
    let d = out.nrows();
    for a in 0..d {
        for b in 0..a {
            let avg = 0.5 * (out[[a, b]] + out[[b, a]]);
            out[[a, b]] = avg;
            out[[b, a]] = avg;
        }
    }
    out
}

pub fn fit_gmm(codes: ArrayView2<f64>, cfg: &GmmConfig) -> Result<GmmModel> {
    fit_gmm_traced(codes, cfg).map(|(m, _)| m)
}

/// Draws `count` rows: a component by weight, then a Cholesky-factored
/// multivariate normal sample.
pub fn sample_gmm(model: &GmmModel, count: usize, rng: &mut Rng) -> Result<Array2<f64>> {
    if count < 1 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let chol = (0..model.k)
        .map(|j| cholesky(model.covariance(j).view()))
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = model.weights.iter().sum();
    let mut out = Array2::<f64>::zeros((count, model.dim));
    for mut row in out.rows_mut() {
        let mut u = rng.random::<f64>() * total;
        let mut j = model.k - 1;
        for (c, &w) in model.weights.iter().enumerate() {
            if w > 0.0 && u < w {
                j = c;
                break;
            }
            u -= w;
        }
        // Guard against rounding leaving a zero-weight tail selected.
        while model.weights[j] == 0.0 && j > 0 {
            j -= 1;
        }
        let eps = Array1::from_shape_simple_fn(model.dim, || StandardNormal.sample(rng));
        row.assign(&(chol[j].dot(&eps) + model.mean(j)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::symmetric_eigen;
    use ndarray::array;

    #[test]
    fn single_component_is_closed_form() {
        let codes = array![[0.0, 1.0], [2.0, 3.0], [4.0, -1.0], [1.0, 1.0]];
        let cfg = GmmConfig {
            k: 1,
            ..Default::default()
        };
        let m = fit_gmm(codes.view(), &cfg).unwrap();
        let mean = codes.mean_axis(ndarray::Axis(0)).unwrap();
        let c = &codes - &mean;
        let cov = c.t().dot(&c) / 4.0;
        // Well-conditioned sample: the floor is inactive.
        assert!(symmetric_eigen(cov.view()).0[0] > cfg.reg);
        for (a, b) in m.means[0].iter().zip(mean.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in m.covariance(0).iter().zip(cov.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((m.weights[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn log_likelihood_of_standard_normal_at_mean() {
        let m = GmmModel {
            k: 1,
            dim: 1,
            weights: vec![1.0],
            means: vec![vec![0.0]],
            covariances: vec![vec![1.0]],
            fit_log_likelihood: 0.0,
            iterations: 0,
        };
        let ll = gmm_log_likelihood(&m, array![[0.0]].view()).unwrap();
        assert!((ll - (1.0 / (2.0 * PI).sqrt()).ln()).abs() < 1e-12);
        assert!((ll + 0.9189385332046727).abs() < 1e-12);
        let twice = gmm_log_likelihood(&m, array![[0.0], [0.0]].view()).unwrap();
        assert!((twice - 2.0 * ll).abs() < 1e-12);
        assert!(gmm_log_likelihood(&m, array![[0.0, 1.0]].view()).is_err());
    }

    #[test]
    fn too_few_codes() {
        let codes = array![[0.0], [1.0]];
        let cfg = GmmConfig {
            k: 3,
            ..Default::default()
        };
        assert!(fit_gmm(codes.view(), &cfg).is_err());
    }

    #[test]
    fn zero_weight_component_is_never_sampled() {
        let m = GmmModel {
            k: 2,
            dim: 1,
            weights: vec![1.0, 0.0],
            means: vec![vec![-5.0], vec![5.0]],
            covariances: vec![vec![0.01], vec![0.01]],
            fit_log_likelihood: 0.0,
            iterations: 0,
        };
        let s = sample_gmm(&m, 1000, &mut rng::seeded(1)).unwrap();
        assert!(s.iter().all(|&v| v < 0.0));
        assert!(sample_gmm(&m, 0, &mut rng::seeded(1)).is_err());
    }

    #[test]
    fn fifteen_components_on_sixty_codes() {
        let mut r = rng::seeded(5);
        let codes = Array2::from_shape_simple_fn((60, 3), || StandardNormal.sample(&mut r));
        let cfg = GmmConfig::default();
        let m = fit_gmm(codes.view(), &cfg).unwrap();
        assert_eq!(m.k, 15);
        assert!((m.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for j in 0..m.k {
            let cov = m.covariance(j);
            for a in 0..3 {
                for b in 0..3 {
                    assert_eq!(cov[[a, b]], cov[[b, a]]);
                }
            }
            let (w, _) = symmetric_eigen(cov.view());
            assert!(w[0] >= cfg.reg * (1.0 - 1e-9), "{w}");
        }
    }

    #[test]
    fn floor_only_lifts_small_eigenvalues() {
        let degenerate = array![[1.0, 1.0], [1.0, 1.0]];
        let f = floor_eigenvalues(degenerate.view(), 0.5);
        let (w, _) = symmetric_eigen(f.view());
        assert!((w[0] - 0.5).abs() < 1e-12);
        assert!((w[1] - 2.0).abs() < 1e-12);
    }
}
