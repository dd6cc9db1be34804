use ndarray::{Array2, ArrayView2, Axis};
use rand_distr::{Distribution, StandardNormal};

use super::{check_width, Dense, Loss, VaeParams};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Gradients share the parameter layout.
pub type Gradients = VaeParams;

struct LayerCache {
    input: Array2<f64>,
    pre: Array2<f64>,
}

fn forward_cached(layers: &[Dense], input: Array2<f64>) -> (Vec<LayerCache>, Array2<f64>) {
    let mut caches = Vec::with_capacity(layers.len());
    let mut h = input;
    for layer in layers {
        let (pre, out) = layer.forward(h.view());
        caches.push(LayerCache { input: h, pre });
        h = out;
    }
    (caches, h)
}

/// Back-propagates `upstream` (gradient w.r.t. the stack output) through a
/// stack of layers, writing parameter gradients into `grads`. Returns the
/// gradient w.r.t. the stack input.
fn backprop_stack(
    layers: &[Dense],
    caches: &[LayerCache],
    grads: &mut [Dense],
    upstream: Array2<f64>,
) -> Array2<f64> {
    let mut d_out = upstream;
    for ((layer, cache), grad) in layers.iter().zip(caches).zip(grads.iter_mut()).rev() {
        let act = layer.activation;
        let mut d_pre = d_out;
        d_pre.zip_mut_with(&cache.pre, |d, &p| *d *= act.derivative(p));
        grad.weights.assign(&d_pre.t().dot(&cache.input));
        grad.bias = d_pre.sum_axis(Axis(0));
        d_out = d_pre.dot(&layer.weights);
    }
    d_out
}

/// Analytic gradients of the batch-mean loss for fixed reparameterization
/// noise `noise` (n × latent).
pub fn backward_with_noise(
    params: &VaeParams,
    batch: ArrayView2<f64>,
    beta: f64,
    noise: ArrayView2<f64>,
) -> Result<(Gradients, Loss)> {
    let arch = &params.architecture;
    check_width(batch, arch.input_dim, "batch")?;
    let n = batch.nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if noise.dim() != (n, arch.latent_dim) {
        return Err(Error::Shape("noise must be n x latent_dim".into()));
    }
    let nf = n as f64;
    let d = arch.input_dim as f64;

    let (enc_caches, trunk) = forward_cached(&params.encoder, batch.to_owned());
    let mu = params.mean_head.forward(trunk.view()).1;
    let logvar = params.logvar_head.forward(trunk.view()).1;
    let std = logvar.mapv(|lv| (0.5 * lv).exp());
    let z = &mu + &(&std * &noise);
    let (dec_caches, x_hat) = forward_cached(&params.decoder, z);

    let diff = &x_hat - &batch;
    let mse = diff.mapv(|v| v * v).sum() / (nf * d);
    let kl = -0.5 * (logvar.mapv(|lv| 1.0 + lv - lv.exp()) - mu.mapv(|m| m * m)).sum() / nf;
    let loss = Loss {
        total: mse + beta * kl,
        mse,
        kl,
    };
    if !loss.total.is_finite() {
        return Err(Error::NumericalOverflow("non-finite loss".into()));
    }

    let mut grads = VaeParams::zeros(arch)?;
    let d_xhat = diff * (2.0 / (nf * d));
    let dz = backprop_stack(&params.decoder, &dec_caches, &mut grads.decoder, d_xhat);

    let d_mu = &dz + &(&mu * (beta / nf));
    let d_logvar = &dz * &noise * &std * 0.5 + logvar.mapv(|lv| 0.5 * beta * (lv.exp() - 1.0) / nf);

    grads.mean_head.weights.assign(&d_mu.t().dot(&trunk));
    grads.mean_head.bias = d_mu.sum_axis(Axis(0));
    grads.logvar_head.weights.assign(&d_logvar.t().dot(&trunk));
    grads.logvar_head.bias = d_logvar.sum_axis(Axis(0));
    let d_trunk = d_mu.dot(&params.mean_head.weights) + d_logvar.dot(&params.logvar_head.weights);
    backprop_stack(&params.encoder, &enc_caches, &mut grads.encoder, d_trunk);

    if !grads.is_finite() {
        return Err(Error::NumericalOverflow("non-finite gradient".into()));
    }
    Ok((grads, loss))
}

/// Draws reparameterization noise from `rng` and computes gradients of the
/// batch-mean loss.
pub fn backward(
    params: &VaeParams,
    batch: ArrayView2<f64>,
    beta: f64,
    rng: &mut Rng,
) -> Result<(Gradients, Loss)> {
    let noise = Array2::from_shape_simple_fn((batch.nrows(), params.architecture.latent_dim), || {
        StandardNormal.sample(rng)
    });
    backward_with_noise(params, batch, beta, noise.view())
}
