//! Multilayer-perceptron variational autoencoder with hand-written
//! backpropagation.
//!
//! The encoder trunk feeds two parallel linear heads (mean and
//! log-variance); the decoder maps a latent sample back to the flattened
//! trajectory.

mod backward;
mod train;

pub use backward::{backward, backward_with_noise, Gradients};
pub use train::{train, LossHistory, LossRecord, Optimizer, TrainConfig};

use ndarray::{Array1, Array2, ArrayView2};
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::NormalizedMatrix;
use crate::rng::{self, Rng};

pub const LEAKY_POS_SLOPE: f64 = 0.06;
pub const LEAKY_NEG_SLOPE: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Leaky { pos_slope: f64, neg_slope: f64 },
    Linear,
}

impl Activation {
    pub const fn standard_leaky() -> Self {
        Activation::Leaky {
            pos_slope: LEAKY_POS_SLOPE,
            neg_slope: LEAKY_NEG_SLOPE,
        }
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Leaky {
                pos_slope,
                neg_slope,
            } => {
                if x >= 0.0 {
                    pos_slope * x
                } else {
                    neg_slope * x
                }
            }
            Activation::Linear => x,
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Leaky {
                pos_slope,
                neg_slope,
            } => {
                if x >= 0.0 {
                    pos_slope
                } else {
                    neg_slope
                }
            }
            Activation::Linear => 1.0,
        }
    }

    fn is_valid(self) -> bool {
        match self {
            Activation::Leaky {
                pos_slope,
                neg_slope,
            } => pos_slope.is_finite() && neg_slope.is_finite(),
            Activation::Linear => true,
        }
    }
}

/// `activation(x, tag)` as a free function.
pub fn activation(x: f64, tag: Activation) -> f64 {
    tag.apply(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub units: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub const fn new(units: usize, activation: Activation) -> Self {
        LayerSpec { units, activation }
    }
}

/// Layer sizes and activations.
///
/// The decoder's last hidden layer feeds a linear output layer of
/// `input_dim` units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub input_dim: usize,
    pub encoder_hidden: Vec<LayerSpec>,
    pub latent_dim: usize,
    pub decoder_hidden: Vec<LayerSpec>,
}

impl Architecture {
    /// 370 → 300 → 100 → 3 → 100 → 100 → 300 → 370.
    pub fn standard() -> Self {
        Self::for_input(370)
    }

    /// The standard layer stack for an arbitrary flattened input width.
    pub fn for_input(input_dim: usize) -> Self {
        let leaky = Activation::standard_leaky();
        Architecture {
            input_dim,
            encoder_hidden: vec![
                LayerSpec::new(300, leaky),
                LayerSpec::new(100, Activation::Linear),
            ],
            latent_dim: 3,
            decoder_hidden: vec![
                LayerSpec::new(100, leaky),
                LayerSpec::new(100, leaky),
                LayerSpec::new(300, Activation::Linear),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.latent_dim == 0 {
            return Err(Error::Config("input_dim and latent_dim must be positive".into()));
        }
        let layers = self.encoder_hidden.iter().chain(&self.decoder_hidden);
        for l in layers {
            if l.units == 0 {
                return Err(Error::Config("hidden layers need at least one unit".into()));
            }
            if !l.activation.is_valid() {
                return Err(Error::Config("activation slopes must be finite".into()));
            }
        }
        Ok(())
    }

    fn trunk_width(&self) -> usize {
        self.encoder_hidden.last().map_or(self.input_dim, |l| l.units)
    }
}

/// Fully-connected layer `y = act(W x + b)` with `W` stored as out × in.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Dense {
            weights: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    /// Returns `(pre_activation, activation)` for a batch of row vectors.
    fn forward(&self, input: ArrayView2<f64>) -> (Array2<f64>, Array2<f64>) {
        let pre = input.dot(&self.weights.t()) + &self.bias;
        let act = self.activation;
        let out = pre.mapv(|x| act.apply(x));
        (pre, out)
    }

    fn all_finite(&self) -> bool {
        self.weights.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VaeParams {
    pub architecture: Architecture,
    pub encoder: Vec<Dense>,
    pub mean_head: Dense,
    pub logvar_head: Dense,
    /// Decoder hidden layers followed by the linear output layer.
    pub decoder: Vec<Dense>,
}

impl VaeParams {
    /// All-zero parameters with the shapes implied by `arch`.
    pub fn zeros(arch: &Architecture) -> Result<Self> {
        arch.validate()?;
        let mut encoder = Vec::new();
        let mut width = arch.input_dim;
        for l in &arch.encoder_hidden {
            encoder.push(Dense::zeros(width, l.units, l.activation));
            width = l.units;
        }
        let trunk = arch.trunk_width();
        let mean_head = Dense::zeros(trunk, arch.latent_dim, Activation::Linear);
        let logvar_head = Dense::zeros(trunk, arch.latent_dim, Activation::Linear);
        let mut decoder = Vec::new();
        let mut width = arch.latent_dim;
        for l in &arch.decoder_hidden {
            decoder.push(Dense::zeros(width, l.units, l.activation));
            width = l.units;
        }
        decoder.push(Dense::zeros(width, arch.input_dim, Activation::Linear));
        Ok(VaeParams {
            architecture: arch.clone(),
            encoder,
            mean_head,
            logvar_head,
            decoder,
        })
    }

    pub fn layers(&self) -> impl Iterator<Item = &Dense> {
        self.encoder
            .iter()
            .chain([&self.mean_head, &self.logvar_head])
            .chain(&self.decoder)
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut Dense> {
        self.encoder
            .iter_mut()
            .chain([&mut self.mean_head, &mut self.logvar_head])
            .chain(self.decoder.iter_mut())
    }

    /// Every weight and bias buffer, in a fixed order.
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers_mut()
            .flat_map(|l| {
                [
                    l.weights.as_slice_mut().expect("standard layout"),
                    l.bias.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers()
            .flat_map(|l| {
                [
                    l.weights.as_slice().expect("standard layout"),
                    l.bias.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers().all(Dense::all_finite)
    }
}

/// Weights ~ N(0, 1/fan_in), biases zero.
pub fn init_params(arch: &Architecture, seed: u64) -> Result<VaeParams> {
    let mut params = VaeParams::zeros(arch)?;
    let mut rng = rng::seeded(seed);
    for layer in params.layers_mut() {
        let sd = 1.0 / (layer.inputs() as f64).sqrt();
        let normal = Normal::new(0.0, sd).expect("finite sd");
        layer.weights.mapv_inplace(|_| normal.sample(&mut rng));
    }
    Ok(params)
}

fn check_finite(values: &Array2<f64>, what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericalOverflow(format!("non-finite {what}")))
    }
}

fn check_width(x: ArrayView2<f64>, expected: usize, what: &str) -> Result<()> {
    if x.ncols() != expected {
        return Err(Error::Shape(format!(
            "{what} has width {}, expected {expected}",
            x.ncols()
        )));
    }
    Ok(())
}

/// Encoder forward pass on a batch; returns `(mu, logvar)` as n × latent.
pub fn encode_batch(params: &VaeParams, x: ArrayView2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
    check_width(x, params.architecture.input_dim, "encoder input")?;
    let mut h = x.to_owned();
    for layer in &params.encoder {
        h = layer.forward(h.view()).1;
    }
    let mu = params.mean_head.forward(h.view()).1;
    let logvar = params.logvar_head.forward(h.view()).1;
    check_finite(&mu, "latent mean")?;
    check_finite(&logvar, "latent log-variance")?;
    Ok((mu, logvar))
}

/// Decoder forward pass on a batch of latent rows.
pub fn decode_batch(params: &VaeParams, z: ArrayView2<f64>) -> Result<Array2<f64>> {
    check_width(z, params.architecture.latent_dim, "latent input")?;
    let mut h = z.to_owned();
    for layer in &params.decoder {
        h = layer.forward(h.view()).1;
    }
    check_finite(&h, "decoder output")?;
    Ok(h)
}

pub fn encode(params: &VaeParams, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let row = ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::Shape(e.to_string()))?;
    let (mu, logvar) = encode_batch(params, row)?;
    Ok((mu.into_raw_vec_and_offset().0, logvar.into_raw_vec_and_offset().0))
}

pub fn decode(params: &VaeParams, z: &[f64]) -> Result<Vec<f64>> {
    let row = ArrayView2::from_shape((1, z.len()), z).map_err(|e| Error::Shape(e.to_string()))?;
    Ok(decode_batch(params, row)?.into_raw_vec_and_offset().0)
}

/// `z = mu + exp(logvar / 2) * eps` with `eps ~ N(0, I)`.
pub fn reparameterize(mu: &[f64], logvar: &[f64], rng: &mut Rng) -> Result<Vec<f64>> {
    if mu.len() != logvar.len() {
        return Err(Error::Shape("mu and logvar lengths differ".into()));
    }
    Ok(mu
        .iter()
        .zip(logvar)
        .map(|(&m, &lv)| {
            let eps: f64 = StandardNormal.sample(rng);
            m + (0.5 * lv).exp() * eps
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Loss {
    pub total: f64,
    pub mse: f64,
    pub kl: f64,
}

/// Per-sample loss: mean squared reconstruction error plus `beta` times the
/// KL divergence of `N(mu, exp(logvar))` from the standard normal.
pub fn loss(x: &[f64], x_hat: &[f64], mu: &[f64], logvar: &[f64], beta: f64) -> Result<Loss> {
    if x.len() != x_hat.len() || x.is_empty() || mu.len() != logvar.len() {
        return Err(Error::Shape("loss inputs have inconsistent shapes".into()));
    }
    let mse = x
        .iter()
        .zip(x_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / x.len() as f64;
    let kl = kl_divergence(mu, logvar);
    Ok(Loss {
        total: mse + beta * kl,
        mse,
        kl,
    })
}

pub(crate) fn kl_divergence(mu: &[f64], logvar: &[f64]) -> f64 {
    -0.5 * mu
        .iter()
        .zip(logvar)
        .map(|(&m, &lv)| 1.0 + lv - m * m - lv.exp())
        .sum::<f64>()
}

/// Posterior means of every row: the deterministic latent codes.
pub fn latent_codes(params: &VaeParams, data: &NormalizedMatrix) -> Result<Array2<f64>> {
    Ok(encode_batch(params, data.values.view())?.0)
}

/// Mean loss over a batch, decoding from the posterior mean (no sampling).
pub fn evaluate(params: &VaeParams, data: ArrayView2<f64>, beta: f64) -> Result<Loss> {
    let (mu, logvar) = encode_batch(params, data)?;
    let recon = decode_batch(params, mu.view())?;
    let n = data.nrows() as f64;
    let mse = (&recon - &data).mapv(|v| v * v).mean().unwrap_or(0.0);
    let kl = -0.5 * (logvar.mapv(|lv| 1.0 + lv - lv.exp()) - mu.mapv(|m| m * m)).sum() / n;
    Ok(Loss {
        total: mse + beta * kl,
        mse,
        kl,
    })
}

#[derive(Serialize, Deserialize)]
struct DenseRecord {
    rows: usize,
    cols: usize,
    /// Row-major.
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

#[derive(Serialize, Deserialize)]
struct ParamsRecord {
    architecture: Architecture,
    encoder: Vec<DenseRecord>,
    mean_head: DenseRecord,
    logvar_head: DenseRecord,
    decoder: Vec<DenseRecord>,
}

impl From<&Dense> for DenseRecord {
    fn from(d: &Dense) -> Self {
        DenseRecord {
            rows: d.outputs(),
            cols: d.inputs(),
            weights: d.weights.iter().copied().collect(),
            bias: d.bias.to_vec(),
            activation: d.activation,
        }
    }
}

impl TryFrom<DenseRecord> for Dense {
    type Error = Error;

    fn try_from(r: DenseRecord) -> Result<Self> {
        if r.bias.len() != r.rows {
            return Err(Error::Shape("bias length does not match rows".into()));
        }
        Ok(Dense {
            weights: Array2::from_shape_vec((r.rows, r.cols), r.weights)
                .map_err(|e| Error::Shape(e.to_string()))?,
            bias: Array1::from(r.bias),
            activation: r.activation,
        })
    }
}

impl Serialize for VaeParams {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ParamsRecord {
            architecture: self.architecture.clone(),
            encoder: self.encoder.iter().map(Into::into).collect(),
            mean_head: (&self.mean_head).into(),
            logvar_head: (&self.logvar_head).into(),
            decoder: self.decoder.iter().map(Into::into).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for VaeParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = ParamsRecord::deserialize(d)?;
        let conv = |l: DenseRecord| Dense::try_from(l).map_err(D::Error::custom);
        let params = VaeParams {
            architecture: r.architecture,
            encoder: r.encoder.into_iter().map(conv).collect::<std::result::Result<_, _>>()?,
            mean_head: conv(r.mean_head)?,
            logvar_head: conv(r.logvar_head)?,
            decoder: r.decoder.into_iter().map(conv).collect::<std::result::Result<_, _>>()?,
        };
        let expected = VaeParams::zeros(&params.architecture).map_err(D::Error::custom)?;
        let shapes_match = expected.layers().count() == params.layers().count()
            && expected
                .layers()
                .zip(params.layers())
                .all(|(a, b)| a.weights.dim() == b.weights.dim());
        if !shapes_match {
            return Err(D::Error::custom("layer shapes do not match the architecture"));
        }
        Ok(params)
    }
}
