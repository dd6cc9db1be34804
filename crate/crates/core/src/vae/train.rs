use serde::{Deserialize, Serialize};

use super::{backward, evaluate, VaeParams};
use crate::error::{Error, Result};
use crate::ingest::NormalizedMatrix;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Weight of the KL term; zero gives a plain autoencoder.
    pub kl_weight: f64,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 3000,
            learning_rate: 1e-3,
            kl_weight: 1e-3,
            seed: 0,
            optimizer: Optimizer::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        // Zero is allowed: it freezes the parameters.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be non-negative".into()));
        }
        if !(self.kl_weight >= 0.0 && self.kl_weight.is_finite()) {
            return Err(Error::Config("kl_weight must be non-negative".into()));
        }
        if let Optimizer::Adam {
            beta1,
            beta2,
            epsilon,
        } = self.optimizer
        {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(epsilon > 0.0) {
                return Err(Error::Config("invalid adam hyperparameters".into()));
            }
        }
        Ok(())
    }
}

/// Loss at the start of an epoch, decoding from the posterior mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub reconstruction_mse: f64,
    pub kl_term: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossHistory {
    pub records: Vec<LossRecord>,
}

impl LossHistory {
    pub fn first(&self) -> Option<&LossRecord> {
        self.records.first()
    }

    pub fn last(&self) -> Option<&LossRecord> {
        self.records.last()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,reconstruction_mse,kl_term,total\n");
        for r in &self.records {
            out += &format!("{},{},{},{}\n", r.epoch, r.reconstruction_mse, r.kl_term, r.total);
        }
        out
    }
}

struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: i32,
}

/// Full-batch training. Deterministic given `(params, data, cfg)`.
pub fn train(
    params: &VaeParams,
    data: &NormalizedMatrix,
    cfg: &TrainConfig,
) -> Result<(VaeParams, LossHistory)> {
    cfg.validate()?;
    if data.rows() == 0 {
        return Err(Error::InvalidArgument("training data has no rows".into()));
    }
    let mut params = params.clone();
    let mut rng = rng::seeded(cfg.seed);
    let mut history = LossHistory::default();
    let sizes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    let mut adam = AdamState {
        m: sizes.iter().map(|&s| vec![0.0; s]).collect(),
        v: sizes.iter().map(|&s| vec![0.0; s]).collect(),
        step: 0,
    };

    for epoch in 1..=cfg.epochs {
        let eval = evaluate(&params, data.values.view(), cfg.kl_weight)
            .map_err(|_| Error::Diverged { epoch })?;
        if !eval.total.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        history.records.push(LossRecord {
            epoch,
            reconstruction_mse: eval.mse,
            kl_term: eval.kl,
            total: eval.total,
        });

        let (grads, _) = backward(&params, data.values.view(), cfg.kl_weight, &mut rng)
            .map_err(|_| Error::Diverged { epoch })?;
        let lr = cfg.learning_rate;
        match cfg.optimizer {
            Optimizer::Sgd => {
                for (p, g) in params.tensors_mut().into_iter().zip(grads.tensors()) {
                    p.iter_mut().zip(g).for_each(|(p, g)| *p -= lr * g);
                }
            }
            Optimizer::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                adam.step += 1;
                let c1 = 1.0 - beta1.powi(adam.step);
                let c2 = 1.0 - beta2.powi(adam.step);
                for (((p, g), m), v) in params
                    .tensors_mut()
                    .into_iter()
                    .zip(grads.tensors())
                    .zip(adam.m.iter_mut())
                    .zip(adam.v.iter_mut())
                {
                    for i in 0..p.len() {
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                        p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + epsilon);
                    }
                }
            }
        }
        if !params.is_finite() {
            return Err(Error::Diverged { epoch });
        }
    }
    Ok((params, history))
}
