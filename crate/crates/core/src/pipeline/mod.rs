//! End-to-end orchestration: configuration, training into a checkpoint,
//! generation under the four post-processing modes, and baselines.

mod checkpoint;
mod generate;

pub use checkpoint::{Checkpoint, StageSeeds, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use generate::{
    generate, run_baseline, BaselineFit, BaselineKind, GenerationOutput, Manifest, Mode, PostprocessToggles,
    REFERENCE_DISCARD_RATE,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::{fit_gmm, GmmConfig};
use crate::ingest::{normalize_with_factor, WindowConfig, DEFAULT_SCALE_FACTOR};
use crate::metrics::{choose_k, evaluate, EvalConfig, MetricsReport};
use crate::postprocess::{convex_hull, SavgolSpec};
use crate::synthgen::{generate_corpus, SynthConfig};
use crate::trajectory::TrajectorySet;
use crate::vae::{init_params, latent_codes, train, Architecture, LossHistory, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    /// Fixed cluster count, used unless `k_range` is set.
    pub k: usize,
    /// Inclusive range searched by silhouette score.
    pub k_range: Option<[usize; 2]>,
    pub max_iters: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        let d = EvalConfig::default();
        EvalSettings {
            k: d.k,
            k_range: None,
            max_iters: d.max_iters,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    /// Trajectories to keep after filtering.
    pub count: usize,
    /// Give up after `max_attempts_factor * count` candidates.
    pub max_attempts_factor: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            count: 60,
            max_attempts_factor: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub hgpr_subsample_fraction: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            hgpr_subsample_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub synth: SynthConfig,
    pub window: WindowConfig,
    pub scale_factor: f64,
    /// Defaults to the standard stack sized for the corpus horizon.
    pub architecture: Option<Architecture>,
    pub train: TrainConfig,
    pub gmm: GmmConfig,
    pub savgol: SavgolSpec,
    pub postprocess: PostprocessToggles,
    pub generation: GenerationConfig,
    pub baselines: BaselineConfig,
    pub eval: EvalSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            synth: SynthConfig::default(),
            window: WindowConfig::default(),
            scale_factor: DEFAULT_SCALE_FACTOR,
            architecture: None,
            train: TrainConfig::default(),
            gmm: GmmConfig::default(),
            savgol: SavgolSpec::default(),
            postprocess: PostprocessToggles::default(),
            generation: GenerationConfig::default(),
            baselines: BaselineConfig::default(),
            eval: EvalSettings::default(),
        }
    }
}

impl PipelineConfig {
    /// Checks every section before any work starts.
    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.train.validate()?;
        self.gmm.validate()?;
        self.savgol.validate().map_err(|e| Error::Config(e.to_string()))?;
        if let Some(arch) = &self.architecture {
            arch.validate()?;
        }
        if self.window.window_len_days < 2 {
            return Err(Error::Config("window_len_days must be at least 2".into()));
        }
        if !(self.scale_factor > 0.0 && self.scale_factor.is_finite()) {
            return Err(Error::Config("scale_factor must be positive".into()));
        }
        if self.generation.count < 1 || self.generation.max_attempts_factor < 1 {
            return Err(Error::Config("generation count and attempt factor must be positive".into()));
        }
        let f = self.baselines.hgpr_subsample_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::Config("hgpr_subsample_fraction must lie in (0, 1]".into()));
        }
        if self.eval.k < 1 {
            return Err(Error::Config("eval k must be positive".into()));
        }
        if let Some([lo, hi]) = self.eval.k_range {
            if lo < 2 || hi < lo {
                return Err(Error::Config("eval k_range needs 2 <= lo <= hi".into()));
            }
        }
        Ok(())
    }

    pub fn seeds(&self) -> StageSeeds {
        StageSeeds::from_master(self.seed)
    }

    /// Synthetic corpus; its seed is derived from the master seed.
    pub fn synth_corpus(&self) -> Result<TrajectorySet> {
        let cfg = SynthConfig {
            seed: self.seeds().synth,
            ..self.synth.clone()
        };
        generate_corpus(&cfg)
    }
}

/// Normalizes, trains the autoencoder, and fits the latent mixture.
pub fn train_pipeline(real: &TrajectorySet, cfg: &PipelineConfig) -> Result<(Checkpoint, LossHistory)> {
    cfg.validate()?;
    let seeds = cfg.seeds();
    let (data, norm) = normalize_with_factor(real, cfg.scale_factor)?;
    let arch = cfg
        .architecture
        .clone()
        .unwrap_or_else(|| Architecture::for_input(data.cols()));
    if arch.input_dim != data.cols() {
        return Err(Error::Config(format!(
            "architecture expects {} inputs, corpus has {}",
            arch.input_dim,
            data.cols()
        )));
    }
    let init = init_params(&arch, seeds.vae_init)?;
    let train_cfg = TrainConfig {
        seed: seeds.vae_train,
        ..cfg.train
    };
    let (params, history) = train(&init, &data, &train_cfg)?;
    let codes = latent_codes(&params, &data)?;
    let gmm = fit_gmm(
        codes.view(),
        &GmmConfig {
            seed: seeds.gmm,
            ..cfg.gmm
        },
    )?;
    let hull = convex_hull(&real.pooled_points())?;
    let checkpoint = Checkpoint::new(params, gmm, norm, real.horizon(), hull, cfg.seed, train_cfg);
    Ok((checkpoint, history))
}

/// Metrics with either the fixed k or the silhouette-selected one.
pub fn evaluate_sets(real: &TrajectorySet, generated: &TrajectorySet, cfg: &PipelineConfig) -> Result<MetricsReport> {
    let seed = cfg.seeds().eval;
    let k = match cfg.eval.k_range {
        Some([lo, hi]) => choose_k(&real.pooled_points(), lo, hi, seed)?.k,
        None => cfg.eval.k,
    };
    evaluate(
        real,
        generated,
        &EvalConfig {
            k,
            seed,
            max_iters: cfg.eval.max_iters,
        },
    )
}
