use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::GmmModel;
use crate::ingest::NormalizationParams;
use crate::postprocess::{convex_hull, ConvexRegion};
use crate::rng::stage_seed;
use crate::trajectory::GeoPoint;
use crate::vae::{TrainConfig, VaeParams};

pub const CHECKPOINT_FORMAT: &str = "wildgen-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Per-stage seeds derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSeeds {
    pub synth: u64,
    pub vae_init: u64,
    pub vae_train: u64,
    pub gmm: u64,
    pub generate: u64,
    pub levy: u64,
    pub hgpr_fit: u64,
    pub hgpr_sample: u64,
    pub eval: u64,
}

impl StageSeeds {
    pub fn from_master(master: u64) -> Self {
        StageSeeds {
            synth: stage_seed(master, "synth"),
            vae_init: stage_seed(master, "vae-init"),
            vae_train: stage_seed(master, "vae-train"),
            gmm: stage_seed(master, "gmm"),
            generate: stage_seed(master, "generate"),
            levy: stage_seed(master, "levy"),
            hgpr_fit: stage_seed(master, "hgpr-fit"),
            hgpr_sample: stage_seed(master, "hgpr-sample"),
            eval: stage_seed(master, "eval"),
        }
    }
}

/// Everything generation needs: trained weights, latent mixture,
/// normalization, the real-corpus hull and the seeds used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub horizon: usize,
    pub params: VaeParams,
    pub gmm: GmmModel,
    pub normalization: NormalizationParams,
    /// Counter-clockwise hull vertices of the real corpus.
    pub hull: Vec<GeoPoint>,
    pub master_seed: u64,
    pub seeds: StageSeeds,
    pub train: TrainConfig,
}

impl Checkpoint {
    pub fn new(
        params: VaeParams,
        gmm: GmmModel,
        normalization: NormalizationParams,
        horizon: usize,
        hull: ConvexRegion,
        master_seed: u64,
        train: TrainConfig,
    ) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            horizon,
            params,
            gmm,
            normalization,
            hull: hull.vertices().to_vec(),
            master_seed,
            seeds: StageSeeds::from_master(master_seed),
            train,
        }
    }

    pub fn region(&self) -> Result<ConvexRegion> {
        convex_hull(&self.hull)
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer(out, self)?;
        Ok(())
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_reader(input)?;
        if value.get("format").and_then(|f| f.as_str()) != Some(CHECKPOINT_FORMAT) {
            return Err(Error::Config("not a checkpoint file".into()));
        }
        let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Version(version));
        }
        let ckpt: Checkpoint = serde_json::from_value(value)?;
        if ckpt.params.architecture.input_dim != 2 * ckpt.horizon {
            return Err(Error::Shape("checkpoint horizon does not match the architecture".into()));
        }
        if ckpt.gmm.dim != ckpt.params.architecture.latent_dim {
            return Err(Error::Shape("mixture dimension does not match the latent size".into()));
        }
        Ok(ckpt)
    }
}
