use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Checkpoint, PipelineConfig};
use crate::baselines::{fit_hgpr, fit_levy, generate_levy, sample_hgpr, HgprModel, LevyParams};
use crate::error::{Error, Result};
use crate::gmm::sample_gmm;
use crate::ingest::{denormalize, NormalizedMatrix};
use crate::postprocess::{convex_hull, smooth_trajectory, ConvexRegion, SavgolSpec};
use crate::rng::seeded;
use crate::trajectory::{Trajectory, TrajectorySet};
use crate::vae::decode_batch;

/// Share of generated trajectories the original authors discarded with the
/// region filter; reported next to ours, never asserted.
pub const REFERENCE_DISCARD_RATE: f64 = 0.296;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostprocessToggles {
    pub smoothing: bool,
    pub mbr: bool,
}

impl Default for PostprocessToggles {
    fn default() -> Self {
        PostprocessToggles {
            smoothing: true,
            mbr: true,
        }
    }
}

/// The four ablation modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Raw,
    Smoothed,
    Mbr,
    Full,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Raw, Mode::Smoothed, Mode::Mbr, Mode::Full];

    pub fn toggles(self) -> PostprocessToggles {
        let (smoothing, mbr) = match self {
            Mode::Raw => (false, false),
            Mode::Smoothed => (true, false),
            Mode::Mbr => (false, true),
            Mode::Full => (true, true),
        };
        PostprocessToggles { smoothing, mbr }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Raw => "raw",
            Mode::Smoothed => "smoothed",
            Mode::Mbr => "mbr",
            Mode::Full => "full",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown mode {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Levy,
    Hgpr,
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "levy" => Ok(BaselineKind::Levy),
            "hgpr" => Ok(BaselineKind::Hgpr),
            _ => Err(Error::InvalidArgument(format!("unknown baseline {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub generator: String,
    pub smoothing: bool,
    pub mbr: bool,
    pub requested: usize,
    pub produced: usize,
    /// Candidates examined before `requested` survived.
    pub attempts: usize,
    pub discarded: usize,
    pub discard_rate: f64,
    pub reference_discard_rate: f64,
    pub master_seed: u64,
    pub stage_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationOutput {
    pub trajectories: TrajectorySet,
    /// Every examined candidate before post-processing, in order.
    pub candidates: TrajectorySet,
    pub manifest: Manifest,
}

struct Filter<'a> {
    toggles: PostprocessToggles,
    savgol: &'a SavgolSpec,
    region: &'a ConvexRegion,
}

impl Filter<'_> {
    fn apply(&self, t: &Trajectory) -> Result<Option<Trajectory>> {
        let t = if self.toggles.smoothing {
            smooth_trajectory(t, self.savgol)?
        } else {
            t.clone()
        };
        if self.toggles.mbr && !self.region.contains_all(&t.points) {
            return Ok(None);
        }
        Ok(Some(t))
    }
}

/// Pulls candidate batches until `count` survive the filter or the attempt
/// cap is reached.
fn collect<F>(
    mut next_batch: F,
    filter: &Filter<'_>,
    count: usize,
    max_attempts_factor: usize,
) -> Result<(Vec<Trajectory>, Vec<Trajectory>)>
where
    F: FnMut(usize) -> Result<Vec<Trajectory>>,
{
    if count < 1 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let cap = count.saturating_mul(max_attempts_factor.max(1));
    let mut kept = Vec::with_capacity(count);
    let mut examined = Vec::new();
    while kept.len() < count && examined.len() < cap {
        let batch = next_batch(count.min(cap - examined.len()))?;
        for cand in batch {
            if let Some(t) = filter.apply(&cand)? {
                kept.push(t);
            }
            examined.push(cand);
            if kept.len() == count {
                break;
            }
        }
    }
    if kept.len() < count {
        return Err(Error::Shortfall {
            achieved: kept.len(),
            requested: count,
            attempts: examined.len(),
        });
    }
    Ok((kept, examined))
}

fn finish(
    generator: &str,
    requested: usize,
    toggles: PostprocessToggles,
    kept: Vec<Trajectory>,
    examined: Vec<Trajectory>,
    horizon: usize,
    master_seed: u64,
    stage_seed: u64,
) -> Result<GenerationOutput> {
    let attempts = examined.len();
    let produced = kept.len();
    let discarded = attempts - produced;
    Ok(GenerationOutput {
        trajectories: TrajectorySet::with_horizon(kept, horizon)?,
        candidates: TrajectorySet::with_horizon(examined, horizon)?,
        manifest: Manifest {
            generator: generator.into(),
            smoothing: toggles.smoothing,
            mbr: toggles.mbr,
            requested,
            produced,
            attempts,
            discarded,
            discard_rate: discarded as f64 / attempts as f64,
            reference_discard_rate: REFERENCE_DISCARD_RATE,
            master_seed,
            stage_seed,
        },
    })
}

/// Samples the latent mixture, decodes, denormalizes and post-processes
/// according to `mode`.
pub fn generate(
    ckpt: &Checkpoint,
    mode: Mode,
    count: usize,
    max_attempts_factor: usize,
    savgol: &SavgolSpec,
) -> Result<GenerationOutput> {
    let region = ckpt.region()?;
    let toggles = mode.toggles();
    let filter = Filter {
        toggles,
        savgol,
        region: &region,
    };
    let seed = ckpt.seeds.generate;
    let mut rng = seeded(seed);
    let next = |n: usize| -> Result<Vec<Trajectory>> {
        let z = sample_gmm(&ckpt.gmm, n, &mut rng)?;
        let x: Array2<f64> = decode_batch(&ckpt.params, z.view())?;
        Ok(denormalize(&NormalizedMatrix { values: x }, &ckpt.normalization)?.into_trajectories())
    };
    let (kept, examined) = collect(next, &filter, count, max_attempts_factor)?;
    finish(
        &format!("wildgen-{mode}"),
        count,
        toggles,
        kept,
        examined,
        ckpt.horizon,
        ckpt.master_seed,
        seed,
    )
}

/// Fitted baseline parameters, kept for inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaselineFit {
    Levy(LevyParams),
    Hgpr(HgprModel),
}

/// Fits a baseline on `real`, then generates with the configured
/// post-processing toggles until `count` trajectories survive.
pub fn run_baseline(
    real: &TrajectorySet,
    kind: BaselineKind,
    count: usize,
    cfg: &PipelineConfig,
) -> Result<(GenerationOutput, BaselineFit)> {
    cfg.validate()?;
    let seeds = cfg.seeds();
    let region = convex_hull(&real.pooled_points())?;
    let filter = Filter {
        toggles: cfg.postprocess,
        savgol: &cfg.savgol,
        region: &region,
    };
    let m = real.horizon();
    let factor = cfg.generation.max_attempts_factor;
    match kind {
        BaselineKind::Levy => {
            let params = fit_levy(real)?;
            let mut rng = seeded(seeds.levy);
            let next = |n: usize| -> Result<Vec<Trajectory>> {
                (0..n)
                    .map(|_| {
                        let start = real.trajectories()[rng.random_range(0..real.len())].points[0];
                        generate_levy(&params, m - 1, start, &mut rng)
                    })
                    .collect()
            };
            let (kept, examined) = collect(next, &filter, count, factor)?;
            let out = finish("levy", count, cfg.postprocess, kept, examined, m, cfg.seed, seeds.levy)?;
            Ok((out, BaselineFit::Levy(params)))
        }
        BaselineKind::Hgpr => {
            let model = fit_hgpr(real, cfg.baselines.hgpr_subsample_fraction, seeds.hgpr_fit)?;
            let mut rng = seeded(seeds.hgpr_sample);
            let next = |n: usize| Ok(sample_hgpr(&model, n, &mut rng)?.into_trajectories());
            let (kept, examined) = collect(next, &filter, count, factor)?;
            let out = finish("hgpr", count, cfg.postprocess, kept, examined, m, cfg.seed, seeds.hgpr_sample)?;
            Ok((out, BaselineFit::Hgpr(model)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_differ_only_in_toggles() {
        let t: Vec<_> = Mode::ALL.iter().map(|m| m.toggles()).collect();
        assert_eq!(t.iter().filter(|x| x.smoothing).count(), 2);
        assert_eq!(t.iter().filter(|x| x.mbr).count(), 2);
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
        }
        assert!("bogus".parse::<Mode>().is_err());
        assert_eq!("hgpr".parse::<BaselineKind>().unwrap(), BaselineKind::Hgpr);
    }
}
