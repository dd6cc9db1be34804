use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;
use wildgen::pipeline::PipelineConfig;

/// File locations; anything unset is derived from the output directory.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default)]
pub struct Settings {
    pub paths: Paths,
    pub pipeline: PipelineConfig,
}

impl Settings {
    /// Reads a TOML config. `[paths]` is handled here; every other table
    /// maps onto the pipeline configuration.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Settings::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut table: toml::Table = text.parse().with_context(|| format!("parsing {}", path.display()))?;
        let paths = match table.remove("paths") {
            Some(v) => v.try_into().context("invalid [paths] table")?,
            None => Paths::default(),
        };
        let pipeline: PipelineConfig = toml::Value::Table(table)
            .try_into()
            .with_context(|| format!("invalid config {}", path.display()))?;
        Ok(Settings { paths, pipeline })
    }

    pub fn out_dir(&self) -> PathBuf {
        self.paths.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn corpus(&self) -> PathBuf {
        self.paths.corpus.clone().unwrap_or_else(|| self.out_dir().join("corpus.csv"))
    }

    pub fn checkpoint(&self) -> PathBuf {
        self.paths
            .checkpoint
            .clone()
            .unwrap_or_else(|| self.out_dir().join("checkpoint.json"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_map_onto_the_pipeline() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(
            &path,
            "seed = 9\n[paths]\nout_dir = \"x\"\n[train]\nepochs = 12\n[gmm]\nk = 4\n[postprocess]\nmbr = false\n",
        )
        .unwrap();
        let s = Settings::load(Some(&path)).unwrap();
        assert_eq!(s.pipeline.seed, 9);
        assert_eq!(s.pipeline.train.epochs, 12);
        assert_eq!(s.pipeline.gmm.k, 4);
        assert!(!s.pipeline.postprocess.mbr && s.pipeline.postprocess.smoothing);
        assert_eq!(s.corpus(), PathBuf::from("x/corpus.csv"));

        fs::write(&path, "[train]\nepoch = 12\n").unwrap();
        assert!(Settings::load(Some(&path)).is_err());
    }
}
