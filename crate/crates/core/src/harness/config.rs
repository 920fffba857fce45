use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::curriculum::DifficultyParams;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::numerics::OptimizerConfig;

fn default_buckets() -> usize {
    5
}

fn default_k() -> f64 {
    DifficultyParams::default().k
}

fn default_b() -> f64 {
    DifficultyParams::default().b
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurriculumConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_buckets")]
    pub num_buckets: usize,
    #[serde(default = "default_k")]
    pub k: f64,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default = "one")]
    pub epochs_per_bucket: usize,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            num_buckets: default_buckets(),
            k: default_k(),
            b: default_b(),
            epochs_per_bucket: 1,
        }
    }
}

impl CurriculumConfig {
    pub fn difficulty_params(&self) -> DifficultyParams {
        DifficultyParams { k: self.k, b: self.b }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    /// Training conversations.
    pub dataset: Option<PathBuf>,
    /// Evaluated after every epoch.
    pub dev: Option<PathBuf>,
    /// Evaluated once after training.
    pub test: Option<PathBuf>,
    pub wheel: Option<PathBuf>,
    pub checkpoint_out: Option<PathBuf>,
}

/// Everything a training run needs. Relative paths resolve against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub curriculum: CurriculumConfig,
    pub epochs: usize,
    #[serde(default = "one")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub paths: PathsConfig,
}

impl RunConfig {
    pub fn new(model: ModelConfig, optimizer: OptimizerConfig, epochs: usize) -> Self {
        Self {
            model,
            optimizer,
            curriculum: CurriculumConfig::default(),
            epochs,
            batch_size: 1,
            seed: 0,
            paths: PathsConfig::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse {
            line: e
                .span()
                .map(|s| text[..s.start].lines().count().max(1))
                .unwrap_or(0),
            message: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and resolves its paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        if let Some(dir) = path.parent() {
            cfg.paths.resolve_against(dir);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.optimizer.validate()?;
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        let c = &self.curriculum;
        if c.num_buckets == 0 || c.epochs_per_bucket == 0 {
            return Err(Error::Config(
                "curriculum num_buckets and epochs_per_bucket must be positive".into(),
            ));
        }
        c.difficulty_params().validate()
    }
}

impl PathsConfig {
    fn resolve_against(&mut self, dir: &Path) {
        for p in [
            &mut self.dataset,
            &mut self.dev,
            &mut self.test,
            &mut self.wheel,
            &mut self.checkpoint_out,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::OptimizerKind;

    const SAMPLE: &str = r#"
epochs = 3
seed = 7

[model]
hidden_dim = 16
num_classes = 6
modality_dims = { text = 8, audio = 4, visual = 4 }

[optimizer]
kind = "adam"
learning_rate = 0.001

[curriculum]
enabled = true

[paths]
dataset = "train.jsonl"
"#;

    #[test]
    fn parses_with_defaults() {
        let c = RunConfig::parse(SAMPLE).unwrap();
        assert_eq!(c.optimizer.kind, OptimizerKind::Adam);
        assert_eq!(c.batch_size, 1);
        assert_eq!(c.curriculum.num_buckets, 5);
        assert_eq!(c.model.num_layers, 4);
        assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let typo = SAMPLE.replace("seed = 7", "sed = 7");
        assert!(matches!(RunConfig::parse(&typo), Err(Error::Parse { .. })));
        let nested = SAMPLE.replace("enabled = true", "enabled = true\nbuckets = 3");
        assert!(RunConfig::parse(&nested).is_err());
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let bad = SAMPLE.replace("epochs = 3", "epochs = 0");
        assert!(matches!(RunConfig::parse(&bad), Err(Error::Config(_))));
        let bad = SAMPLE.replace("learning_rate = 0.001", "learning_rate = 0.0");
        assert!(matches!(RunConfig::parse(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, SAMPLE).unwrap();
        let c = RunConfig::load(&path).unwrap();
        assert_eq!(c.paths.dataset.unwrap(), dir.path().join("train.jsonl"));
    }
}
