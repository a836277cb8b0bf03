//! Declarative run configuration: one TOML file per run, plus a handful of
//! CLI flag overrides. Defaults reproduce the reference recipe (freeze six
//! layers, 4 epochs, learning rate 5e-5, batch 16).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ColumnMapping, Language};
use crate::encoder::{BackboneRegistry, ModelSpec, Pooling};
use crate::normalize::RulePipeline;
use crate::train::TrainConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    GujaratiTask1,
    AssameseTask4,
    BengaliTask4,
    Custom,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::GujaratiTask1 => "gujarati_task1",
            Task::AssameseTask4 => "assamese_task4",
            Task::BengaliTask4 => "bengali_task4",
            Task::Custom => "custom",
        }
    }

    pub fn language(self) -> Language {
        match self {
            Task::GujaratiTask1 => Language::Gujarati,
            Task::AssameseTask4 => Language::Assamese,
            Task::BengaliTask4 => Language::Bengali,
            Task::Custom => Language::Other,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DataPaths {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Prediction file to score or re-export.
    pub predictions: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub backbone: String,
    /// `None` picks the family default (mean for SBERT, CLS for BERT).
    pub pooling: Option<Pooling>,
    pub freeze_layers: usize,
    pub freeze_embeddings: bool,
    pub max_sequence_length: usize,
    pub truncate: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            backbone: "bengali-sbert".to_string(),
            pooling: None,
            freeze_layers: 6,
            freeze_embeddings: true,
            max_sequence_length: 128,
            truncate: true,
        }
    }
}

/// The whole run as data; serialized alongside every artifact so a run can
/// be replayed from its frozen config snapshot.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub task: Task,
    pub output_dir: PathBuf,
    /// Registry file; defaults to `<output_dir>/registry.txt`.
    pub registry: Option<PathBuf>,
    pub data: DataPaths,
    pub columns: ColumnMapping,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub normalize: RulePipeline,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: Task::Custom,
            output_dir: PathBuf::from("runs/default"),
            registry: None,
            data: DataPaths::default(),
            columns: ColumnMapping::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            normalize: RulePipeline::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let config: RunConfig =
            toml::from_str(&text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let registry = BackboneRegistry::builtin();
        let entry = registry
            .get(&self.model.backbone)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.model.freeze_layers > entry.layers {
            return Err(ConfigError::Invalid(format!(
                "freeze_layers {} exceeds {} layers of backbone {}",
                self.model.freeze_layers, entry.layers, entry.name
            )));
        }
        self.train
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.model.max_sequence_length == 0 {
            return Err(ConfigError::Invalid("max_sequence_length must be > 0".into()));
        }
        Ok(())
    }

    pub fn language(&self) -> Language {
        self.task.language()
    }

    pub fn registry_path(&self) -> PathBuf {
        self.registry
            .clone()
            .unwrap_or_else(|| self.output_dir.join("registry.txt"))
    }

    /// Resolve the model section into a concrete spec for its backbone.
    pub fn model_spec(&self) -> Result<ModelSpec, ConfigError> {
        let registry = BackboneRegistry::builtin();
        let entry = registry
            .get(&self.model.backbone)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let mut spec = ModelSpec::for_entry(entry);
        if let Some(pooling) = self.model.pooling {
            spec.pooling = pooling;
        }
        spec.freeze_layers = self.model.freeze_layers;
        spec.freeze_embeddings = self.model.freeze_embeddings;
        spec.max_sequence_length = self.model.max_sequence_length;
        spec.truncate = self.model.truncate;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_recipe() {
        let config = RunConfig::default();
        assert_eq!(config.model.freeze_layers, 6);
        assert_eq!(config.train.epochs, 4);
        assert_eq!(config.train.learning_rate, 5e-5);
        assert_eq!(config.train.batch_size, 16);
        assert_eq!(config.train.weight_decay, 0.01);
        assert!(!config.train.class_weighting);
        assert!(config.normalize.strip_urls);
        assert!(!config.normalize.hashtag_keep_word);
    }

    #[test]
    fn minimal_toml_parses_with_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "task = \"bengali_task4\"\noutput_dir = \"out\"\n\n[model]\nbackbone = \"bengali-sbert\"\n",
        )
        .unwrap();
        let config = RunConfig::load(&path).unwrap();
        assert_eq!(config.task, Task::BengaliTask4);
        assert_eq!(config.language(), Language::Bengali);
        assert_eq!(config.train.epochs, 4);
        let spec = config.model_spec().unwrap();
        assert_eq!(spec.pooling, Pooling::MeanPool);
        assert_eq!(spec.freeze_layers, 6);
    }

    #[test]
    fn unknown_backbone_is_rejected() {
        let mut config = RunConfig::default();
        config.model.backbone = "not-a-model".into();
        assert!(matches!(config.validate(), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn excessive_freeze_is_rejected() {
        let mut config = RunConfig::default();
        config.model.backbone = "tiny-random-2layer".into();
        config.model.freeze_layers = 3;
        assert!(config.validate().is_err());
    }
}
