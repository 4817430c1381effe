use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Task;
use crate::encoder::{ContrastiveConfig, ContrastiveDirection, EncoderInit};
use crate::error::{Error, Result};
use crate::eval::FewShotConfig;
use crate::evidence::{AblationMask, HeadConfig, HIDDEN_WIDTH};
use crate::retrieval::DEFAULT_K;

/// Environment variable naming the default output root.
pub const OUTPUT_DIR_ENV: &str = "REMEMBER_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    /// Gaussian clusters around scaled one-hot means.
    Clusters,
    /// Classes readable only from reference texts.
    Context,
}

/// Every setting a workflow can read. A config file supplies top-level
/// values plus optional per-subcommand tables; flags override both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub dim: usize,
    pub tau: f64,
    pub k: usize,
    pub task: Task,
    /// Restricts zero-shot output to one task; unset means all four.
    pub task_filter: Option<Task>,
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub min_delta: f64,
    pub hidden: usize,
    pub encoder_batch_size: usize,
    pub encoder_epochs: usize,
    pub weight_decay: f64,
    pub one_directional: bool,
    pub identity_init: bool,
    pub mask: String,
    pub variants: Vec<String>,
    pub runs: usize,
    pub shots: Vec<usize>,
    pub k_max: usize,
    pub synth_kind: SynthKind,
    pub classes: usize,
    pub per_class: usize,
    pub val_per_class: usize,
    pub test_per_class: usize,
    pub separation: f64,
    pub sigma: f64,
    pub corpus: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub val: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub encoder: Option<PathBuf>,
    pub heads: Vec<PathBuf>,
    pub input: Option<PathBuf>,
    pub query: Option<String>,
    pub max_description: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            dim: 512,
            tau: 0.07,
            k: DEFAULT_K,
            task: Task::Abnormality,
            task_filter: None,
            lr: 5e-5,
            batch_size: 4,
            max_epochs: 100,
            patience: 5,
            min_delta: 0.0,
            hidden: HIDDEN_WIDTH,
            encoder_batch_size: 16,
            encoder_epochs: 10,
            weight_decay: 0.2,
            one_directional: false,
            identity_init: false,
            mask: "full".into(),
            variants: AblationMask::standard_variants()
                .iter()
                .map(ToString::to_string)
                .collect(),
            runs: 10,
            shots: crate::eval::DEFAULT_SHOTS.to_vec(),
            k_max: 10,
            synth_kind: SynthKind::Clusters,
            classes: 4,
            per_class: 50,
            val_per_class: 0,
            test_per_class: 0,
            separation: 6.0,
            sigma: 1.0,
            corpus: None,
            train: None,
            val: None,
            test: None,
            encoder: None,
            heads: Vec::new(),
            input: None,
            query: None,
            max_description: None,
        }
    }
}

impl RunConfig {
    /// Top-level keys of `text`, then the `[command]` table on top.
    pub fn from_toml(text: &str, command: &str) -> Result<RunConfig> {
        let doc: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))?;
        let mut merged = toml::Table::new();
        let mut section = None;
        for (key, value) in doc {
            match value {
                toml::Value::Table(t) if key == command => section = Some(t),
                toml::Value::Table(_) if super::COMMANDS.contains(&key.as_str()) => {}
                toml::Value::Table(_) => {
                    return Err(Error::Config(format!("unknown config section `[{key}]`")))
                }
                v => {
                    merged.insert(key, v);
                }
            }
        }
        merged.extend(section.unwrap_or_default());
        toml::Value::Table(merged)
            .try_into()
            .map_err(|e| Error::Config(format!("config file: {e}")))
    }

    pub fn load(path: &Path, command: &str) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, command)
    }

    /// First 12 hex digits of the SHA-256 of the command and its settings.
    pub fn hash(&self, command: &str) -> String {
        let json = serde_json::to_string(&(command, self)).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))[..12].to_string()
    }

    pub fn ablation_mask(&self) -> Result<AblationMask> {
        self.mask.parse()
    }

    pub fn variant_masks(&self) -> Result<Vec<AblationMask>> {
        self.variants
            .iter()
            .map(|v| v.parse())
            .collect()
    }

    pub fn head_config(&self) -> Result<HeadConfig> {
        let cfg = HeadConfig {
            task: self.task,
            k: self.k,
            hidden: self.hidden,
            lr: self.lr,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            min_delta: self.min_delta,
            seed: self.seed,
            mask: self.ablation_mask()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn contrastive_config(&self) -> Result<ContrastiveConfig> {
        let cfg = ContrastiveConfig {
            lr: self.lr,
            batch_size: self.encoder_batch_size,
            epochs: self.encoder_epochs,
            tau: self.tau,
            weight_decay: self.weight_decay,
            direction: if self.one_directional {
                ContrastiveDirection::ImageToText
            } else {
                ContrastiveDirection::Symmetric
            },
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn encoder_init(&self) -> EncoderInit {
        if self.identity_init {
            EncoderInit::Identity
        } else {
            EncoderInit::Kaiming
        }
    }

    pub fn few_shot_config(&self) -> FewShotConfig {
        FewShotConfig {
            shots: self.shots.clone(),
            runs: self.runs,
            seed: self.seed,
        }
    }

    pub fn require<'a>(&self, path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
        path.as_deref()
            .ok_or_else(|| Error::Config(format!("missing required `--{flag}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_reference_settings() {
        let c = RunConfig::default();
        assert_eq!((c.dim, c.k, c.batch_size, c.patience, c.max_epochs), (512, 3, 4, 5, 100));
        assert_eq!((c.encoder_batch_size, c.encoder_epochs), (16, 10));
        assert_eq!(c.lr, 5e-5);
    }

    #[test]
    fn section_overrides_top_level() {
        let text = "seed = 3\nlr = 0.1\n[train-head]\nlr = 0.5\n[eval]\nk = 9\n";
        let head = RunConfig::from_toml(text, "train-head").unwrap();
        assert_eq!((head.seed, head.lr, head.k), (3, 0.5, 3));
        let eval = RunConfig::from_toml(text, "eval").unwrap();
        assert_eq!((eval.lr, eval.k), (0.1, 9));
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected() {
        assert!(RunConfig::from_toml("colour = 1\n", "eval").is_err());
        assert!(RunConfig::from_toml("[nonsense]\nk = 1\n", "eval").is_err());
    }

    #[test]
    fn hash_depends_on_command_and_settings() {
        let c = RunConfig::default();
        assert_eq!(c.hash("eval"), c.hash("eval"));
        assert_ne!(c.hash("eval"), c.hash("infer"));
        let d = RunConfig { seed: 1, ..c.clone() };
        assert_ne!(c.hash("eval"), d.hash("eval"));
    }
}
