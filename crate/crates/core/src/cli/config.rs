use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::MaskingConfig;
use crate::dataio::{DatasetSchema, Task};
use crate::error::{Error, Result};
use crate::io;
use crate::model::{EncoderConfig, Representation, SMALLER_PACK};
use crate::numgrad::AdamWConfig;
use crate::sscl::{ContrastiveConfig, HeadConfig, SplitPlan};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub version: u32,
    /// Root of every random stream.
    pub seed: u64,
    /// Directory for all stage artifacts.
    pub workdir: PathBuf,
    pub preprocess: PreprocessSection,
    pub pretrain: PretrainSection,
    pub head: HeadSection,
    pub transfer: TransferSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessSection {
    /// Schema file, or `builtin:<name>`.
    pub schema: String,
    /// Unlabeled pretraining data; the preprocessor is fitted on it.
    pub encoder_csv: Option<PathBuf>,
    /// Labeled data for heads and evaluation.
    pub head_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PretrainSection {
    pub preset: String,
    pub batch_size: usize,
    pub temperature: f64,
    pub mask_ratio: f64,
    /// Mask whole one-hot blocks instead of single positions.
    pub mask_groups: bool,
    pub epochs: u32,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub lr_gamma: f64,
    /// Share of the encoder set kept aside for held-out loss.
    pub heldout_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeadSection {
    /// `binary`, `six-class`, `all`, or a comma-separated class list.
    pub task: String,
    pub label_fraction: f64,
    pub train_fraction: f64,
    pub representation: Representation,
    pub epochs: u32,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransferSection {
    pub target_schema: Option<String>,
    pub target_csv: Option<PathBuf>,
    pub aliases: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 0,
            workdir: PathBuf::from("flowcl-run"),
            preprocess: PreprocessSection::default(),
            pretrain: PretrainSection::default(),
            head: HeadSection::default(),
            transfer: TransferSection::default(),
        }
    }
}

impl Default for PreprocessSection {
    fn default() -> Self {
        Self {
            schema: "builtin:unsw-nb15-smaller".to_owned(),
            encoder_csv: None,
            head_csv: None,
        }
    }
}

impl Default for PretrainSection {
    fn default() -> Self {
        let c = ContrastiveConfig::default();
        Self {
            preset: SMALLER_PACK.to_owned(),
            batch_size: c.batch_size,
            temperature: c.temperature,
            mask_ratio: c.masking.ratio,
            mask_groups: false,
            epochs: c.epochs,
            learning_rate: c.optimizer.learning_rate,
            weight_decay: c.optimizer.weight_decay,
            lr_gamma: c.lr_gamma,
            heldout_fraction: 0.2,
        }
    }
}

impl Default for HeadSection {
    fn default() -> Self {
        let h = HeadConfig::default();
        Self {
            task: "binary".to_owned(),
            label_fraction: 1.0,
            train_fraction: 0.8,
            representation: h.representation,
            epochs: h.epochs,
            batch_size: h.batch_size,
            learning_rate: h.optimizer.learning_rate,
            weight_decay: h.optimizer.weight_decay,
        }
    }
}

fn unit_open(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in (0, 1], got {v}")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(format!("{}: {e}", origin.display())))?;
        if cfg.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "{}: unsupported config version {}",
                origin.display(),
                cfg.version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&io::read_string(path)?, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate_pretrain(&self) -> Result<()> {
        EncoderConfig::preset(&self.pretrain.preset, 1024)?;
        self.contrastive(None)?.validate()?;
        let h = self.pretrain.heldout_fraction;
        if !(0.0..1.0).contains(&h) {
            return Err(Error::Config(format!("heldout_fraction must lie in [0, 1), got {h}")));
        }
        Ok(())
    }

    pub fn validate_head(&self) -> Result<()> {
        Task::parse(&self.head.task)?;
        unit_open("label_fraction", self.head.label_fraction)?;
        let t = self.head.train_fraction;
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::Config(format!("train_fraction must lie in (0, 1), got {t}")));
        }
        self.head_config().validate()
    }

    /// Contrastive settings; `schema` supplies one-hot groups when
    /// `mask_groups` is set.
    pub fn contrastive(&self, schema: Option<&DatasetSchema>) -> Result<ContrastiveConfig> {
        let p = &self.pretrain;
        let masking = MaskingConfig {
            ratio: p.mask_ratio,
            seed: self.seed,
            groups: match (p.mask_groups, schema) {
                (true, Some(s)) => Some(s.feature_spans()),
                _ => None,
            },
        };
        Ok(ContrastiveConfig {
            batch_size: p.batch_size,
            temperature: p.temperature,
            epochs: p.epochs,
            masking,
            optimizer: AdamWConfig {
                learning_rate: p.learning_rate,
                weight_decay: p.weight_decay,
                ..AdamWConfig::default()
            },
            lr_gamma: p.lr_gamma,
            seed: self.seed,
        })
    }

    pub fn head_config(&self) -> HeadConfig {
        let h = &self.head;
        HeadConfig {
            representation: h.representation,
            epochs: h.epochs,
            batch_size: h.batch_size,
            optimizer: AdamWConfig {
                learning_rate: h.learning_rate,
                weight_decay: h.weight_decay,
                ..AdamWConfig::default()
            },
            seed: self.seed,
        }
    }

    pub fn split_plan(&self) -> Result<SplitPlan> {
        Ok(SplitPlan {
            task: Task::parse(&self.head.task)?,
            train_fraction: self.head.train_fraction,
            label_fraction: self.head.label_fraction,
            seed: self.seed,
        })
    }
}
