//! Contrastive objective, the pretraining loop, and frozen-encoder heads.

pub mod downstream;
pub mod head;
pub mod loss;
pub mod pretrain;

use serde::{Deserialize, Serialize};

use crate::augment::MaskingConfig;
use crate::error::{Error, Result};
use crate::numgrad::AdamWConfig;

pub use downstream::{evaluate_head, head_splits, run_downstream, HeadSplits, SplitPlan};
pub use head::{fit_linear, predict, representations, train_head, HeadConfig};
pub use loss::{batch_loss, pair_loss, SimilarityMatrix};
pub use pretrain::{pretrain, EpochRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveConfig {
    /// Samples per batch; each batch holds `2N` views.
    pub batch_size: usize,
    pub temperature: f64,
    pub epochs: u32,
    pub masking: MaskingConfig,
    pub optimizer: AdamWConfig,
    /// Per-epoch multiplicative learning-rate decay.
    pub lr_gamma: f64,
    pub seed: u64,
}

impl Default for ContrastiveConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            temperature: 0.5,
            epochs: 100,
            masking: MaskingConfig::default(),
            optimizer: AdamWConfig::default(),
            lr_gamma: 0.99,
            seed: 0,
        }
    }
}

impl ContrastiveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if !(self.optimizer.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(self.lr_gamma > 0.0 && self.lr_gamma <= 1.0) {
            return Err(Error::Config(format!(
                "lr_gamma must lie in (0, 1], got {}",
                self.lr_gamma
            )));
        }
        self.masking.validate()
    }
}
