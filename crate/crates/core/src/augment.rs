//! Random-masking augmentation: each view zeroes `round(m·width)` positions
//! chosen uniformly without replacement.

use std::ops::Range;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskingConfig {
    pub ratio: f64,
    pub seed: u64,
    /// When set, whole groups (e.g. one-hot blocks) are masked together and
    /// `ratio` applies to the number of groups.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<Range<usize>>>,
}

impl Default for MaskingConfig {
    fn default() -> Self {
        Self {
            ratio: 0.3,
            seed: 0,
            groups: None,
        }
    }
}

impl MaskingConfig {
    pub fn new(ratio: f64, seed: u64) -> Result<Self> {
        let cfg = Self {
            ratio,
            seed,
            groups: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.ratio) {
            return Err(Error::Config(format!(
                "masking ratio must lie in [0, 1], got {}",
                self.ratio
            )));
        }
        Ok(())
    }

    /// Number of masked units for a vector of `units` maskable units.
    pub fn masked_count(&self, units: usize) -> usize {
        ((self.ratio * units as f64).round() as usize).min(units)
    }
}

/// Two independently masked views of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewPair {
    pub x_i: Vec<f64>,
    pub x_j: Vec<f64>,
}

pub fn mask_view<R: Rng + ?Sized>(x: &[f64], config: &MaskingConfig, rng: &mut R) -> Vec<f64> {
    let mut out = x.to_vec();
    match &config.groups {
        None => {
            let k = config.masked_count(x.len());
            for p in index::sample(rng, x.len(), k) {
                out[p] = 0.0;
            }
        }
        Some(groups) => {
            let k = config.masked_count(groups.len());
            for g in index::sample(rng, groups.len(), k) {
                let span = groups[g].start.min(out.len())..groups[g].end.min(out.len());
                out[span].fill(0.0);
            }
        }
    }
    out
}

pub fn augment_pair<R: Rng + ?Sized>(x: &[f64], config: &MaskingConfig, rng: &mut R) -> ViewPair {
    let x_i = mask_view(x, config, rng);
    let x_j = mask_view(x, config, rng);
    ViewPair { x_i, x_j }
}
