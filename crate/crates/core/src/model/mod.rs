//! Encoder `e(·)`, projection `g(·)`, and classification heads.

pub mod checkpoint;
pub mod config;
pub mod encoder;
pub mod heads;

use crate::error::Result;
use crate::numgrad::Tensor;
use crate::rng;

pub use checkpoint::{EncoderCheckpoint, HeadCheckpoint, HeadMeta};
pub use config::{EncoderConfig, LayerSpec, COMPACT, LARGER_PACK, SMALLER_PACK};
pub use encoder::{ConvLayer, ConvVars, EncoderBlock};
pub use heads::{ClassificationHead, Linear, ProjectionHead, Representation};

/// Anything with trainable tensors. Running statistics are not counted.
pub trait Parameterized {
    fn params(&self) -> Vec<&Tensor>;
    fn params_mut(&mut self) -> Vec<&mut Tensor>;

    fn count_parameters(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }
}

/// Build a freshly initialised encoder and projection head; deterministic in `seed`.
pub fn build_encoder(config: EncoderConfig, seed: u64) -> Result<(EncoderBlock, ProjectionHead)> {
    let mut r = rng::stream(seed, rng::INIT);
    let context = config.context_dim;
    let encoder = EncoderBlock::init(config, &mut r)?;
    let projector = ProjectionHead {
        linear: Linear::init(encoder.hidden_dim(), context, &mut r),
    };
    Ok((encoder, projector))
}

/// Trainable parameter count of a preset encoder plus its projection head.
pub fn preset_parameter_count(preset: &str) -> Result<usize> {
    let probe = EncoderConfig::preset(preset, 256)?;
    let (e, g) = build_encoder(probe, 0)?;
    Ok(e.count_parameters() + g.count_parameters())
}
