use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numgrad::ops::KERNEL_WIDTH;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerSpec {
    /// Kernel-2 convolution with bias, followed by batchnorm and ReLU.
    Conv(usize),
    /// Non-overlapping max pool of the given window.
    MaxPool(usize),
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Conv(c) => write!(f, "Conv{c}"),
            LayerSpec::MaxPool(w) => write!(f, "Pool{w}"),
        }
    }
}

pub const SMALLER_PACK: &str = "smaller-pack";
pub const LARGER_PACK: &str = "larger-pack";
pub const COMPACT: &str = "compact";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    #[serde(default)]
    pub preset: Option<String>,
    pub layers: Vec<LayerSpec>,
    pub input_width: usize,
    pub context_dim: usize,
    pub bn_momentum: f64,
    pub bn_eps: f64,
}

impl EncoderConfig {
    pub fn preset_names() -> [&'static str; 3] {
        [SMALLER_PACK, LARGER_PACK, COMPACT]
    }

    pub fn preset(name: &str, input_width: usize) -> Result<Self> {
        use LayerSpec::{Conv, MaxPool};
        let (layers, context_dim) = match name {
            SMALLER_PACK => (
                vec![
                    Conv(32),
                    Conv(64),
                    Conv(128),
                    MaxPool(3),
                    Conv(256),
                    MaxPool(2),
                    Conv(512),
                    MaxPool(4),
                ],
                256,
            ),
            LARGER_PACK => (
                vec![
                    Conv(8),
                    Conv(16),
                    Conv(32),
                    Conv(64),
                    MaxPool(3),
                    Conv(128),
                    MaxPool(4),
                    Conv(256),
                ],
                128,
            ),
            // Small stack for desk-scale synthetic work on narrow inputs.
            COMPACT => (vec![Conv(16), Conv(32), MaxPool(2), Conv(64)], 32),
            other => {
                return Err(Error::Config(format!(
                    "unknown encoder preset {other:?}; expected one of {:?}",
                    Self::preset_names()
                )))
            }
        };
        let cfg = Self {
            preset: Some(name.to_owned()),
            layers,
            input_width,
            context_dim,
            bn_momentum: 0.1,
            bn_eps: 1e-5,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn hidden_dim(&self) -> usize {
        self.layers
            .iter()
            .rev()
            .find_map(|l| match l {
                LayerSpec::Conv(c) => Some(*c),
                LayerSpec::MaxPool(_) => None,
            })
            .unwrap_or(1)
    }

    /// Spatial width after each layer, or an error naming the first layer
    /// that cannot be applied.
    pub fn trace_widths(&self, input_width: usize) -> Result<Vec<usize>> {
        let mut width = input_width;
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            width = match *layer {
                LayerSpec::Conv(_) if width >= KERNEL_WIDTH => width - (KERNEL_WIDTH - 1),
                LayerSpec::MaxPool(w) if w >= 1 && width >= w => width / w,
                _ => {
                    return Err(Error::shape(format!(
                        "input width {input_width} too small: layer {i} ({layer}) receives width {width}"
                    )))
                }
            };
            out.push(width);
        }
        Ok(out)
    }

    pub fn min_input_width(&self) -> usize {
        (1..).find(|&w| self.trace_widths(w).is_ok()).expect("some width fits")
    }

    pub fn validate(&self) -> Result<()> {
        if !self.layers.iter().any(|l| matches!(l, LayerSpec::Conv(_))) {
            return Err(Error::Config("encoder needs at least one convolution".into()));
        }
        if self
            .layers
            .iter()
            .any(|l| matches!(l, LayerSpec::Conv(0) | LayerSpec::MaxPool(0)))
        {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        if self.context_dim == 0 {
            return Err(Error::Config("context dimension must be positive".into()));
        }
        self.trace_widths(self.input_width).map(|_| ())
    }
}
