//! Self-describing checkpoints: the archive header carries the
//! architecture, so loading needs no side information.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::numgrad::{RunningStats, Tensor, TensorArchive};

use super::config::EncoderConfig;
use super::encoder::{ConvLayer, EncoderBlock};
use super::heads::{ClassificationHead, Linear, ProjectionHead, Representation};

const ENCODER_KIND: &str = "encoder";
const HEAD_KIND: &str = "head";

#[derive(Serialize, Deserialize)]
struct EncoderHeader {
    config: EncoderConfig,
    #[serde(default)]
    extra: Value,
}

/// Pretrained encoder and projection head plus free-form run metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderCheckpoint {
    pub encoder: EncoderBlock,
    pub projector: ProjectionHead,
    pub extra: Value,
}

fn take(archive: &TensorArchive, name: &str, path: &Path) -> Result<Tensor> {
    archive
        .get(name)
        .cloned()
        .ok_or_else(|| Error::format(path, format!("missing tensor {name}")))
}

impl EncoderCheckpoint {
    pub fn to_archive(&self) -> TensorArchive {
        let header = EncoderHeader {
            config: self.encoder.config.clone(),
            extra: self.extra.clone(),
        };
        let mut a = TensorArchive::new(ENCODER_KIND, serde_json::to_value(header).expect("header"));
        for (i, c) in self.encoder.convs.iter().enumerate() {
            a.push(format!("conv{i}.kernel"), c.kernel.clone());
            a.push(format!("conv{i}.bias"), c.bias.clone());
            a.push(format!("conv{i}.bn_gamma"), c.gamma.clone());
            a.push(format!("conv{i}.bn_beta"), c.beta.clone());
            a.push(format!("conv{i}.running_mean"), Tensor::vector(c.running.mean.clone()));
            a.push(format!("conv{i}.running_var"), Tensor::vector(c.running.var.clone()));
        }
        a.push("proj.weight", self.projector.linear.weight.clone());
        a.push("proj.bias", self.projector.linear.bias.clone());
        a
    }

    pub fn from_archive(a: &TensorArchive, path: &Path) -> Result<Self> {
        if a.kind != ENCODER_KIND {
            return Err(Error::format(
                path,
                format!("expected an encoder checkpoint, found {}", a.kind),
            ));
        }
        let header: EncoderHeader =
            serde_json::from_value(a.metadata.clone()).map_err(|e| Error::format(path, e.to_string()))?;
        let config = header.config;
        let n_convs = config
            .layers
            .iter()
            .filter(|l| matches!(l, super::LayerSpec::Conv(_)))
            .count();
        let convs = (0..n_convs)
            .map(|i| {
                Ok(ConvLayer {
                    kernel: take(a, &format!("conv{i}.kernel"), path)?,
                    bias: take(a, &format!("conv{i}.bias"), path)?,
                    gamma: take(a, &format!("conv{i}.bn_gamma"), path)?,
                    beta: take(a, &format!("conv{i}.bn_beta"), path)?,
                    running: RunningStats {
                        mean: take(a, &format!("conv{i}.running_mean"), path)?.into_data(),
                        var: take(a, &format!("conv{i}.running_var"), path)?.into_data(),
                        momentum: config.bn_momentum,
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let encoder = EncoderBlock::from_parts(config, convs).map_err(|e| Error::format(path, e.to_string()))?;
        let linear = Linear::from_parts(take(a, "proj.weight", path)?, take(a, "proj.bias", path)?)
            .map_err(|e| Error::format(path, e.to_string()))?;
        if linear.in_dim() != encoder.hidden_dim() {
            return Err(Error::format(path, "projection input does not match the encoder"));
        }
        Ok(Self {
            encoder,
            projector: ProjectionHead { linear },
            extra: header.extra,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_archive().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_archive(&TensorArchive::load(path)?, path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadMeta {
    pub representation: Representation,
    pub class_names: Vec<String>,
    #[serde(default)]
    pub extra: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadCheckpoint {
    pub head: ClassificationHead,
    pub meta: HeadMeta,
}

impl HeadCheckpoint {
    pub fn to_archive(&self) -> TensorArchive {
        let mut a = TensorArchive::new(HEAD_KIND, serde_json::to_value(&self.meta).expect("meta"));
        a.push("head.weight", self.head.linear.weight.clone());
        a.push("head.bias", self.head.linear.bias.clone());
        a
    }

    pub fn from_archive(a: &TensorArchive, path: &Path) -> Result<Self> {
        if a.kind != HEAD_KIND {
            return Err(Error::format(
                path,
                format!("expected a head checkpoint, found {}", a.kind),
            ));
        }
        let meta: HeadMeta =
            serde_json::from_value(a.metadata.clone()).map_err(|e| Error::format(path, e.to_string()))?;
        let linear = Linear::from_parts(take(a, "head.weight", path)?, take(a, "head.bias", path)?)
            .map_err(|e| Error::format(path, e.to_string()))?;
        if linear.out_dim() != meta.class_names.len() {
            return Err(Error::format(path, "head output does not match the class list"));
        }
        Ok(Self {
            head: ClassificationHead {
                linear,
                representation: meta.representation,
            },
            meta,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_archive().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_archive(&TensorArchive::load(path)?, path)
    }
}
