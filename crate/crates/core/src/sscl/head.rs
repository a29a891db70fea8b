use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataio::EncodedSample;
use crate::error::{Error, Result};
use crate::model::{ClassificationHead, EncoderBlock, Linear, Parameterized, ProjectionHead, Representation};
use crate::numgrad::{AdamW, AdamWConfig, Tape, Tensor};
use crate::rng;

const ENCODE_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadConfig {
    pub representation: Representation,
    pub epochs: u32,
    pub batch_size: usize,
    pub optimizer: AdamWConfig,
    pub seed: u64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        Self {
            representation: Representation::Hidden,
            epochs: 100,
            batch_size: 32,
            optimizer: AdamWConfig {
                learning_rate: 1e-2,
                weight_decay: 0.0,
                ..AdamWConfig::default()
            },
            seed: 0,
        }
    }
}

impl HeadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("head batch size must be positive".into()));
        }
        if !(self.optimizer.learning_rate > 0.0) {
            return Err(Error::Config("head learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Frozen-encoder features for every sample, `[n, hidden]` or `[n, context]`.
pub fn representations(
    encoder: &EncoderBlock,
    projector: &ProjectionHead,
    samples: &[EncodedSample],
    representation: Representation,
) -> Result<Tensor> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dim = match representation {
        Representation::Hidden => encoder.hidden_dim(),
        Representation::Context => projector.context_dim(),
    };
    let mut out = Vec::with_capacity(samples.len() * dim);
    for chunk in samples.chunks(ENCODE_CHUNK) {
        let x = Tensor::from_rows(&chunk.iter().map(|s| &s.features[..]).collect::<Vec<_>>())?;
        let h = encoder.encode(&x)?;
        let r = match representation {
            Representation::Hidden => h,
            Representation::Context => projector.project(&h)?,
        };
        out.extend_from_slice(r.data());
    }
    Tensor::new(vec![samples.len(), dim], out)
}

pub(crate) fn labels_of(samples: &[EncodedSample], classes: usize) -> Result<Vec<usize>> {
    samples
        .iter()
        .enumerate()
        .map(|(i, s)| match s.label {
            None => Err(Error::MissingLabel(i)),
            Some(l) if l >= classes => Err(Error::InvalidLabel { label: l, classes }),
            Some(l) => Ok(l),
        })
        .collect()
}

/// Fit a softmax-regression layer on fixed features.
pub fn fit_linear(features: &Tensor, labels: &[usize], classes: usize, cfg: &HeadConfig) -> Result<Linear> {
    cfg.validate()?;
    let [n, dim] = *features.shape() else {
        return Err(Error::shape("head features must be [n, dim]"));
    };
    if labels.len() != n {
        return Err(Error::shape(format!("{n} feature rows but {} labels", labels.len())));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::InvalidLabel { label: l, classes });
    }
    let mut linear = Linear::init(dim, classes, &mut rng::stream(cfg.seed, rng::HEAD_INIT));
    let mut optimizer = AdamW::new(cfg.optimizer, linear.params());
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng::keyed(cfg.seed, rng::HEAD_SHUFFLE, &[u64::from(epoch)]));
        for chunk in order.chunks(cfg.batch_size) {
            let rows: Vec<&[f64]> = chunk.iter().map(|&i| features.row(i)).collect();
            let batch_labels: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let mut tape = Tape::new();
            let x = tape.constant(Tensor::from_rows(&rows)?);
            let (w, b) = linear.bind(&mut tape, true);
            let logits = tape.affine(x, w, b)?;
            let loss = tape.softmax_cross_entropy(logits, &batch_labels)?;
            let mut grads = tape.backward(loss)?;
            let gw = grads.take(w).expect("weight is trainable");
            let gb = grads.take(b).expect("bias is trainable");
            optimizer.step(&mut linear.params_mut(), &[&gw, &gb])?;
        }
    }
    Ok(linear)
}

/// Train a classifier on the frozen encoder's representation of `samples`.
/// Neither the encoder nor the projection head is modified.
pub fn train_head(
    encoder: &EncoderBlock,
    projector: &ProjectionHead,
    samples: &[EncodedSample],
    classes: usize,
    cfg: &HeadConfig,
) -> Result<ClassificationHead> {
    cfg.validate()?;
    let labels = labels_of(samples, classes)?;
    let features = representations(encoder, projector, samples, cfg.representation)?;
    Ok(ClassificationHead {
        linear: fit_linear(&features, &labels, classes, cfg)?,
        representation: cfg.representation,
    })
}

/// Predicted class per sample.
pub fn predict(
    encoder: &EncoderBlock,
    projector: &ProjectionHead,
    head: &ClassificationHead,
    samples: &[EncodedSample],
) -> Result<Vec<usize>> {
    head.predict(&representations(encoder, projector, samples, head.representation)?)
}
