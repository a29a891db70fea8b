use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::augment::augment_pair;
use crate::dataio::EncodedSample;
use crate::error::{Error, Result};
use crate::model::{EncoderBlock, Parameterized, ProjectionHead};
use crate::numgrad::{AdamW, LrSchedule, NormMode, Tape, Tensor, Var};
use crate::rng;

use super::loss::batch_loss;
use super::ContrastiveConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: u32,
    pub learning_rate: f64,
    /// Mean training batch loss, measured before each update.
    pub train_loss: f64,
    /// Contrastive loss on the held-out part, eval mode.
    pub heldout_loss: Option<f64>,
}

fn check_widths(samples: &[EncodedSample], width: usize) -> Result<()> {
    match samples.iter().position(|s| s.features.len() != width) {
        Some(i) => Err(Error::shape(format!(
            "sample {i} has width {}, encoder expects {width}",
            samples[i].features.len()
        ))),
        None => Ok(()),
    }
}

/// Stack two masked views per sample as rows `(2p, 2p+1)`.
fn views(
    samples: &[EncodedSample],
    indices: &[usize],
    cfg: &ContrastiveConfig,
    stream: &str,
    epoch: Option<u32>,
) -> Result<Tensor> {
    let width = samples[indices[0]].features.len();
    let mut data = Vec::with_capacity(2 * indices.len() * width);
    for &i in indices {
        let keys: Vec<u64> = epoch.map(u64::from).into_iter().chain([i as u64]).collect();
        let mut r = rng::keyed(cfg.masking.seed, stream, &keys);
        let pair = augment_pair(&samples[i].features, &cfg.masking, &mut r);
        data.extend(pair.x_i);
        data.extend(pair.x_j);
    }
    Tensor::new(vec![2 * indices.len(), width], data)
}

fn train_step(
    encoder: &mut EncoderBlock,
    projector: &mut ProjectionHead,
    optimizer: &mut AdamW,
    batch: Tensor,
    temperature: f64,
) -> Result<f64> {
    let mut tape = Tape::new();
    let conv_vars = encoder.bind(&mut tape, true);
    let (gw, gb) = projector.linear.bind(&mut tape, true);
    let x = tape.constant(batch);
    let (h, stats) = encoder.forward(&mut tape, &conv_vars, x, NormMode::Train)?;
    let z = tape.affine(h, gw, gb)?;
    let loss = tape.nt_xent(z, temperature)?;
    let value = tape.value(loss).item();
    let mut grads = tape.backward(loss)?;
    let vars: Vec<Var> = conv_vars
        .iter()
        .flat_map(|c| [c.kernel, c.bias, c.gamma, c.beta])
        .chain([gw, gb])
        .collect();
    let grads: Vec<Vec<f64>> = vars
        .iter()
        .map(|&v| grads.take(v).unwrap_or_else(|| vec![0.0; tape.value(v).len()]))
        .collect();
    let grad_refs: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
    let mut params = encoder.params_mut();
    params.extend(projector.params_mut());
    optimizer.step(&mut params, &grad_refs)?;
    encoder.absorb_stats(&stats);
    Ok(value)
}

/// Eval-mode contrastive loss with fixed per-sample views.
fn heldout_loss(
    encoder: &EncoderBlock,
    projector: &ProjectionHead,
    samples: &[EncodedSample],
    cfg: &ContrastiveConfig,
) -> Result<Option<f64>> {
    if samples.len() < 2 {
        return Ok(None);
    }
    let n = cfg.batch_size.min(samples.len());
    let order: Vec<usize> = (0..samples.len()).collect();
    let mut losses = Vec::new();
    for chunk in order.chunks_exact(n) {
        let x = views(samples, chunk, cfg, rng::HELDOUT_AUGMENT, None)?;
        let z = projector.project(&encoder.encode(&x)?)?;
        losses.push(batch_loss(&z, cfg.temperature)?);
    }
    Ok(Some(losses.iter().sum::<f64>() / losses.len() as f64))
}

/// Train `encoder` and `projector` on unlabeled samples. Returns one record
/// per epoch.
pub fn pretrain(
    encoder: &mut EncoderBlock,
    projector: &mut ProjectionHead,
    train: &[EncodedSample],
    heldout: &[EncodedSample],
    cfg: &ContrastiveConfig,
) -> Result<Vec<EpochRecord>> {
    cfg.validate()?;
    if projector.hidden_dim() != encoder.hidden_dim() {
        return Err(Error::shape("projection head does not match the encoder"));
    }
    check_widths(train, encoder.input_width())?;
    check_widths(heldout, encoder.input_width())?;
    if train.len() < cfg.batch_size {
        return Err(Error::InsufficientData(format!(
            "{} samples cannot fill one batch of {}",
            train.len(),
            cfg.batch_size
        )));
    }
    let schedule = LrSchedule::new(cfg.optimizer.learning_rate, cfg.lr_gamma)?;
    let mut optimizer = AdamW::new(cfg.optimizer, encoder.params().into_iter().chain(projector.params()));
    let mut history = Vec::with_capacity(cfg.epochs as usize);
    for epoch in 0..cfg.epochs {
        let lr = schedule.lr_at(epoch);
        optimizer.set_learning_rate(lr);
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng::keyed(cfg.seed, rng::SHUFFLE, &[u64::from(epoch)]));
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks_exact(cfg.batch_size) {
            let x = views(train, chunk, cfg, rng::AUGMENT, Some(epoch))?;
            total += train_step(encoder, projector, &mut optimizer, x, cfg.temperature)?;
            batches += 1;
        }
        let record = EpochRecord {
            epoch: epoch + 1,
            learning_rate: lr,
            train_loss: total / batches as f64,
            heldout_loss: heldout_loss(encoder, projector, heldout, cfg)?,
        };
        log::info!(
            "epoch {:>4}  lr {:.3e}  loss {:.6}  held-out {}",
            record.epoch,
            lr,
            record.train_loss,
            record.heldout_loss.map_or("-".to_owned(), |l| format!("{l:.6}"))
        );
        history.push(record);
    }
    Ok(history)
}
