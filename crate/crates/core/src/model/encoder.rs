use rand::Rng;

use crate::error::{Error, Result};
use crate::numgrad::ops::{self, NormMode, RunningStats, KERNEL_WIDTH};
use crate::numgrad::{BatchStats, Tape, Tensor, Var};

use super::config::{EncoderConfig, LayerSpec};
use super::Parameterized;

/// Kaiming-uniform draw for a ReLU layer with the given fan-in.
pub(crate) fn kaiming_uniform<R: Rng + ?Sized>(shape: Vec<usize>, fan_in: usize, rng: &mut R) -> Tensor {
    let bound = (6.0 / fan_in as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
    Tensor::new(shape, data).expect("shape and data agree")
}

/// One convolution with its batchnorm.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub kernel: Tensor,
    pub bias: Tensor,
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running: RunningStats,
}

impl ConvLayer {
    pub fn init<R: Rng + ?Sized>(in_ch: usize, out_ch: usize, momentum: f64, rng: &mut R) -> Self {
        Self {
            kernel: kaiming_uniform(vec![out_ch, in_ch, KERNEL_WIDTH], in_ch * KERNEL_WIDTH, rng),
            bias: Tensor::zeros(vec![out_ch]),
            gamma: Tensor::filled(vec![out_ch], 1.0),
            beta: Tensor::zeros(vec![out_ch]),
            running: RunningStats::new(out_ch, momentum),
        }
    }

    pub fn out_channels(&self) -> usize {
        self.kernel.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.kernel.shape()[1]
    }
}

/// Handles for one conv layer's parameters on a tape.
#[derive(Debug, Clone, Copy)]
pub struct ConvVars {
    pub kernel: Var,
    pub bias: Var,
    pub gamma: Var,
    pub beta: Var,
}

/// The encoder `e(·)`: conv/BN/ReLU and pooling layers followed by a global
/// max pool, producing `[batch, hidden_dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderBlock {
    pub config: EncoderConfig,
    pub convs: Vec<ConvLayer>,
}

impl EncoderBlock {
    pub fn init<R: Rng + ?Sized>(config: EncoderConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut convs = Vec::new();
        let mut channels = 1;
        for layer in &config.layers {
            if let LayerSpec::Conv(out) = *layer {
                convs.push(ConvLayer::init(channels, out, config.bn_momentum, rng));
                channels = out;
            }
        }
        Ok(Self { config, convs })
    }

    /// Rebuild from stored layers, checking they match the config.
    pub fn from_parts(config: EncoderConfig, convs: Vec<ConvLayer>) -> Result<Self> {
        config.validate()?;
        let mut channels = 1;
        let mut it = convs.iter();
        for layer in &config.layers {
            if let LayerSpec::Conv(out) = *layer {
                let conv = it
                    .next()
                    .ok_or_else(|| Error::shape("fewer conv layers than the config lists"))?;
                if conv.in_channels() != channels
                    || conv.out_channels() != out
                    || conv.bias.shape() != [out]
                    || conv.gamma.shape() != [out]
                    || conv.beta.shape() != [out]
                    || conv.running.mean.len() != out
                    || conv.running.var.len() != out
                {
                    return Err(Error::shape(format!("{layer} parameters have the wrong shape")));
                }
                channels = out;
            }
        }
        if it.next().is_some() {
            return Err(Error::shape("more conv layers than the config lists"));
        }
        Ok(Self { config, convs })
    }

    pub fn hidden_dim(&self) -> usize {
        self.config.hidden_dim()
    }

    pub fn input_width(&self) -> usize {
        self.config.input_width
    }

    /// Put the parameters on `tape`, as trainable leaves or as constants.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Vec<ConvVars> {
        let mut leaf = |t: &Tensor| {
            if trainable {
                tape.param(t.clone())
            } else {
                tape.constant(t.clone())
            }
        };
        self.convs
            .iter()
            .map(|c| ConvVars {
                kernel: leaf(&c.kernel),
                bias: leaf(&c.bias),
                gamma: leaf(&c.gamma),
                beta: leaf(&c.beta),
            })
            .collect()
    }

    fn check_width(&self, shape: &[usize]) -> Result<usize> {
        match *shape {
            [b, w] if w == self.config.input_width => Ok(b),
            [_, w] => Err(Error::shape(format!(
                "encoder expects width {}, got {w}",
                self.config.input_width
            ))),
            ref s => Err(Error::shape(format!("encoder input must be [batch, width], got {s:?}"))),
        }
    }

    /// Record the forward pass of `x: [batch, width]`. In train mode the
    /// per-layer batch statistics are returned for [`Self::absorb_stats`].
    pub fn forward(
        &self,
        tape: &mut Tape,
        vars: &[ConvVars],
        x: Var,
        mode: NormMode,
    ) -> Result<(Var, Vec<BatchStats>)> {
        let batch = self.check_width(tape.value(x).shape())?;
        let mut cur = tape.reshape(x, vec![batch, 1, self.config.input_width])?;
        let mut stats = Vec::new();
        let mut conv_iter = self.convs.iter().zip(vars);
        for layer in &self.config.layers {
            cur = match *layer {
                LayerSpec::Conv(_) => {
                    let (conv, v) = conv_iter.next().expect("validated layer count");
                    let y = tape.conv1d(cur, v.kernel, v.bias)?;
                    let (y, observed) =
                        tape.batchnorm1d(y, v.gamma, v.beta, mode, &conv.running, self.config.bn_eps)?;
                    stats.extend(observed);
                    tape.relu(y)
                }
                LayerSpec::MaxPool(w) => tape.maxpool1d(cur, w)?,
            };
        }
        Ok((tape.global_max_pool(cur)?, stats))
    }

    /// Fold train-mode batch statistics into the running averages.
    pub fn absorb_stats(&mut self, stats: &[BatchStats]) {
        for (conv, s) in self.convs.iter_mut().zip(stats) {
            conv.running.update(&s.mean, &s.var);
        }
    }

    /// Eval-mode encoding of `x: [batch, width]` into `[batch, hidden_dim]`.
    pub fn encode(&self, x: &Tensor) -> Result<Tensor> {
        let batch = self.check_width(x.shape())?;
        let mut cur = x.clone().reshape(vec![batch, 1, self.config.input_width])?;
        let mut convs = self.convs.iter();
        for layer in &self.config.layers {
            cur = match *layer {
                LayerSpec::Conv(_) => {
                    let conv = convs.next().expect("validated layer count");
                    let y = ops::conv1d(&cur, &conv.kernel, &conv.bias)?;
                    let mut running = conv.running.clone();
                    let y = ops::batchnorm1d(
                        &y,
                        &conv.gamma,
                        &conv.beta,
                        NormMode::Eval,
                        &mut running,
                        self.config.bn_eps,
                    )?;
                    ops::relu(&y)
                }
                LayerSpec::MaxPool(w) => ops::maxpool1d(&cur, w)?,
            };
        }
        ops::global_max_pool(&cur)
    }
}

impl Parameterized for EncoderBlock {
    fn params(&self) -> Vec<&Tensor> {
        self.convs
            .iter()
            .flat_map(|c| [&c.kernel, &c.bias, &c.gamma, &c.beta])
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.convs
            .iter_mut()
            .flat_map(|c| [&mut c.kernel, &mut c.bias, &mut c.gamma, &mut c.beta])
            .collect()
    }
}
