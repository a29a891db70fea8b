use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numgrad::{ops, Tape, Tensor, Var};

use super::encoder::kaiming_uniform;
use super::Parameterized;

/// Dense layer `y = x·Wᵀ + b` with `W: [out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    pub fn init<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        Self {
            weight: kaiming_uniform(vec![out_dim, in_dim], in_dim, rng),
            bias: Tensor::zeros(vec![out_dim]),
        }
    }

    pub fn from_parts(weight: Tensor, bias: Tensor) -> Result<Self> {
        match *weight.shape() {
            [out, _] if bias.shape() == [out] => Ok(Self { weight, bias }),
            _ => Err(Error::shape(format!(
                "linear weight {:?} and bias {:?} disagree",
                weight.shape(),
                bias.shape()
            ))),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> (Var, Var) {
        if trainable {
            (tape.param(self.weight.clone()), tape.param(self.bias.clone()))
        } else {
            (tape.constant(self.weight.clone()), tape.constant(self.bias.clone()))
        }
    }

    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        ops::affine(x, &self.weight, &self.bias)
    }
}

impl Parameterized for Linear {
    fn params(&self) -> Vec<&Tensor> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// The projection `g(·)` from hidden to context space; no activation.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionHead {
    pub linear: Linear,
}

impl ProjectionHead {
    pub fn hidden_dim(&self) -> usize {
        self.linear.in_dim()
    }

    pub fn context_dim(&self) -> usize {
        self.linear.out_dim()
    }

    pub fn project(&self, h: &Tensor) -> Result<Tensor> {
        self.linear.apply(h)
    }
}

impl Parameterized for ProjectionHead {
    fn params(&self) -> Vec<&Tensor> {
        self.linear.params()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.linear.params_mut()
    }
}

/// Which encoder output feeds the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    /// `h`, the encoder output.
    #[default]
    Hidden,
    /// `z = g(h)`.
    Context,
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Representation::Hidden => "hidden",
            Representation::Context => "context",
        })
    }
}

impl FromStr for Representation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hidden" | "h" => Ok(Representation::Hidden),
            "context" | "z" => Ok(Representation::Context),
            other => Err(Error::Config(format!(
                "representation must be hidden or context, got {other:?}"
            ))),
        }
    }
}

/// Softmax classifier over a frozen representation.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationHead {
    pub linear: Linear,
    pub representation: Representation,
}

impl ClassificationHead {
    pub fn num_classes(&self) -> usize {
        self.linear.out_dim()
    }

    pub fn logits(&self, features: &Tensor) -> Result<Tensor> {
        self.linear.apply(features)
    }

    /// Arg-max class per row; ties go to the lowest index.
    pub fn predict(&self, features: &Tensor) -> Result<Vec<usize>> {
        let logits = self.logits(features)?;
        let k = self.num_classes();
        Ok(logits
            .data()
            .chunks(k)
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |best, (i, &v)| if v > best.1 { (i, v) } else { best },
                    )
                    .0
            })
            .collect())
    }
}

impl Parameterized for ClassificationHead {
    fn params(&self) -> Vec<&Tensor> {
        self.linear.params()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.linear.params_mut()
    }
}
