//! Reverse-mode differentiation over whole-tensor operations.
//!
//! Values are appended to a [`Tape`] in execution order, which is already a
//! topological order, so [`Tape::backward`] is a single reverse sweep.

use crate::error::{Error, Result};

use super::ops::{self, NormCache, NormMode, NtXentCache, RunningStats};
use super::tensor::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv1d {
        input: Var,
        kernel: Var,
        bias: Var,
    },
    MaxPool {
        input: Var,
        argmax: Vec<usize>,
    },
    GlobalMaxPool {
        input: Var,
        argmax: Vec<usize>,
    },
    BatchNorm {
        input: Var,
        gamma: Var,
        beta: Var,
        cache: NormCache,
    },
    Relu {
        input: Var,
    },
    Affine {
        input: Var,
        weight: Var,
        bias: Var,
    },
    SoftmaxCrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Vec<f64>,
    },
    Cosine {
        a: Var,
        b: Var,
    },
    NtXent {
        z: Var,
        cache: NtXentCache,
    },
    Sum {
        input: Var,
    },
    Dot {
        a: Var,
        b: Var,
    },
    Reshape {
        input: Var,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Batch statistics observed by a train-mode batchnorm node.
#[derive(Debug, Clone)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of one backward pass, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&[f64]> {
        self.grads.get(var.0).and_then(|g| g.as_deref())
    }

    pub fn take(&mut self, var: Var) -> Option<Vec<f64>> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Trainable input; gradients are reported for it.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// Input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    pub fn conv1d(&mut self, input: Var, kernel: Var, bias: Var) -> Result<Var> {
        let out = ops::conv1d(self.value(input), self.value(kernel), self.value(bias))?;
        Ok(self.push(out, Op::Conv1d { input, kernel, bias }, &[input, kernel, bias]))
    }

    pub fn maxpool1d(&mut self, input: Var, window: usize) -> Result<Var> {
        let (out, argmax) = ops::maxpool1d_indexed(self.value(input), window)?;
        Ok(self.push(out, Op::MaxPool { input, argmax }, &[input]))
    }

    pub fn global_max_pool(&mut self, input: Var) -> Result<Var> {
        let (out, argmax) = ops::global_max_pool_indexed(self.value(input))?;
        Ok(self.push(out, Op::GlobalMaxPool { input, argmax }, &[input]))
    }

    /// Records a batchnorm node. In train mode the returned statistics should
    /// be folded into the layer's running stats by the caller.
    pub fn batchnorm1d(
        &mut self,
        input: Var,
        gamma: Var,
        beta: Var,
        mode: NormMode,
        stats: &RunningStats,
        eps: f64,
    ) -> Result<(Var, Option<BatchStats>)> {
        let (out, cache) =
            ops::batchnorm_forward(self.value(input), self.value(gamma), self.value(beta), mode, stats, eps)?;
        let observed = (mode == NormMode::Train).then(|| BatchStats {
            mean: cache.batch_mean.clone(),
            var: cache.batch_var.clone(),
        });
        let var = self.push(
            out,
            Op::BatchNorm {
                input,
                gamma,
                beta,
                cache,
            },
            &[input, gamma, beta],
        );
        Ok((var, observed))
    }

    pub fn relu(&mut self, input: Var) -> Var {
        let out = ops::relu(self.value(input));
        self.push(out, Op::Relu { input }, &[input])
    }

    pub fn affine(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let out = ops::affine(self.value(input), self.value(weight), self.value(bias))?;
        Ok(self.push(out, Op::Affine { input, weight, bias }, &[input, weight, bias]))
    }

    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let (loss, probs) = ops::softmax_cross_entropy_forward(self.value(logits), labels)?;
        Ok(self.push(
            Tensor::scalar(loss),
            Op::SoftmaxCrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            &[logits],
        ))
    }

    pub fn cosine_similarity(&mut self, a: Var, b: Var) -> Result<Var> {
        let s = ops::cosine_similarity(self.value(a).data(), self.value(b).data())?;
        Ok(self.push(Tensor::scalar(s), Op::Cosine { a, b }, &[a, b]))
    }

    /// Symmetric normalized-temperature cross-entropy over `[2N, d]` rows.
    pub fn nt_xent(&mut self, z: Var, temperature: f64) -> Result<Var> {
        let (loss, cache) = ops::nt_xent_forward(self.value(z), temperature)?;
        Ok(self.push(Tensor::scalar(loss), Op::NtXent { z, cache }, &[z]))
    }

    pub fn sum(&mut self, input: Var) -> Var {
        let s = self.value(input).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum { input }, &[input])
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.len() != vb.len() {
            return Err(Error::shape(format!("dot of lengths {} and {}", va.len(), vb.len())));
        }
        let s = va.data().iter().zip(vb.data()).map(|(x, y)| x * y).sum();
        Ok(self.push(Tensor::scalar(s), Op::Dot { a, b }, &[a, b]))
    }

    pub fn reshape(&mut self, input: Var, shape: Vec<usize>) -> Result<Var> {
        let out = self.value(input).clone().reshape(shape)?;
        Ok(self.push(out, Op::Reshape { input }, &[input]))
    }

    /// Propagate d(loss)/d(node) back to every node that requires a gradient.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let loss_value = self.value(loss);
        if !loss_value.is_scalar() {
            return Err(Error::shape(format!(
                "backward needs a scalar loss, got shape {:?}",
                loss_value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            let mut send = |var: Var, delta: Vec<f64>| {
                if !self.nodes[var.0].requires_grad {
                    return;
                }
                match &mut grads[var.0] {
                    Some(acc) => acc.iter_mut().zip(&delta).for_each(|(a, d)| *a += d),
                    slot @ None => *slot = Some(delta),
                }
            };
            match &node.op {
                Op::Leaf => {
                    // Keep leaf gradients for the caller.
                    send(Var(idx), g);
                    continue;
                }
                Op::Conv1d { input, kernel, bias } => {
                    let (dx, dk, db) = ops::conv1d_backward(self.value(*input), self.value(*kernel), &g);
                    send(*input, dx);
                    send(*kernel, dk);
                    send(*bias, db);
                }
                Op::MaxPool { input, argmax } | Op::GlobalMaxPool { input, argmax } => {
                    send(*input, ops::scatter_backward(self.value(*input).len(), argmax, &g));
                }
                Op::BatchNorm {
                    input,
                    gamma,
                    beta,
                    cache,
                } => {
                    let (dx, dgamma, dbeta) =
                        ops::batchnorm_backward(self.value(*input).shape(), self.value(*gamma), cache, &g);
                    send(*input, dx);
                    send(*gamma, dgamma);
                    send(*beta, dbeta);
                }
                Op::Relu { input } => send(*input, ops::relu_backward(self.value(*input), &g)),
                Op::Affine { input, weight, bias } => {
                    let (dx, dw, db) = ops::affine_backward(self.value(*input), self.value(*weight), &g);
                    send(*input, dx);
                    send(*weight, dw);
                    send(*bias, db);
                }
                Op::SoftmaxCrossEntropy { logits, labels, probs } => {
                    let classes = self.value(*logits).shape()[1];
                    send(
                        *logits,
                        ops::softmax_cross_entropy_backward(probs, labels, classes, g[0]),
                    );
                }
                Op::Cosine { a, b } => {
                    let (da, db) = ops::cosine_similarity_backward(self.value(*a).data(), self.value(*b).data(), g[0]);
                    send(*a, da);
                    send(*b, db);
                }
                Op::NtXent { z, cache } => {
                    let dim = self.value(*z).shape()[1];
                    send(*z, ops::nt_xent_backward(cache, dim, g[0]));
                }
                Op::Sum { input } => {
                    send(*input, vec![g[0]; self.value(*input).len()]);
                }
                Op::Dot { a, b } => {
                    let ga = self.value(*b).data().iter().map(|v| v * g[0]).collect();
                    let gb = self.value(*a).data().iter().map(|v| v * g[0]).collect();
                    send(*a, ga);
                    send(*b, gb);
                }
                Op::Reshape { input } => send(*input, g),
            }
        }
        Ok(Gradients { grads })
    }
}
