//! Forward and backward kernels for the layer and loss primitives.
//!
//! Layout conventions: sequence tensors are `[batch, channels, width]`,
//! matrices are `[rows, cols]`. The `*_backward` functions take the upstream
//! gradient and whatever the forward pass cached, and return gradients for
//! every input in declaration order.

use crate::error::{Error, Result};

use super::tensor::Tensor;

/// Spatial extent of every convolution kernel.
pub const KERNEL_WIDTH: usize = 2;

fn dims3(t: &Tensor, what: &str) -> Result<(usize, usize, usize)> {
    match *t.shape() {
        [b, c, w] => Ok((b, c, w)),
        ref s => Err(Error::shape(format!("{what} must be [batch, ch, width], got {s:?}"))),
    }
}

fn dims2(t: &Tensor, what: &str) -> Result<(usize, usize)> {
    match *t.shape() {
        [r, c] => Ok((r, c)),
        ref s => Err(Error::shape(format!("{what} must be 2-D, got {s:?}"))),
    }
}

// ---------------------------------------------------------------- conv1d

pub fn conv1d(input: &Tensor, kernel: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (batch, in_ch, width) = dims3(input, "conv1d input")?;
    let (out_ch, k_in, k_w) = dims3(kernel, "conv1d kernel")?;
    if k_w != KERNEL_WIDTH {
        return Err(Error::shape(format!("kernel width must be 2, got {k_w}")));
    }
    if k_in != in_ch {
        return Err(Error::shape(format!(
            "conv1d channel mismatch: input has {in_ch}, kernel expects {k_in}"
        )));
    }
    if bias.shape() != [out_ch] {
        return Err(Error::shape(format!(
            "conv1d bias must be [{out_ch}], got {:?}",
            bias.shape()
        )));
    }
    if width < KERNEL_WIDTH {
        return Err(Error::shape(format!("conv1d needs width >= 2, got {width}")));
    }
    let out_w = width - 1;
    let x = input.data();
    let k = kernel.data();
    let mut out = vec![0.0; batch * out_ch * out_w];
    for b in 0..batch {
        for o in 0..out_ch {
            let dst = &mut out[(b * out_ch + o) * out_w..][..out_w];
            dst.fill(bias.data()[o]);
            for i in 0..in_ch {
                let k0 = k[(o * in_ch + i) * 2];
                let k1 = k[(o * in_ch + i) * 2 + 1];
                let src = &x[(b * in_ch + i) * width..][..width];
                for (t, d) in dst.iter_mut().enumerate() {
                    *d += k0 * src[t] + k1 * src[t + 1];
                }
            }
        }
    }
    Tensor::new(vec![batch, out_ch, out_w], out)
}

pub fn conv1d_backward(input: &Tensor, kernel: &Tensor, grad_out: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let [batch, in_ch, width] = *input.shape() else {
        unreachable!("validated in forward")
    };
    let out_ch = kernel.shape()[0];
    let out_w = width - 1;
    let x = input.data();
    let k = kernel.data();
    let mut dx = vec![0.0; x.len()];
    let mut dk = vec![0.0; k.len()];
    let mut db = vec![0.0; out_ch];
    for b in 0..batch {
        for o in 0..out_ch {
            let g = &grad_out[(b * out_ch + o) * out_w..][..out_w];
            db[o] += g.iter().sum::<f64>();
            for i in 0..in_ch {
                let base = (o * in_ch + i) * 2;
                let (k0, k1) = (k[base], k[base + 1]);
                let src = &x[(b * in_ch + i) * width..][..width];
                let dst = &mut dx[(b * in_ch + i) * width..][..width];
                let mut acc0 = 0.0;
                let mut acc1 = 0.0;
                for (t, &gt) in g.iter().enumerate() {
                    acc0 += gt * src[t];
                    acc1 += gt * src[t + 1];
                    dst[t] += k0 * gt;
                    dst[t + 1] += k1 * gt;
                }
                dk[base] += acc0;
                dk[base + 1] += acc1;
            }
        }
    }
    (dx, dk, db)
}

// ---------------------------------------------------------------- pooling

/// Non-overlapping max pool; trailing positions that do not fill a window
/// are dropped.
pub fn maxpool1d(input: &Tensor, window: usize) -> Result<Tensor> {
    maxpool1d_indexed(input, window).map(|(t, _)| t)
}

pub(crate) fn maxpool1d_indexed(input: &Tensor, window: usize) -> Result<(Tensor, Vec<usize>)> {
    let (batch, ch, width) = dims3(input, "maxpool1d input")?;
    if window == 0 {
        return Err(Error::shape("pool window must be positive"));
    }
    if window > width {
        return Err(Error::shape(format!("pool window {window} exceeds width {width}")));
    }
    let out_w = width / window;
    let x = input.data();
    let mut out = Vec::with_capacity(batch * ch * out_w);
    let mut argmax = Vec::with_capacity(batch * ch * out_w);
    for row in 0..batch * ch {
        let src = &x[row * width..][..width];
        for t in 0..out_w {
            let start = t * window;
            let mut best = start;
            for p in start + 1..start + window {
                if src[p] > src[best] {
                    best = p;
                }
            }
            out.push(src[best]);
            argmax.push(row * width + best);
        }
    }
    Ok((Tensor::new(vec![batch, ch, out_w], out)?, argmax))
}

/// Max over the whole spatial axis: `[batch, ch, width] -> [batch, ch]`.
pub fn global_max_pool(input: &Tensor) -> Result<Tensor> {
    global_max_pool_indexed(input).map(|(t, _)| t)
}

pub(crate) fn global_max_pool_indexed(input: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    let (batch, ch, width) = dims3(input, "global pool input")?;
    let (pooled, idx) = maxpool1d_indexed(input, width)?;
    Ok((pooled.reshape(vec![batch, ch])?, idx))
}

pub fn scatter_backward(input_len: usize, argmax: &[usize], grad_out: &[f64]) -> Vec<f64> {
    let mut dx = vec![0.0; input_len];
    for (&src, &g) in argmax.iter().zip(grad_out) {
        dx[src] += g;
    }
    dx
}

// ---------------------------------------------------------------- batchnorm

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    Train,
    Eval,
}

/// Per-channel running mean/variance tracked by exponential moving average.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub momentum: f64,
}

impl RunningStats {
    pub fn new(channels: usize, momentum: f64) -> Self {
        Self {
            mean: vec![0.0; channels],
            var: vec![1.0; channels],
            momentum,
        }
    }

    /// Fold in one batch; `var` is the unbiased batch variance.
    pub fn update(&mut self, mean: &[f64], var: &[f64]) {
        let m = self.momentum;
        for (r, &b) in self.mean.iter_mut().zip(mean) {
            *r = (1.0 - m) * *r + m * b;
        }
        for (r, &b) in self.var.iter_mut().zip(var) {
            *r = (1.0 - m) * *r + m * b;
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct NormCache {
    pub xhat: Vec<f64>,
    pub inv_std: Vec<f64>,
    pub mode: NormMode,
    /// Batch mean and unbiased variance (train mode only).
    pub batch_mean: Vec<f64>,
    pub batch_var: Vec<f64>,
}

pub(crate) fn batchnorm_forward(
    input: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    mode: NormMode,
    stats: &RunningStats,
    eps: f64,
) -> Result<(Tensor, NormCache)> {
    let (batch, ch, width) = dims3(input, "batchnorm input")?;
    if gamma.shape() != [ch] || beta.shape() != [ch] {
        return Err(Error::shape(format!(
            "batchnorm affine params must be [{ch}], got {:?} / {:?}",
            gamma.shape(),
            beta.shape()
        )));
    }
    if stats.mean.len() != ch || stats.var.len() != ch {
        return Err(Error::shape("running statistics channel mismatch"));
    }
    let count = batch * width;
    if count == 0 {
        return Err(Error::shape("batchnorm over zero elements per channel"));
    }
    if mode == NormMode::Train && count < 2 {
        return Err(Error::shape(
            "train-mode batchnorm needs at least 2 elements per channel",
        ));
    }
    let x = input.data();
    let (mean, biased_var, unbiased_var) = match mode {
        NormMode::Train => {
            let mut mean = vec![0.0; ch];
            let mut var = vec![0.0; ch];
            for c in 0..ch {
                let mut s = 0.0;
                for b in 0..batch {
                    s += x[(b * ch + c) * width..][..width].iter().sum::<f64>();
                }
                let mu = s / count as f64;
                let mut ss = 0.0;
                for b in 0..batch {
                    for &v in &x[(b * ch + c) * width..][..width] {
                        ss += (v - mu) * (v - mu);
                    }
                }
                mean[c] = mu;
                var[c] = ss / count as f64;
            }
            let unbiased = var.iter().map(|v| v * count as f64 / (count - 1) as f64).collect();
            (mean, var, unbiased)
        }
        NormMode::Eval => (stats.mean.clone(), stats.var.clone(), Vec::new()),
    };
    let inv_std: Vec<f64> = biased_var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
    let mut xhat = vec![0.0; x.len()];
    let mut out = vec![0.0; x.len()];
    for b in 0..batch {
        for c in 0..ch {
            let off = (b * ch + c) * width;
            let (g, be) = (gamma.data()[c], beta.data()[c]);
            for t in 0..width {
                let xh = (x[off + t] - mean[c]) * inv_std[c];
                xhat[off + t] = xh;
                out[off + t] = g * xh + be;
            }
        }
    }
    let cache = NormCache {
        xhat,
        inv_std,
        mode,
        batch_mean: if mode == NormMode::Train { mean } else { Vec::new() },
        batch_var: unbiased_var,
    };
    Ok((Tensor::new(input.shape().to_vec(), out)?, cache))
}

/// Batch normalisation over the batch and spatial axes of `[batch, ch, width]`.
/// In train mode `stats` absorbs the batch statistics; in eval mode it
/// supplies them.
pub fn batchnorm1d(
    input: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    mode: NormMode,
    stats: &mut RunningStats,
    eps: f64,
) -> Result<Tensor> {
    let (out, cache) = batchnorm_forward(input, gamma, beta, mode, stats, eps)?;
    if mode == NormMode::Train {
        stats.update(&cache.batch_mean, &cache.batch_var);
    }
    Ok(out)
}

pub(crate) fn batchnorm_backward(
    shape: &[usize],
    gamma: &Tensor,
    cache: &NormCache,
    grad_out: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let [batch, ch, width] = *shape else {
        unreachable!("validated in forward")
    };
    let count = (batch * width) as f64;
    let mut dgamma = vec![0.0; ch];
    let mut dbeta = vec![0.0; ch];
    for b in 0..batch {
        for c in 0..ch {
            let off = (b * ch + c) * width;
            for t in 0..width {
                dgamma[c] += grad_out[off + t] * cache.xhat[off + t];
                dbeta[c] += grad_out[off + t];
            }
        }
    }
    let mut dx = vec![0.0; grad_out.len()];
    for c in 0..ch {
        let g = gamma.data()[c];
        let inv = cache.inv_std[c];
        match cache.mode {
            NormMode::Eval => {
                for b in 0..batch {
                    let off = (b * ch + c) * width;
                    for t in 0..width {
                        dx[off + t] = grad_out[off + t] * g * inv;
                    }
                }
            }
            NormMode::Train => {
                // dxhat = dy * gamma; sums over the channel's elements.
                let sum_dxhat = dbeta[c] * g;
                let sum_dxhat_xhat = dgamma[c] * g;
                for b in 0..batch {
                    let off = (b * ch + c) * width;
                    for t in 0..width {
                        let dxhat = grad_out[off + t] * g;
                        dx[off + t] = inv / count * (count * dxhat - sum_dxhat - cache.xhat[off + t] * sum_dxhat_xhat);
                    }
                }
            }
        }
    }
    (dx, dgamma, dbeta)
}

// ---------------------------------------------------------------- relu

pub fn relu(input: &Tensor) -> Tensor {
    let data = input.data().iter().map(|&v| v.max(0.0)).collect();
    Tensor::new(input.shape().to_vec(), data).expect("same shape")
}

pub fn relu_backward(input: &Tensor, grad_out: &[f64]) -> Vec<f64> {
    input
        .data()
        .iter()
        .zip(grad_out)
        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
        .collect()
}

// ---------------------------------------------------------------- affine

/// `out = input · weightᵀ + bias`
pub fn affine(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (batch, in_dim) = dims2(input, "affine input")?;
    let (out_dim, w_in) = dims2(weight, "affine weight")?;
    if w_in != in_dim {
        return Err(Error::shape(format!("affine expects input dim {w_in}, got {in_dim}")));
    }
    if bias.shape() != [out_dim] {
        return Err(Error::shape(format!(
            "affine bias must be [{out_dim}], got {:?}",
            bias.shape()
        )));
    }
    let x = input.data();
    let w = weight.data();
    let mut out = Vec::with_capacity(batch * out_dim);
    for b in 0..batch {
        let row = &x[b * in_dim..][..in_dim];
        for o in 0..out_dim {
            let wr = &w[o * in_dim..][..in_dim];
            let dot: f64 = row.iter().zip(wr).map(|(a, b)| a * b).sum();
            out.push(dot + bias.data()[o]);
        }
    }
    Tensor::new(vec![batch, out_dim], out)
}

pub fn affine_backward(input: &Tensor, weight: &Tensor, grad_out: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let [batch, in_dim] = *input.shape() else {
        unreachable!("validated in forward")
    };
    let out_dim = weight.shape()[0];
    let x = input.data();
    let w = weight.data();
    let mut dx = vec![0.0; x.len()];
    let mut dw = vec![0.0; w.len()];
    let mut db = vec![0.0; out_dim];
    for b in 0..batch {
        let row = &x[b * in_dim..][..in_dim];
        let drow = &mut dx[b * in_dim..][..in_dim];
        for o in 0..out_dim {
            let g = grad_out[b * out_dim + o];
            if g == 0.0 {
                continue;
            }
            db[o] += g;
            let wr = &w[o * in_dim..][..in_dim];
            let dwr = &mut dw[o * in_dim..][..in_dim];
            for j in 0..in_dim {
                drow[j] += g * wr[j];
                dwr[j] += g * row[j];
            }
        }
    }
    (dx, dw, db)
}

// ---------------------------------------------------------------- losses

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Mean negative log-likelihood of `labels` under row-wise softmax of
/// `logits`. Returns the loss and the softmax probabilities.
pub(crate) fn softmax_cross_entropy_forward(logits: &Tensor, labels: &[usize]) -> Result<(f64, Vec<f64>)> {
    let (batch, classes) = dims2(logits, "logits")?;
    if labels.len() != batch {
        return Err(Error::shape(format!("{} labels for a batch of {batch}", labels.len())));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::InvalidLabel { label, classes });
    }
    let mut probs = Vec::with_capacity(logits.len());
    let mut total = 0.0;
    for (b, &label) in labels.iter().enumerate() {
        let row = &logits.data()[b * classes..][..classes];
        let lse = log_sum_exp(row.iter().copied());
        total += lse - row[label];
        probs.extend(row.iter().map(|v| (v - lse).exp()));
    }
    Ok((total / batch as f64, probs))
}

pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<f64> {
    softmax_cross_entropy_forward(logits, labels).map(|(l, _)| l)
}

pub fn softmax_cross_entropy_backward(probs: &[f64], labels: &[usize], classes: usize, grad_out: f64) -> Vec<f64> {
    let batch = labels.len() as f64;
    let mut dx = probs.to_vec();
    for (b, &label) in labels.iter().enumerate() {
        dx[b * classes + label] -= 1.0;
    }
    dx.iter_mut().for_each(|v| *v *= grad_out / batch);
    dx
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(format!(
            "cosine similarity of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (l2_norm(a), l2_norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::DegenerateVector);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Gradients of `cos(a, b)` with respect to `a` and `b`.
pub fn cosine_similarity_backward(a: &[f64], b: &[f64], grad_out: f64) -> (Vec<f64>, Vec<f64>) {
    let (na, nb) = (l2_norm(a), l2_norm(b));
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let cos = dot / (na * nb);
    let da = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| grad_out * (y / (na * nb) - cos * x / (na * na)))
        .collect();
    let db = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| grad_out * (x / (na * nb) - cos * y / (nb * nb)))
        .collect();
    (da, db)
}

/// Cached state of the normalized-temperature cross-entropy forward pass.
#[derive(Debug, Clone)]
pub(crate) struct NtXentCache {
    /// Row-normalised latent vectors, `[2N, d]`.
    pub unit: Vec<f64>,
    pub norms: Vec<f64>,
    /// Softmax over `k != i` of `s_ik / τ`, diagonal zero, `[2N, 2N]`.
    pub probs: Vec<f64>,
    pub temperature: f64,
}

/// Index of the positive partner of row `i` (0-based layout `(2k, 2k+1)`).
pub fn positive_of(i: usize) -> usize {
    i ^ 1
}

/// Pairwise cosine similarities of the rows of `z`.
pub fn similarity_rows(z: &Tensor) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let (rows, dim) = dims2(z, "latent batch")?;
    let mut norms = Vec::with_capacity(rows);
    let mut unit = Vec::with_capacity(z.len());
    for r in 0..rows {
        let row = &z.data()[r * dim..][..dim];
        let n = l2_norm(row);
        if n == 0.0 {
            return Err(Error::DegenerateVector);
        }
        norms.push(n);
        unit.extend(row.iter().map(|v| v / n));
    }
    let mut sim = vec![0.0; rows * rows];
    for i in 0..rows {
        let ui = &unit[i * dim..][..dim];
        for j in i..rows {
            let uj = &unit[j * dim..][..dim];
            let s = ui.iter().zip(uj).map(|(a, b)| a * b).sum::<f64>().clamp(-1.0, 1.0);
            sim[i * rows + j] = s;
            sim[j * rows + i] = s;
        }
    }
    Ok((sim, unit, norms))
}

/// Symmetric contrastive loss over `2N` latent rows laid out as consecutive
/// positive pairs: `(1/2N) Σ_i [logsumexp_{k≠i}(s_ik/τ) − s_i,p(i)/τ]`.
pub(crate) fn nt_xent_forward(z: &Tensor, temperature: f64) -> Result<(f64, NtXentCache)> {
    if !(temperature > 0.0) {
        return Err(Error::Config(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let (rows, _) = dims2(z, "latent batch")?;
    if rows % 2 != 0 || rows == 0 {
        return Err(Error::InvalidBatch(format!(
            "expected an even, non-zero number of views, got {rows}"
        )));
    }
    let (sim, unit, norms) = similarity_rows(z)?;
    let mut probs = vec![0.0; rows * rows];
    let mut total = 0.0;
    for i in 0..rows {
        let scaled = (0..rows).filter(|&k| k != i).map(|k| sim[i * rows + k] / temperature);
        let max = scaled.clone().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = scaled.map(|a| (a - max).exp()).sum();
        let lse = max + sum.ln();
        total += lse - sim[i * rows + positive_of(i)] / temperature;
        for k in (0..rows).filter(|&k| k != i) {
            probs[i * rows + k] = (sim[i * rows + k] / temperature - lse).exp();
        }
    }
    let loss = total / rows as f64;
    Ok((
        loss,
        NtXentCache {
            unit,
            norms,
            probs,
            temperature,
        },
    ))
}

pub(crate) fn nt_xent_backward(cache: &NtXentCache, dim: usize, grad_out: f64) -> Vec<f64> {
    let rows = cache.norms.len();
    let scale = grad_out / (rows as f64 * cache.temperature);
    // dL/ds_ik for the anchor-i row; s is symmetric so both orientations feed u.
    let mut g = cache.probs.clone();
    for i in 0..rows {
        g[i * rows + positive_of(i)] -= 1.0;
    }
    let mut du = vec![0.0; rows * dim];
    for i in 0..rows {
        let dst = &mut du[i * dim..][..dim];
        for k in 0..rows {
            let w = scale * (g[i * rows + k] + g[k * rows + i]);
            if w == 0.0 {
                continue;
            }
            let uk = &cache.unit[k * dim..][..dim];
            for (d, &u) in dst.iter_mut().zip(uk) {
                *d += w * u;
            }
        }
    }
    let mut dz = vec![0.0; rows * dim];
    for i in 0..rows {
        let ui = &cache.unit[i * dim..][..dim];
        let gi = &du[i * dim..][..dim];
        let proj: f64 = ui.iter().zip(gi).map(|(a, b)| a * b).sum();
        for j in 0..dim {
            dz[i * dim + j] = (gi[j] - ui[j] * proj) / cache.norms[i];
        }
    }
    dz
}

pub fn nt_xent(z: &Tensor, temperature: f64) -> Result<f64> {
    nt_xent_forward(z, temperature).map(|(l, _)| l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn seq(data: &[f64]) -> Tensor {
        Tensor::new(vec![1, 1, data.len()], data.to_vec()).unwrap()
    }

    #[test]
    fn conv1d_examples() {
        let bias0 = Tensor::vector(vec![0.0]);
        let k = Tensor::new(vec![1, 1, 2], vec![1.0, 1.0]).unwrap();
        let out = conv1d(&seq(&[1.0, 2.0, 3.0]), &k, &bias0).unwrap();
        assert_eq!(out.data(), &[3.0, 5.0]);

        let k = Tensor::new(vec![1, 1, 2], vec![1.0, 0.0]).unwrap();
        let out = conv1d(&seq(&[5.0, 7.0, 9.0]), &k, &bias0).unwrap();
        assert_eq!(out.data(), &[5.0, 7.0]);

        let k = Tensor::new(vec![1, 1, 2], vec![0.0, 0.0]).unwrap();
        let out = conv1d(&seq(&[1.0; 4]), &k, &Tensor::vector(vec![2.5])).unwrap();
        assert_eq!(out.data(), &[2.5, 2.5, 2.5]);
    }

    #[test]
    fn conv1d_errors() {
        let k = Tensor::new(vec![1, 1, 2], vec![1.0, 1.0]).unwrap();
        let b = Tensor::vector(vec![0.0]);
        assert!(matches!(conv1d(&seq(&[1.0]), &k, &b), Err(Error::InvalidShape(_))));
        let x = Tensor::new(vec![1, 2, 3], vec![0.0; 6]).unwrap();
        assert!(matches!(conv1d(&x, &k, &b), Err(Error::InvalidShape(_))));
    }

    #[test]
    fn maxpool_examples() {
        let out = maxpool1d(&seq(&[1.0, 5.0, 2.0, 4.0, 3.0, 9.0]), 3).unwrap();
        assert_eq!(out.data(), &[5.0, 9.0]);
        let x = seq(&[3.0, -1.0, 4.0]);
        assert_eq!(maxpool1d(&x, 1).unwrap(), x);
        let out = maxpool1d(&seq(&[1.0, 2.0, 3.0, 4.0, 5.0]), 2).unwrap();
        assert_eq!(out.data(), &[2.0, 4.0]);
        assert!(maxpool1d(&seq(&[1.0, 2.0]), 3).is_err());
    }

    #[test]
    fn batchnorm_constant_input_yields_beta() {
        let x = Tensor::filled(vec![3, 2, 4], 7.5);
        let gamma = Tensor::vector(vec![3.0, -2.0]);
        let beta = Tensor::vector(vec![0.25, -1.5]);
        let mut stats = RunningStats::new(2, 0.1);
        let out = batchnorm1d(&x, &gamma, &beta, NormMode::Train, &mut stats, 1e-5).unwrap();
        for b in 0..3 {
            for t in 0..4 {
                assert_eq!(out.data()[(b * 2) * 4 + t], 0.25);
                assert_eq!(out.data()[(b * 2 + 1) * 4 + t], -1.5);
            }
        }
    }

    #[test]
    fn batchnorm_standardises_pair() {
        let eps = 1e-5;
        let x = Tensor::new(vec![2, 1, 1], vec![-1.0, 1.0]).unwrap();
        let one = Tensor::vector(vec![1.0]);
        let zero = Tensor::vector(vec![0.0]);
        let mut stats = RunningStats::new(1, 0.1);
        let out = batchnorm1d(&x, &one, &zero, NormMode::Train, &mut stats, eps).unwrap();
        let expected = 1.0 / (1.0 + eps).sqrt();
        assert_relative_eq!(out.data()[0], -expected, epsilon = 1e-15);
        assert_relative_eq!(out.data()[1], expected, epsilon = 1e-15);
        // unbiased variance of (-1, 1) is 2
        assert_relative_eq!(stats.mean[0], 0.0);
        assert_relative_eq!(stats.var[0], 0.9 + 0.1 * 2.0, epsilon = 1e-15);
    }

    #[test]
    fn batchnorm_eval_uses_running_stats() {
        let x = Tensor::new(vec![1, 1, 1], vec![3.0]).unwrap();
        let mut stats = RunningStats::new(1, 0.1);
        let before = stats.clone();
        let out = batchnorm1d(
            &x,
            &Tensor::vector(vec![2.0]),
            &Tensor::vector(vec![1.0]),
            NormMode::Eval,
            &mut stats,
            1e-5,
        )
        .unwrap();
        assert_relative_eq!(out.item(), 2.0 * 3.0 / (1.0f64 + 1e-5).sqrt() + 1.0, epsilon = 1e-12);
        assert_relative_eq!(out.item(), 7.0, epsilon = 1e-4);
        assert_eq!(stats, before);
    }

    #[test]
    fn batchnorm_train_rejects_single_element() {
        let x = Tensor::new(vec![1, 1, 1], vec![3.0]).unwrap();
        let mut stats = RunningStats::new(1, 0.1);
        let v = Tensor::vector(vec![1.0]);
        assert!(batchnorm1d(&x, &v, &v, NormMode::Train, &mut stats, 1e-5).is_err());
    }

    #[test]
    fn relu_examples() {
        let out = relu(&Tensor::vector(vec![-1.0, 0.0, 2.0]));
        assert_eq!(out.data(), &[0.0, 0.0, 2.0]);
        let pos = Tensor::vector(vec![0.5, 3.0]);
        assert_eq!(relu(&pos), pos);
        assert_eq!(relu(&Tensor::vector(vec![-4.0, -0.1])).data(), &[0.0, 0.0]);
    }

    #[test]
    fn affine_examples() {
        let x = Tensor::new(vec![1, 2], vec![1.0, 2.0]).unwrap();
        let w = Tensor::new(vec![2, 2], vec![1.0, 1.0, 1.0, -1.0]).unwrap();
        let out = affine(&x, &w, &Tensor::vector(vec![0.0, 0.0])).unwrap();
        assert_eq!(out.data(), &[3.0, -1.0]);

        let eye = Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(
            affine(&x, &eye, &Tensor::vector(vec![0.0, 0.0])).unwrap().data(),
            x.data()
        );

        let zeros = Tensor::zeros(vec![3, 2]);
        let b = Tensor::vector(vec![1.0, -2.0, 0.5]);
        assert_eq!(affine(&x, &zeros, &b).unwrap().data(), b.data());

        assert!(affine(&x, &Tensor::zeros(vec![2, 3]), &b).is_err());
    }

    #[test]
    fn cross_entropy_examples() {
        let uniform = Tensor::new(vec![1, 4], vec![0.3; 4]).unwrap();
        assert_relative_eq!(
            softmax_cross_entropy(&uniform, &[2]).unwrap(),
            4f64.ln(),
            epsilon = 1e-12
        );
        let saturated = Tensor::new(vec![1, 2], vec![1000.0, -1000.0]).unwrap();
        let l = softmax_cross_entropy(&saturated, &[0]).unwrap();
        assert!(l.is_finite() && l.abs() < 1e-12);

        let logits = Tensor::new(vec![1, 3], vec![1.0, 2.0, 3.0]).unwrap();
        let direct = -(3f64.exp() / (1f64.exp() + 2f64.exp() + 3f64.exp())).ln();
        assert_relative_eq!(softmax_cross_entropy(&logits, &[2]).unwrap(), direct, epsilon = 1e-12);
        assert_relative_eq!(direct, 0.4076, epsilon = 1e-4);

        assert!(matches!(
            softmax_cross_entropy(&logits, &[3]),
            Err(Error::InvalidLabel { label: 3, classes: 3 })
        ));
    }

    #[test]
    fn cosine_examples() {
        let a = [0.3, -1.2, 2.0];
        assert_relative_eq!(cosine_similarity(&a, &a).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 2.0]).unwrap(), 0.0);
        assert_relative_eq!(
            cosine_similarity(&[1.0, 0.0], &[1.0, 1.0]).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-15
        );
        assert!(matches!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 1.0]),
            Err(Error::DegenerateVector)
        ));
    }
}
