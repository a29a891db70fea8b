use crate::error::{Error, Result};
use crate::numgrad::{ops, Tensor};

/// Pairwise cosine similarities of `2N` latent vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    size: usize,
    data: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn from_latents(z: &Tensor) -> Result<Self> {
        let (data, _, _) = ops::similarity_rows(z)?;
        Ok(Self {
            size: z.shape()[0],
            data,
        })
    }

    /// Build from raw entries, row-major `size × size`.
    pub fn from_entries(size: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != size * size {
            return Err(Error::shape(format!(
                "similarity matrix needs {} entries, got {}",
                size * size,
                data.len()
            )));
        }
        Ok(Self { size, data })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }
}

/// `−log[exp(s_ij/τ) / Σ_{k≠i} exp(s_ik/τ)]`.
pub fn pair_loss(i: usize, j: usize, s: &SimilarityMatrix, temperature: f64) -> Result<f64> {
    if i == j || i >= s.size() || j >= s.size() {
        return Err(Error::InvalidPair(i, j));
    }
    if !(temperature > 0.0) {
        return Err(Error::Config(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let scaled: Vec<f64> = (0..s.size())
        .filter(|&k| k != i)
        .map(|k| s.get(i, k) / temperature)
        .collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + scaled.iter().map(|a| (a - max).exp()).sum::<f64>().ln();
    Ok(lse - s.get(i, j) / temperature)
}

/// Mean of both directed pair losses over consecutive view pairs
/// `(0,1), (2,3), …` of `z: [2N, d]`.
pub fn batch_loss(z: &Tensor, temperature: f64) -> Result<f64> {
    ops::nt_xent(z, temperature)
}
