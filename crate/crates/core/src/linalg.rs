//! Dense and normalization kernels shared by the band and recurrent modules.
//!
//! Every multiply-accumulate performed here is added to the caller's tally;
//! normalization, activations and bias additions are free.

use crate::error::{shape_err, Result};

/// Dot product with eight independent partial sums, reduced in a fixed order.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f32; 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let x = &a[c * 8..c * 8 + 8];
        let y = &b[c * 8..c * 8 + 8];
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = 0.0f32;
    for i in chunks * 8..a.len() {
        tail += a[i] * b[i];
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

/// Affine map `y = W x + b` with `W` stored row-major as `[out x in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Dense {
    pub fn new(in_dim: usize, out_dim: usize, weight: Vec<f32>, bias: Vec<f32>) -> Result<Self> {
        if weight.len() != in_dim * out_dim || bias.len() != out_dim {
            return Err(shape_err(format!(
                "dense {in_dim}->{out_dim} got weight {} and bias {}",
                weight.len(),
                bias.len()
            )));
        }
        Ok(Self {
            in_dim,
            out_dim,
            weight,
            bias,
        })
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    /// Applies the map to one position.
    pub fn apply_into(&self, x: &[f32], out: &mut [f32], macs: &mut u64) {
        debug_assert_eq!(x.len(), self.in_dim);
        debug_assert_eq!(out.len(), self.out_dim);
        for (o, (row, b)) in out
            .iter_mut()
            .zip(self.weight.chunks_exact(self.in_dim).zip(&self.bias))
        {
            *o = b + dot(row, x);
        }
        *macs += (self.in_dim * self.out_dim) as u64;
    }

    /// Applies the map to each of `x.len() / in_dim` consecutive positions.
    pub fn apply_rows(&self, x: &[f32], macs: &mut u64) -> Vec<f32> {
        let n = x.len() / self.in_dim;
        let mut out = vec![0.0; n * self.out_dim];
        for (xi, oi) in x
            .chunks_exact(self.in_dim)
            .zip(out.chunks_exact_mut(self.out_dim))
        {
            self.apply_into(xi, oi, macs);
        }
        out
    }
}

/// Layer normalization over the last axis with a learned scale and shift.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
    pub eps: f32,
}

pub const LAYER_NORM_EPS: f32 = 1e-5;

impl LayerNorm {
    pub fn new(gamma: Vec<f32>, beta: Vec<f32>) -> Result<Self> {
        if gamma.len() != beta.len() {
            return Err(shape_err("layer norm gamma and beta differ in length"));
        }
        Ok(Self {
            gamma,
            beta,
            eps: LAYER_NORM_EPS,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            gamma: vec![1.0; dim],
            beta: vec![0.0; dim],
            eps: LAYER_NORM_EPS,
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn apply_into(&self, x: &[f32], out: &mut [f32]) {
        let n = x.len() as f64;
        let mean = x.iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = x.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
        let inv = 1.0 / (var + self.eps as f64).sqrt();
        for (i, o) in out.iter_mut().enumerate() {
            *o = ((x[i] as f64 - mean) * inv) as f32 * self.gamma[i] + self.beta[i];
        }
    }

    pub fn apply_rows(&self, x: &[f32]) -> Vec<f32> {
        let d = self.dim();
        let mut out = vec![0.0; x.len()];
        for (xi, oi) in x.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
            self.apply_into(xi, oi);
        }
        out
    }
}
