//! Dense numeric core: row-major tensors and a reverse-mode gradient tape.
//!
//! Only what the recurrent models need: rank-1 and rank-2 `f64` tensors,
//! a handful of differentiable ops, layer normalization and stable softmax.

mod tape;

pub use tape::{Gradients, Tape, Var};

use crate::error::{Error, Result};

/// Dense row-major tensor. Rank 1 (vector) and rank 2 (matrix) are the only
/// shapes the models use; the type does not enforce a maximum rank.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "shape/data length mismatch"
        );
        Tensor { shape, data }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        let n = data.len();
        Tensor::new(vec![n], data)
    }

    pub fn scalar(v: f64) -> Self {
        Tensor::new(vec![1], vec![v])
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len());
        Tensor::new(vec![rows, cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() on non-scalar tensor");
        self.data[0]
    }

    /// Number of rows for a matrix, 1 for a vector.
    pub fn rows(&self) -> usize {
        if self.shape.len() == 2 {
            self.shape[0]
        } else {
            1
        }
    }

    pub fn cols(&self) -> usize {
        *self.shape.last().unwrap_or(&0)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn check_finite(&self, what: &str) -> Result<()> {
        if self.all_finite() {
            Ok(())
        } else {
            Err(Error::Train(format!("non-finite values in {what}")))
        }
    }

    /// Euclidean norm of the flattened data.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Parameters of one layer-normalization site: learned gain and bias plus
/// the variance-stabilizing epsilon.
#[derive(Debug, Clone)]
pub struct LayerNormParams {
    pub gain: Vec<f64>,
    pub bias: Vec<f64>,
    pub eps: f64,
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

impl LayerNormParams {
    pub fn identity(dim: usize) -> Self {
        LayerNormParams {
            gain: vec![1.0; dim],
            bias: vec![0.0; dim],
            eps: LAYER_NORM_EPS,
        }
    }
}

/// `gain * (a - mean) / sqrt(var + eps) + bias` over the components of `a`.
pub fn layer_norm(a: &[f64], p: &LayerNormParams) -> Result<Vec<f64>> {
    if a.len() != p.gain.len() || a.len() != p.bias.len() {
        return Err(Error::DimMismatch(format!(
            "layer_norm: input dim {} vs params dim {}/{}",
            a.len(),
            p.gain.len(),
            p.bias.len()
        )));
    }
    let n = a.len() as f64;
    let mean = a.iter().sum::<f64>() / n;
    let var = a.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv_std = 1.0 / (var + p.eps).sqrt();
    Ok(a.iter()
        .zip(&p.gain)
        .zip(&p.bias)
        .map(|((x, g), b)| g * (x - mean) * inv_std + b)
        .collect())
}

/// y = W x for a (m x n) matrix and an n-vector.
pub fn matvec(w: &Tensor, x: &[f64]) -> Vec<f64> {
    let (m, n) = (w.shape()[0], w.shape()[1]);
    assert_eq!(n, x.len(), "matvec dimension mismatch");
    let mut out = vec![0.0; m];
    for i in 0..m {
        let row = &w.data[i * n..(i + 1) * n];
        let mut acc = 0.0;
        for j in 0..n {
            acc += row[j] * x[j];
        }
        out[i] = acc;
    }
    out
}

/// y = W^T x for a (m x n) matrix and an m-vector.
pub fn matvec_t(w: &Tensor, x: &[f64]) -> Vec<f64> {
    let (m, n) = (w.shape()[0], w.shape()[1]);
    assert_eq!(m, x.len(), "matvec_t dimension mismatch");
    let mut out = vec![0.0; n];
    for i in 0..m {
        let row = &w.data[i * n..(i + 1) * n];
        let xi = x[i];
        for j in 0..n {
            out[j] += row[j] * xi;
        }
    }
    out
}

/// Numerically stable softmax of a slice.
pub fn softmax_slice(a: &[f64]) -> Vec<f64> {
    let max = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = a.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|v| v / sum).collect()
}

/// Stable log-softmax of a slice.
pub fn log_softmax_slice(a: &[f64]) -> Vec<f64> {
    let max = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = a.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
    a.iter().map(|v| v - lse).collect()
}

/// log(mean_i exp(x_i)) computed stably.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = xs.iter().map(|v| (v - max).exp()).sum();
    max + (sum / xs.len() as f64).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_is_normalized_and_stable() {
        let p = softmax_slice(&[0.0, 0.0]);
        assert!((p[0] - 0.5).abs() < 1e-15);
        let p = softmax_slice(&[1000.0, 0.0]);
        assert!(p[0] > 0.999999 && p.iter().all(|v| v.is_finite()));
        let p = softmax_slice(&[1.0, 2.0, 3.0]);
        // direct evaluation: e^1, e^2, e^3 normalized
        let z = 1f64.exp() + 2f64.exp() + 3f64.exp();
        assert!((p[0] - 1f64.exp() / z).abs() < 1e-12);
        assert!((p[1] - 2f64.exp() / z).abs() < 1e-12);
        assert!((p[2] - 3f64.exp() / z).abs() < 1e-12);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matvec_agrees_with_transpose() {
        let w = Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(matvec(&w, &[1.0, 0.0, -1.0]), vec![-2.0, -2.0]);
        assert_eq!(matvec_t(&w, &[1.0, 1.0]), vec![5.0, 7.0, 9.0]);
    }

    #[test]
    fn log_mean_exp_handles_extremes() {
        let v = log_mean_exp(&[-1000.0, -1000.0]);
        assert!((v - (-1000.0)).abs() < 1e-9);
        assert_eq!(log_mean_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }

    #[test]
    fn layer_norm_constant_input_gives_zero() {
        let p = LayerNormParams::identity(3);
        let y = layer_norm(&[2.5, 2.5, 2.5], &p).unwrap();
        assert!(y.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn layer_norm_hand_case() {
        // a = [1, -1]: mean 0, var 1, so output approaches [1, -1] as eps -> 0
        let mut p = LayerNormParams::identity(2);
        p.eps = 1e-12;
        let y = layer_norm(&[1.0, -1.0], &p).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-6);
        assert!((y[1] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn layer_norm_zero_gain_returns_bias() {
        let p = LayerNormParams {
            gain: vec![0.0; 4],
            bias: vec![0.5, -0.5, 1.0, 2.0],
            eps: LAYER_NORM_EPS,
        };
        let y = layer_norm(&[3.0, 1.0, 4.0, 1.0], &p).unwrap();
        assert_eq!(y, vec![0.5, -0.5, 1.0, 2.0]);
    }

    #[test]
    fn layer_norm_rejects_dim_mismatch() {
        let p = LayerNormParams::identity(3);
        assert!(layer_norm(&[1.0, 2.0], &p).is_err());
    }

    #[test]
    fn layer_norm_normalizes_mean_and_variance() {
        let p = LayerNormParams::identity(5);
        let y = layer_norm(&[0.3, -1.2, 2.0, 0.1, 0.9], &p).unwrap();
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        assert!(mean.abs() <= 1e-10);
        assert!((var - 1.0).abs() < 1e-4);
    }
}
