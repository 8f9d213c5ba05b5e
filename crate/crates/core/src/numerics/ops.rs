//! Plain (untaped) dense operations.

use super::Tensor;
use crate::error::{Error, Result};

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

/// `log(sigmoid(x))` without overflow.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape("dot", format!("{} vs {}", a.len(), b.len())));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

/// `m x` for a row-major `[rows, cols]` matrix.
pub fn matvec(m: &Tensor, x: &[f64]) -> Result<Vec<f64>> {
    if m.rank() != 2 || m.shape()[1] != x.len() {
        return Err(Error::shape(
            "matvec",
            format!("matrix {:?} times vector of length {}", m.shape(), x.len()),
        ));
    }
    Ok((0..m.rows()).map(|i| m.row(i).iter().zip(x).map(|(a, b)| a * b).sum()).collect())
}

pub fn concat(parts: &[&[f64]]) -> Vec<f64> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

/// `y + alpha * x`.
pub fn scale_add(y: &[f64], alpha: f64, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::shape("scale_add", format!("{} vs {}", y.len(), x.len())));
    }
    Ok(y.iter().zip(x).map(|(a, b)| a + alpha * b).collect())
}

/// Softmax of an arbitrary-length list; empty in, empty out.
pub fn softmax_over_list(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|&x| (x - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}
