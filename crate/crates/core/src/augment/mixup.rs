use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::dsp::LogGTSegment;
use crate::error::{Error, Result};

/// Mixing weight and the two batch positions it combines.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixupPair {
    pub lambda: f64,
    pub i: usize,
    pub j: usize,
}

/// A `Beta(alpha, alpha)` draw.
pub fn sample_lambda<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::contract(format!("mixup alpha must be positive, got {alpha}")));
    }
    let beta = Beta::new(alpha, alpha).map_err(|e| Error::contract(e.to_string()))?;
    Ok(beta.sample(rng).clamp(0.0, 1.0))
}

/// Pairs every batch position `i` with a uniformly drawn partner `j` from the
/// same batch and a fresh lambda.
pub fn draw_pairs<R: Rng + ?Sized>(batch_len: usize, alpha: f64, rng: &mut R) -> Result<Vec<MixupPair>> {
    (0..batch_len)
        .map(|i| {
            let lambda = sample_lambda(alpha, rng)?;
            let j = rng.random_range(0..batch_len);
            Ok(MixupPair { lambda, i, j })
        })
        .collect()
}

fn blend(a: &[f32], b: &[f32], lambda: f64) -> Vec<f32> {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let v = (lambda * f64::from(x) + (1.0 - lambda) * f64::from(y)) as f32;
            v.clamp(x.min(y), x.max(y))
        })
        .collect()
}

/// `(λ·x_i + (1−λ)·x_j, λ·y_i + (1−λ)·y_j)`. At `λ ∈ {0, 1}` the matching
/// source is returned unchanged.
pub fn mixup(x_i: &[f32], y_i: &[f32], x_j: &[f32], y_j: &[f32], lambda: f64) -> Result<(Vec<f32>, Vec<f32>)> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::contract(format!("mixup lambda {lambda} outside [0, 1]")));
    }
    if x_i.len() != x_j.len() {
        return Err(Error::dim(format!("mixup features of length {} and {}", x_i.len(), x_j.len())));
    }
    if y_i.len() != y_j.len() {
        return Err(Error::dim(format!("mixup labels of length {} and {}", y_i.len(), y_j.len())));
    }
    if lambda == 1.0 {
        return Ok((x_i.to_vec(), y_i.to_vec()));
    }
    if lambda == 0.0 {
        return Ok((x_j.to_vec(), y_j.to_vec()));
    }
    Ok((blend(x_i, x_j, lambda), blend(y_i, y_j, lambda)))
}

/// [`mixup`] on two segments; the result keeps `x_i`'s identity fields.
pub fn mixup_segments(
    x_i: &LogGTSegment,
    y_i: &[f32],
    x_j: &LogGTSegment,
    y_j: &[f32],
    lambda: f64,
) -> Result<(LogGTSegment, Vec<f32>)> {
    let (values, label) = mixup(&x_i.values, y_i, &x_j.values, y_j, lambda)?;
    Ok((LogGTSegment { values, ..x_i.clone() }, label))
}
