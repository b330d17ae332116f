use crate::autodiff::tensor::{Scalar, Tensor};
use crate::autodiff::Mode;
use crate::error::{Error, Result};

pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

/// Learnable scale/shift plus running statistics of one batch-norm layer.
/// The channel axis is the last axis of the normalized input.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormState<T: Scalar = f32> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub epsilon: f64,
    pub momentum: f64,
}

impl<T: Scalar> BatchNormState<T> {
    /// gamma = 1, beta = 0, running mean 0 and variance 1.
    pub fn new(channels: usize) -> Self {
        BatchNormState {
            gamma: Tensor::full(&[channels], T::one()),
            beta: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], T::one()),
            epsilon: BN_EPSILON,
            momentum: BN_MOMENTUM,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// `running ← momentum·running + (1 − momentum)·batch`.
    pub fn update_running(&mut self, stats: &BatchStats<T>) {
        update_running(
            self.running_mean.data_mut(),
            self.running_var.data_mut(),
            stats,
            self.momentum,
        );
    }
}

pub fn update_running<T: Scalar>(mean: &mut [T], var: &mut [T], stats: &BatchStats<T>, momentum: f64) {
    let m = T::lit(momentum);
    let one_m = T::one() - m;
    for (r, &b) in mean.iter_mut().zip(&stats.mean) {
        *r = m * *r + one_m * b;
    }
    for (r, &b) in var.iter_mut().zip(&stats.var) {
        *r = (m * *r + one_m * b).max(T::zero());
    }
}

/// Per-channel statistics of one training batch (biased variance).
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

#[derive(Clone, Debug)]
pub(crate) struct BnCache<T> {
    pub xhat: Vec<T>,
    pub inv_std: Vec<T>,
    pub mode: Mode,
}

pub(crate) fn check_channels(shape: &[usize], gamma: &[usize], beta: &[usize]) -> Result<usize> {
    let c = *shape
        .last()
        .ok_or_else(|| Error::dim("batchnorm input must have a channel axis"))?;
    if gamma != [c] || beta != [c] {
        return Err(Error::dim(format!(
            "batchnorm over {c} channels got gamma {gamma:?} and beta {beta:?}"
        )));
    }
    Ok(c)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn forward<T: Scalar>(
    x: &[T],
    c: usize,
    gamma: &[T],
    beta: &[T],
    running_mean: &[T],
    running_var: &[T],
    eps: f64,
    mode: Mode,
) -> (Vec<T>, BnCache<T>, Option<BatchStats<T>>) {
    let rows = x.len() / c;
    let eps = T::lit(eps);
    let (mean, var, stats) = match mode {
        Mode::Train => {
            let mut mean = vec![T::zero(); c];
            for row in x.chunks_exact(c) {
                for (m, &v) in mean.iter_mut().zip(row) {
                    *m += v;
                }
            }
            let inv_rows = T::one() / T::lit(rows as f64);
            mean.iter_mut().for_each(|m| *m *= inv_rows);
            let mut var = vec![T::zero(); c];
            for row in x.chunks_exact(c) {
                for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                    *s += (v - m) * (v - m);
                }
            }
            var.iter_mut().for_each(|s| *s *= inv_rows);
            let stats = BatchStats {
                mean: mean.clone(),
                var: var.clone(),
            };
            (mean, var, Some(stats))
        }
        Mode::Infer => (running_mean.to_vec(), running_var.to_vec(), None),
    };
    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    let mut xhat = Vec::with_capacity(x.len());
    let mut y = Vec::with_capacity(x.len());
    for row in x.chunks_exact(c) {
        for ch in 0..c {
            let xh = (row[ch] - mean[ch]) * inv_std[ch];
            xhat.push(xh);
            y.push(gamma[ch] * xh + beta[ch]);
        }
    }
    (y, BnCache { xhat, inv_std, mode }, stats)
}

pub(crate) fn backward<T: Scalar>(
    dy: &[T],
    c: usize,
    gamma: &[T],
    cache: &BnCache<T>,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let rows = dy.len() / c;
    let mut dgamma = vec![T::zero(); c];
    let mut dbeta = vec![T::zero(); c];
    for (drow, xrow) in dy.chunks_exact(c).zip(cache.xhat.chunks_exact(c)) {
        for ch in 0..c {
            dgamma[ch] += drow[ch] * xrow[ch];
            dbeta[ch] += drow[ch];
        }
    }
    let mut dx = Vec::with_capacity(dy.len());
    match cache.mode {
        Mode::Infer => {
            for drow in dy.chunks_exact(c) {
                for ch in 0..c {
                    dx.push(drow[ch] * gamma[ch] * cache.inv_std[ch]);
                }
            }
        }
        Mode::Train => {
            // dxhat = dy·γ;  dx = inv_std/M · (M·dxhat − Σdxhat − xhat·Σ(dxhat·xhat))
            let m = T::lit(rows as f64);
            let mut sum_dxhat = vec![T::zero(); c];
            let mut sum_dxhat_xhat = vec![T::zero(); c];
            for ch in 0..c {
                sum_dxhat[ch] = dbeta[ch] * gamma[ch];
                sum_dxhat_xhat[ch] = dgamma[ch] * gamma[ch];
            }
            for (drow, xrow) in dy.chunks_exact(c).zip(cache.xhat.chunks_exact(c)) {
                for ch in 0..c {
                    let dxhat = drow[ch] * gamma[ch];
                    dx.push(
                        cache.inv_std[ch] / m
                            * (m * dxhat - sum_dxhat[ch] - xrow[ch] * sum_dxhat_xhat[ch]),
                    );
                }
            }
        }
    }
    (dx, dgamma, dbeta)
}
