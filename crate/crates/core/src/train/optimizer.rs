use indexmap::IndexMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{Scalar, Tensor};
use crate::error::{Error, Result};
use crate::model::{ModelParams, ParamKind};

/// Momentum buffers, one per trainable parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState<T = f32> {
    pub velocity: IndexMap<String, Tensor<T>>,
}

impl<T: Scalar> OptimizerState<T> {
    /// Zero velocity for every trainable parameter of `params`.
    pub fn new(params: &ModelParams<T>) -> Self {
        OptimizerState {
            velocity: params
                .trainable()
                .map(|(name, p)| (name.to_string(), Tensor::zeros(p.value.shape())))
                .collect(),
        }
    }
}

/// One SGD step with Nesterov momentum, lookahead form:
///
/// ```text
/// g' = g + l2·w        (weights only)
/// v  = μ·v − lr·g'
/// w  = w + μ·v − lr·g'
/// ```
///
/// `grads` must hold a gradient for every trainable parameter, shaped like
/// the parameter.
pub fn sgd_nesterov_step<T: Scalar>(
    params: &mut ModelParams<T>,
    grads: &IndexMap<String, Tensor<T>>,
    state: &mut OptimizerState<T>,
    lr: f64,
    momentum: f64,
    l2_coeff: f64,
) -> Result<()> {
    let (lr, mu, l2) = (T::lit(lr), T::lit(momentum), T::lit(l2_coeff));
    for (name, p) in params.iter_mut() {
        if !p.kind.is_trainable() {
            continue;
        }
        let g = grads
            .get(name)
            .ok_or_else(|| Error::contract(format!("no gradient for parameter {name:?}")))?;
        let v = state
            .velocity
            .get_mut(name)
            .ok_or_else(|| Error::contract(format!("no velocity buffer for parameter {name:?}")))?;
        if g.shape() != p.value.shape() || v.shape() != p.value.shape() {
            return Err(Error::contract(format!(
                "parameter {name:?} is {:?} but its gradient is {:?} and velocity {:?}",
                p.value.shape(),
                g.shape(),
                v.shape()
            )));
        }
        let decay = if p.kind.is_decayed() { l2 } else { T::zero() };
        for ((w, &g), v) in p.value.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
            let step = lr * (g + decay * *w);
            *v = mu * *v - step;
            *w = *w + mu * *v - step;
        }
    }
    Ok(())
}

/// Redraws every weight tensor from `N(0, std²)` and resets biases and
/// batch-norm state (shift and running mean 0, scale and running variance 1).
pub fn init_weights<T: Scalar>(params: &mut ModelParams<T>, std: f64, seed: u64) -> Result<()> {
    let normal = Normal::new(0.0, std).map_err(|e| Error::contract(format!("init std {std}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (_, p) in params.iter_mut() {
        let fill = match p.kind {
            ParamKind::Weight => {
                for w in p.value.data_mut() {
                    *w = T::lit(normal.sample(&mut rng));
                }
                continue;
            }
            ParamKind::Bias | ParamKind::BnShift | ParamKind::BnRunningMean => T::zero(),
            ParamKind::BnScale | ParamKind::BnRunningVar => T::one(),
        };
        p.value.data_mut().fill(fill);
    }
    Ok(())
}
