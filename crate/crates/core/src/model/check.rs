use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use std::fmt::Write as _;

use crate::autodiff::gradcheck::{check_piecewise, op_suite, GradCheck, OP_TOLERANCE};
use crate::autodiff::{Mode, Tensor};
use crate::error::Result;
use crate::model::config::{ACRNNConfig, Placement};
use crate::model::net::forward_graph;
use crate::model::params::{build, ModelParams};

/// Finite-difference step for whole-network checks.
pub const MODEL_FD_STEP: f64 = 1e-6;

/// Relative-error bound for whole-network checks.
pub const MODEL_TOLERANCE: f64 = 1e-3;

/// Compares analytic and finite-difference gradients of the training loss
/// with respect to every trainable parameter of a freshly built network, in
/// 64-bit precision and training mode (batch-norm batch statistics, a fixed
/// dropout mask). ReLU and max pooling make the loss piecewise smooth, so
/// the comparison goes through [`check_piecewise`].
pub fn check_model(cfg: &ACRNNConfig, batch: usize, seed: u64) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params: ModelParams<f64> = build(cfg, &mut rng)?;
    let (f, t, c) = cfg.input;
    let x = Tensor::from_fn(&[batch, f, t, c], |_| rng.random_range(-1.0..1.0));
    let k = cfg.num_classes;
    let targets = Tensor::from_fn(&[batch, k], |i| if i % k == (i / k) % k { 1.0 } else { 0.0 });
    let names: Vec<String> = params.trainable().map(|(n, _)| n.to_string()).collect();
    let inputs: Vec<Tensor<f64>> = params.trainable().map(|(_, p)| p.value.clone()).collect();
    let dropout_seed = seed.wrapping_add(1);
    check_piecewise(
        &format!("model[{}]", cfg.attention_placement),
        &inputs,
        MODEL_FD_STEP,
        MODEL_TOLERANCE,
        |g, v| {
            let vars = names.iter().cloned().zip(v.iter().copied()).collect();
            let input = g.constant(x.clone());
            let mut drop_rng = ChaCha8Rng::seed_from_u64(dropout_seed);
            let pass = forward_graph(g, cfg, &params, &vars, input, Mode::Train, &mut drop_rng)?;
            g.cross_entropy(pass.probs, &targets)
        },
    )
}

/// Placements checked by default: no attention, attention inside the
/// convolutional stack, and attention over the recurrent outputs. Each
/// whole-network check takes about a minute on one core.
pub const DEFAULT_GRADCHECK_PLACEMENTS: [Placement; 3] = [Placement::None, Placement::L4, Placement::L10];

/// Outcome of [`gradcheck_suite`].
#[derive(Clone, Debug)]
pub struct GradcheckReport {
    pub ops: Vec<GradCheck>,
    pub models: Vec<GradCheck>,
}

impl GradcheckReport {
    pub fn passes(&self) -> bool {
        self.ops.iter().all(|c| c.passes(OP_TOLERANCE)) && self.models.iter().all(|c| c.passes(MODEL_TOLERANCE))
    }

    /// One row per check: name, element count, kinks, max relative error,
    /// bound and verdict.
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<28} {:>8} {:>6} {:>12} {:>9}  result\n",
            "check", "elements", "kinks", "max rel err", "bound"
        );
        let rows = self.ops.iter().map(|c| (c, OP_TOLERANCE)).chain(self.models.iter().map(|c| (c, MODEL_TOLERANCE)));
        for (c, tol) in rows {
            let _ = writeln!(
                s,
                "{:<28} {:>8} {:>6} {:>12.3e} {:>9.0e}  {}",
                c.name,
                c.elements,
                c.kinks,
                c.max_rel_error,
                tol,
                if c.passes(tol) { "ok" } else { "FAIL" }
            );
        }
        s
    }
}

/// Per-operation checks followed by a whole-network check of the reduced
/// two-class network for each attention placement in `placements`.
pub fn gradcheck_suite(seed: u64, placements: &[Placement]) -> Result<GradcheckReport> {
    let ops = op_suite(seed)?;
    let models = placements
        .iter()
        .map(|&p| {
            let cfg = ACRNNConfig {
                attention_placement: p,
                ..ACRNNConfig::reduced(2)
            };
            check_model(&cfg, 2, seed)
        })
        .collect::<Result<_>>()?;
    Ok(GradcheckReport { ops, models })
}
