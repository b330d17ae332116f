use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::norm::BN_EPSILON;
use crate::autodiff::{BatchStats, Graph, Mode, Padding, Scalar, Tensor, Var};
use crate::error::{Error, Result};
use crate::model::config::{ACRNNConfig, Placement, RnnAttentionForm, POOL_WINDOWS};
use crate::model::params::ModelParams;

/// Output dimensions (batch axis excluded) recorded at named points of the
/// forward pass.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ShapeTrace {
    pub entries: Vec<(String, Vec<usize>)>,
}

impl ShapeTrace {
    fn record(&mut self, name: &str, shape: &[usize]) {
        self.entries.push((name.to_string(), shape[1..].to_vec()));
    }

    pub fn get(&self, name: &str) -> Option<&[usize]> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, s)| s.as_slice())
    }
}

pub struct ForwardPass<T> {
    /// `N×K` class probabilities.
    pub probs: Var,
    /// Batch statistics of every batch-norm layer (training mode only),
    /// keyed by prefix such as `l1.bn`.
    pub bn_stats: Vec<(String, BatchStats<T>)>,
    pub trace: ShapeTrace,
    /// Attention weights (`N×T`) of whichever attention block is active.
    pub attention: Option<Var>,
}

/// Frame-level attention over a convolutional feature map `M` (`F×T×C` or
/// `N×F×T×C`). A 3×3 single-output convolution scores every position, the
/// scores are averaged over frequency and normalised over time by softmax,
/// and each time column of `M` is scaled by its weight.
///
/// Returns `(M', A)` where `A` is `N×T` (or `T` for unbatched input).
pub fn cnn_attention<T: Scalar>(g: &mut Graph<T>, m: Var, kernel: Var, bias: Var) -> Result<(Var, Var)> {
    let shape = g.shape(m).to_vec();
    let (n, t) = match *shape {
        [_, t, _] => (None, t),
        [n, _, t, _] => (Some(n), t),
        _ => return Err(Error::dim(format!("cnn_attention expects rank 3 or 4 input, got {shape:?}"))),
    };
    let scores = g.conv2d(m, kernel, bias, (1, 1), Padding::Same)?;
    let scores = g.avgpool_freq(scores)?;
    let scores = match n {
        Some(n) => g.reshape(scores, &[n, t])?,
        None => g.reshape(scores, &[t])?,
    };
    let a = g.softmax(scores)?;
    let out = g.scale_time(m, a)?;
    Ok((out, a))
}

#[derive(Clone, Copy, Debug)]
pub enum RnnAttentionVars {
    Linear { w: Var },
    Mlp { w1: Var, b1: Var, context: Var },
}

/// Attention pooling of a recurrent output sequence `H` (`T×D` or `N×T×D`):
/// `β = softmax_t(score(h_t))`, `v = Σ_t β_t h_t`. Returns `(v, β)`.
pub fn rnn_attention<T: Scalar>(g: &mut Graph<T>, h: Var, att: &RnnAttentionVars) -> Result<(Var, Var)> {
    let shape = g.shape(h).to_vec();
    if !(2..=3).contains(&shape.len()) {
        return Err(Error::dim(format!("rnn_attention expects rank 2 or 3 input, got {shape:?}")));
    }
    let column = |g: &mut Graph<T>, v: Var| {
        let len = g.value(v).len();
        g.reshape(v, &[len, 1])
    };
    let scores = match *att {
        RnnAttentionVars::Linear { w } => {
            let w = column(g, w)?;
            g.dense(h, w, None)?
        }
        RnnAttentionVars::Mlp { w1, b1, context } => {
            let u = g.dense(h, w1, Some(b1))?;
            let u = g.tanh(u);
            let c = column(g, context)?;
            g.dense(u, c, None)?
        }
    };
    let scores = g.reshape(scores, &shape[..shape.len() - 1])?;
    let beta = g.softmax(scores)?;
    let v = g.weighted_sum_time(h, beta)?;
    Ok((v, beta))
}

fn lookup(vars: &IndexMap<String, Var>, name: &str) -> Result<Var> {
    vars.get(name)
        .copied()
        .ok_or_else(|| Error::contract(format!("parameter {name:?} is not bound")))
}

fn gru_vars(vars: &IndexMap<String, Var>, layer: &str) -> Result<[Var; 6]> {
    let found = ["fwd", "bwd"]
        .iter()
        .flat_map(|dir| ["w", "u", "b"].map(|p| format!("{layer}.{dir}.{p}")))
        .map(|name| lookup(vars, &name))
        .collect::<Result<Vec<_>>>()?;
    Ok(found.try_into().expect("two directions of three tensors"))
}

/// Records the full network on `g`. `vars` maps every trainable parameter
/// name to a graph node (see [`ModelParams::bind`]); running batch-norm
/// statistics are read from `params`. `input` must be `N×F×T×C` matching
/// the configured input shape.
pub fn forward_graph<T: Scalar, R: Rng + ?Sized>(
    g: &mut Graph<T>,
    cfg: &ACRNNConfig,
    params: &ModelParams<T>,
    vars: &IndexMap<String, Var>,
    input: Var,
    mode: Mode,
    rng: &mut R,
) -> Result<ForwardPass<T>> {
    let (f, t, c) = cfg.input;
    match *g.shape(input) {
        [_, fi, ti, ci] if (fi, ti, ci) == (f, t, c) => {}
        ref other => {
            return Err(Error::dim(format!("network input must be N×{f}×{t}×{c}, got {other:?}")));
        }
    }
    let mut trace = ShapeTrace::default();
    let mut bn_stats = Vec::new();
    let mut attention = None;
    let mut x = input;
    for i in 0..cfg.conv_widths.len() {
        let l = format!("l{}", i + 1);
        let kernel = lookup(vars, &format!("{l}.conv.kernel"))?;
        let bias = lookup(vars, &format!("{l}.conv.bias"))?;
        x = g.conv2d(x, kernel, bias, (1, 1), Padding::Same)?;
        let gamma = lookup(vars, &format!("{l}.bn.gamma"))?;
        let beta = lookup(vars, &format!("{l}.bn.beta"))?;
        let (y, stats) = g.batchnorm_raw(
            x,
            gamma,
            beta,
            params.get(&format!("{l}.bn.running_mean"))?.data(),
            params.get(&format!("{l}.bn.running_var"))?.data(),
            BN_EPSILON,
            mode,
        )?;
        if let Some(stats) = stats {
            bn_stats.push((format!("{l}.bn"), stats));
        }
        x = g.relu(y);
        if i % 2 == 1 {
            let pair = i / 2;
            x = g.maxpool2d(x, POOL_WINDOWS[pair])?;
            trace.record(&format!("{l}-pool"), g.shape(x));
            if cfg.attention_placement.cnn_pair() == Some(pair) {
                let kernel = lookup(vars, &format!("{l}.att.kernel"))?;
                let bias = lookup(vars, &format!("{l}.att.bias"))?;
                let (out, a) = cnn_attention(g, x, kernel, bias)?;
                x = out;
                attention = Some(a);
            }
        }
    }
    let mut seq = g.to_sequence(x)?;
    trace.record("gru-input", g.shape(seq));
    for layer in ["l9", "l10"] {
        seq = g.gru_bidirectional(seq, gru_vars(vars, layer)?)?;
        seq = g.dropout(seq, cfg.dropout_p, mode, rng)?;
    }
    trace.record("gru-output", g.shape(seq));
    let head = if cfg.attention_placement == Placement::L10 {
        let att = match cfg.rnn_attention_form {
            RnnAttentionForm::Mlp => RnnAttentionVars::Mlp {
                w1: lookup(vars, "l10.att.w1")?,
                b1: lookup(vars, "l10.att.b1")?,
                context: lookup(vars, "l10.att.context")?,
            },
            RnnAttentionForm::Linear => RnnAttentionVars::Linear {
                w: lookup(vars, "l10.att.w")?,
            },
        };
        let (v, beta) = rnn_attention(g, seq, &att)?;
        attention = Some(beta);
        v
    } else {
        g.last_step(seq)?
    };
    trace.record("head", g.shape(head));
    let logits = g.dense(head, lookup(vars, "fc.weight")?, Some(lookup(vars, "fc.bias")?))?;
    let probs = g.softmax(logits)?;
    trace.record("output", g.shape(probs));
    Ok(ForwardPass {
        probs,
        bn_stats,
        trace,
        attention,
    })
}

fn infer_pass<T: Scalar>(cfg: &ACRNNConfig, params: &ModelParams<T>, batch: &Tensor<T>) -> Result<(Graph<T>, ForwardPass<T>)> {
    let mut g = Graph::new();
    let vars = params
        .trainable()
        .map(|(name, p)| (name.to_string(), g.constant(p.value.clone())))
        .collect();
    let input = match batch.rank() {
        3 => {
            let mut shape = vec![1];
            shape.extend_from_slice(batch.shape());
            g.constant(batch.clone().reshape(&shape)?)
        }
        _ => g.constant(batch.clone()),
    };
    // dropout is the identity at inference, so this stream is never drawn from
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let pass = forward_graph(&mut g, cfg, params, &vars, input, Mode::Infer, &mut rng)?;
    Ok((g, pass))
}

/// Class probabilities (`N×K`) in inference mode. A single `F×T×C`
/// segment is treated as a batch of one.
pub fn predict<T: Scalar>(cfg: &ACRNNConfig, params: &ModelParams<T>, batch: &Tensor<T>) -> Result<Tensor<T>> {
    let (g, pass) = infer_pass(cfg, params, batch)?;
    Ok(g.value(pass.probs).clone())
}

/// Shapes at each stage of an inference pass over `batch`.
pub fn shape_trace<T: Scalar>(cfg: &ACRNNConfig, params: &ModelParams<T>, batch: &Tensor<T>) -> Result<ShapeTrace> {
    infer_pass(cfg, params, batch).map(|(_, pass)| pass.trace)
}
