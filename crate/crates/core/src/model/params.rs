use indexmap::IndexMap;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::norm::{update_running, BN_MOMENTUM};
use crate::autodiff::{BatchStats, Graph, Scalar, Tensor, Var};
use crate::error::{Error, Result};
use crate::model::config::{ACRNNConfig, Placement, RnnAttentionForm, CONV_KERNELS};

/// Standard deviation of the Gaussian weight initialisation.
pub const INIT_STD: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParamKind {
    Weight,
    Bias,
    BnScale,
    BnShift,
    BnRunningMean,
    BnRunningVar,
}

impl ParamKind {
    /// Updated by the optimizer (running statistics are not).
    pub fn is_trainable(self) -> bool {
        !matches!(self, ParamKind::BnRunningMean | ParamKind::BnRunningVar)
    }

    /// Subject to L2 regularisation.
    pub fn is_decayed(self) -> bool {
        self == ParamKind::Weight
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param<T = f32> {
    pub kind: ParamKind,
    pub value: Tensor<T>,
}

/// Named parameter tensors in a fixed, deterministic order.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ModelParams<T = f32> {
    entries: IndexMap<String, Param<T>>,
}

impl<T: Scalar> ModelParams<T> {
    pub fn new() -> Self {
        ModelParams {
            entries: IndexMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, kind: ParamKind, value: Tensor<T>) -> Result<()> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(Error::contract(format!("duplicate parameter name {name:?}")));
        }
        self.entries.insert(name, Param { kind, value });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn param(&self, name: &str) -> Result<&Param<T>> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::contract(format!("missing parameter {name:?}")))
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.param(name).map(|p| &p.value)
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<T>> {
        self.entries
            .get_mut(name)
            .map(|p| &mut p.value)
            .ok_or_else(|| Error::contract(format!("missing parameter {name:?}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param<T>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Param<T>)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn trainable(&self) -> impl Iterator<Item = (&str, &Param<T>)> {
        self.iter().filter(|(_, p)| p.kind.is_trainable())
    }

    /// Total number of trainable scalars.
    pub fn trainable_count(&self) -> usize {
        self.trainable().map(|(_, p)| p.value.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            entries: self
                .entries
                .iter()
                .map(|(k, p)| {
                    (
                        k.clone(),
                        Param {
                            kind: p.kind,
                            value: p.value.cast(),
                        },
                    )
                })
                .collect(),
        }
    }

    /// Registers every trainable tensor as a graph leaf.
    pub fn bind(&self, g: &mut Graph<T>) -> IndexMap<String, Var> {
        self.trainable()
            .map(|(name, p)| (name.to_string(), g.param(p.value.clone())))
            .collect()
    }

    /// Folds batch statistics into the running averages. Each entry is
    /// keyed by its batch-norm prefix, e.g. `l3.bn`.
    pub fn apply_bn_stats(&mut self, stats: &[(String, BatchStats<T>)]) -> Result<()> {
        for (prefix, s) in stats {
            let mean_name = format!("{prefix}.running_mean");
            let var_name = format!("{prefix}.running_var");
            let mut mean = self.get(&mean_name)?.clone();
            let mut var = self.get(&var_name)?.clone();
            if mean.len() != s.mean.len() || var.len() != s.var.len() {
                return Err(Error::dim(format!("batch statistics for {prefix} have the wrong width")));
            }
            update_running(mean.data_mut(), var.data_mut(), s, BN_MOMENTUM);
            *self.get_mut(&mean_name)? = mean;
            *self.get_mut(&var_name)? = var;
        }
        Ok(())
    }

    /// Replaces tensor values by name. Every parameter must be supplied with
    /// its existing shape, and no unknown names are accepted.
    pub fn load_values(&mut self, values: impl IntoIterator<Item = (String, Tensor<T>)>) -> Result<()> {
        let mut seen = 0;
        for (name, v) in values {
            let slot = self
                .entries
                .get_mut(&name)
                .ok_or_else(|| Error::contract(format!("unexpected parameter {name:?}")))?;
            if slot.value.shape() != v.shape() {
                return Err(Error::dim(format!(
                    "parameter {name:?} has shape {:?}, expected {:?}",
                    v.shape(),
                    slot.value.shape()
                )));
            }
            slot.value = v;
            seen += 1;
        }
        if seen != self.entries.len() {
            return Err(Error::contract(format!(
                "expected {} parameters, got {seen}",
                self.entries.len()
            )));
        }
        Ok(())
    }
}

/// `l2_coeff · Σ w²` over all weight tensors; biases and batch-norm
/// parameters are excluded.
pub fn regularization_loss<T: Scalar>(params: &ModelParams<T>, l2_coeff: f64) -> f64 {
    let sum: f64 = params
        .iter()
        .filter(|(_, p)| p.kind.is_decayed())
        .flat_map(|(_, p)| p.value.data())
        .map(|&w| w.as_f64() * w.as_f64())
        .sum();
    l2_coeff * sum
}

/// Name, role and shape of one parameter tensor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    pub shape: Vec<usize>,
}

#[derive(Default)]
struct Layout {
    specs: Vec<ParamSpec>,
}

impl Layout {
    fn add(&mut self, name: String, kind: ParamKind, shape: &[usize]) {
        self.specs.push(ParamSpec {
            name,
            kind,
            shape: shape.to_vec(),
        });
    }

    fn gru(&mut self, layer: &str, din: usize, h: usize) {
        for dir in ["fwd", "bwd"] {
            self.add(format!("{layer}.{dir}.w"), ParamKind::Weight, &[din, 3 * h]);
            self.add(format!("{layer}.{dir}.u"), ParamKind::Weight, &[h, 3 * h]);
            self.add(format!("{layer}.{dir}.b"), ParamKind::Bias, &[3 * h]);
        }
    }
}

/// Every parameter tensor of the configured network, in a fixed order,
/// without allocating any of them.
pub fn param_layout(cfg: &ACRNNConfig) -> Result<Vec<ParamSpec>> {
    cfg.validate()?;
    let mut b = Layout::default();
    let mut cin = cfg.input.2;
    for (i, &cout) in cfg.conv_widths.iter().enumerate() {
        let (kf, kt) = CONV_KERNELS[i / 2];
        let l = format!("l{}", i + 1);
        b.add(format!("{l}.conv.kernel"), ParamKind::Weight, &[kf, kt, cin, cout]);
        b.add(format!("{l}.conv.bias"), ParamKind::Bias, &[cout]);
        b.add(format!("{l}.bn.gamma"), ParamKind::BnScale, &[cout]);
        b.add(format!("{l}.bn.beta"), ParamKind::BnShift, &[cout]);
        b.add(format!("{l}.bn.running_mean"), ParamKind::BnRunningMean, &[cout]);
        b.add(format!("{l}.bn.running_var"), ParamKind::BnRunningVar, &[cout]);
        if cfg.attention_placement.cnn_pair() == Some(i / 2) && i % 2 == 1 {
            b.add(format!("{l}.att.kernel"), ParamKind::Weight, &[3, 3, cout, 1]);
            b.add(format!("{l}.att.bias"), ParamKind::Bias, &[1]);
        }
        cin = cout;
    }
    let h = cfg.gru_hidden;
    let (_, din) = cfg.sequence_dims()?;
    b.gru("l9", din, h);
    b.gru("l10", 2 * h, h);
    if cfg.attention_placement == Placement::L10 {
        match cfg.rnn_attention_form {
            RnnAttentionForm::Mlp => {
                b.add("l10.att.w1".into(), ParamKind::Weight, &[2 * h, h]);
                b.add("l10.att.b1".into(), ParamKind::Bias, &[h]);
                b.add("l10.att.context".into(), ParamKind::Weight, &[h]);
            }
            RnnAttentionForm::Linear => b.add("l10.att.w".into(), ParamKind::Weight, &[2 * h]),
        }
    }
    b.add("fc.weight".into(), ParamKind::Weight, &[2 * h, cfg.num_classes]);
    b.add("fc.bias".into(), ParamKind::Bias, &[cfg.num_classes]);
    Ok(b.specs)
}

/// Creates freshly initialised parameters: weights `~ N(0, 0.05²)`, biases
/// zero, batch-norm scale one and shift zero, running variance one.
pub fn build<T: Scalar, R: Rng + ?Sized>(cfg: &ACRNNConfig, rng: &mut R) -> Result<ModelParams<T>> {
    let normal = Normal::new(0.0, INIT_STD).expect("positive standard deviation");
    let mut params = ModelParams::new();
    for spec in param_layout(cfg)? {
        let value = match spec.kind {
            ParamKind::Weight => Tensor::from_fn(&spec.shape, |_| T::lit(normal.sample(rng))),
            ParamKind::BnScale | ParamKind::BnRunningVar => Tensor::full(&spec.shape, T::one()),
            ParamKind::Bias | ParamKind::BnShift | ParamKind::BnRunningMean => Tensor::zeros(&spec.shape),
        };
        params.insert(spec.name, spec.kind, value)?;
    }
    Ok(params)
}
