//! Mini-batch SGD with Nesterov momentum, a step learning-rate schedule,
//! coupled L2 decay, mixup at batch assembly, and best/final checkpoints.

mod history;
mod optimizer;


use std::collections::BTreeSet;
use std::time::Instant;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use history::{EpochRecord, TrainHistory};
pub(crate) use history::csv_err;
pub use optimizer::{init_weights, sgd_nesterov_step, OptimizerState};

use crate::augment::{draw_pairs, mixup_segments, AugmentConfig};
use crate::autodiff::{Graph, Mode, Tensor};
use crate::dataset::Dataset;
use crate::dsp::{LogGTSegment, NormStats, CHANNELS, N_BANDS, SEGMENT_FRAMES};
use crate::error::{Error, Result};
use crate::eval::{argmax, evaluate_fold};
use crate::model::{build, forward_graph, ACRNNConfig, ModelParams, INIT_STD};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr0: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
    pub momentum: f64,
    pub l2_coeff: f64,
    pub seed: u64,
    /// Augmented segments with a copy number above `copies_per_clip` are
    /// left out of training, so `copies_per_clip = 0` trains on originals
    /// only.
    pub augment: AugmentConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            epochs: 300,
            lr0: 0.01,
            lr_decay_factor: 10.0,
            lr_decay_every: 100,
            momentum: 0.9,
            l2_coeff: 1e-4,
            seed: 0,
            augment: AugmentConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.batch_size == 0 || self.epochs == 0 || self.lr_decay_every == 0 {
            return bad("batch_size, epochs and lr_decay_every must be positive".into());
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return bad(format!("lr0 must be positive, got {}", self.lr0));
        }
        if !(self.lr_decay_factor >= 1.0 && self.lr_decay_factor.is_finite()) {
            return bad(format!("lr_decay_factor must be at least 1, got {}", self.lr_decay_factor));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if !(self.l2_coeff >= 0.0 && self.l2_coeff.is_finite()) {
            return bad(format!("l2_coeff must be non-negative, got {}", self.l2_coeff));
        }
        self.augment.validate()
    }

    /// Optimizer steps in one epoch over `n` segments; the last partial
    /// batch is kept.
    pub fn steps_per_epoch(&self, n: usize) -> usize {
        n.div_ceil(self.batch_size)
    }
}

/// `lr0 / factor^⌊epoch / every⌋` for a 0-based epoch.
pub fn lr_schedule(epoch: usize, cfg: &TrainConfig) -> f64 {
    let drops = (epoch / cfg.lr_decay_every) as i32;
    cfg.lr0 / cfg.lr_decay_factor.powi(drops)
}

/// A trained network with the input statistics it expects.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: ACRNNConfig,
    pub params: ModelParams<f32>,
    pub norm: NormStats,
    /// 0-based epoch after which the weights were taken.
    pub epoch: usize,
}

/// Which clips fed each stage of a training run, for leakage checks.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LeakageAudit {
    pub held_out_clips: BTreeSet<String>,
    /// Clips whose segments went into the normalization statistics.
    pub norm_clips: BTreeSet<String>,
    /// Clips whose segments (original, augmented or mixup partner) reached
    /// a gradient update.
    pub gradient_clips: BTreeSet<String>,
    pub epochs_checked: usize,
}

impl LeakageAudit {
    pub fn is_clean(&self) -> bool {
        self.held_out_clips.is_disjoint(&self.norm_clips) && self.held_out_clips.is_disjoint(&self.gradient_clips)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Highest held-out clip accuracy (earliest epoch on ties); equal to
    /// `last` when nothing is held out.
    pub best: Checkpoint,
    pub last: Checkpoint,
    pub best_val_acc: Option<f64>,
    pub history: TrainHistory,
    pub audit: LeakageAudit,
}

/// Independent random streams of one run.
struct Streams {
    init: ChaCha8Rng,
    batches: ChaCha8Rng,
    dropout: ChaCha8Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let stream = |id| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(id);
            r
        };
        Streams {
            init: stream(0),
            batches: stream(1),
            dropout: stream(2),
        }
    }
}

/// Shuffled segment positions `0..n` cut into batches; every position
/// appears exactly once.
pub fn epoch_batches<R: Rng + ?Sized>(n: usize, batch_size: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}

/// Indices of the segments a run trains on: everything outside `held_out`,
/// with augmented copies limited to `copies_per_clip`.
pub fn training_selection(dataset: &Dataset, cfg: &TrainConfig, held_out: Option<u8>) -> Vec<usize> {
    let held: Vec<u8> = held_out.into_iter().collect();
    dataset
        .training_indices(&held)
        .into_iter()
        .filter(|&i| usize::from(dataset.segments[i].augmented) <= cfg.augment.copies_per_clip)
        .collect()
}

fn one_hot(label: u32, k: usize) -> Vec<f32> {
    let mut v = vec![0.0; k];
    v[label as usize] = 1.0;
    v
}

/// Normalized (and, when enabled, mixed) batch tensor with its targets.
fn assemble(
    dataset: &Dataset,
    idx: &[usize],
    norm: &NormStats,
    augment: &AugmentConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Tensor<f32>, Tensor<f32>)> {
    let k = dataset.num_classes;
    let segs: Vec<LogGTSegment> = idx.iter().map(|&i| norm.applied(&dataset.segments[i])).collect();
    let labels: Vec<Vec<f32>> = segs.iter().map(|s| one_hot(s.label, k)).collect();
    let mut values = Vec::with_capacity(segs.len() * segs[0].values.len());
    let mut targets = Vec::with_capacity(segs.len() * k);
    if augment.mixup_enabled {
        for p in draw_pairs(segs.len(), augment.mixup_alpha, rng)? {
            let (s, y) = mixup_segments(&segs[p.i], &labels[p.i], &segs[p.j], &labels[p.j], p.lambda)?;
            values.extend_from_slice(&s.values);
            targets.extend_from_slice(&y);
        }
    } else {
        for (s, y) in segs.iter().zip(&labels) {
            values.extend_from_slice(&s.values);
            targets.extend_from_slice(y);
        }
    }
    let n = segs.len();
    Ok((
        Tensor::new(&[n, N_BANDS, SEGMENT_FRAMES, CHANNELS], values)?,
        Tensor::new(&[n, k], targets)?,
    ))
}

struct StepResult {
    loss: f64,
    correct: usize,
}

#[allow(clippy::too_many_arguments)]
fn step(
    params: &mut ModelParams<f32>,
    state: &mut OptimizerState<f32>,
    model_cfg: &ACRNNConfig,
    batch: Tensor<f32>,
    targets: &Tensor<f32>,
    lr: f64,
    cfg: &TrainConfig,
    dropout_rng: &mut ChaCha8Rng,
) -> Result<StepResult> {
    let mut g = Graph::new();
    let vars = params.bind(&mut g);
    let input = g.constant(batch);
    let pass = forward_graph(&mut g, model_cfg, params, &vars, input, Mode::Train, dropout_rng)?;
    let loss = g.cross_entropy(pass.probs, targets)?;
    g.backward(loss)?;
    let k = model_cfg.num_classes;
    let correct = g
        .value(pass.probs)
        .data()
        .chunks_exact(k)
        .zip(targets.data().chunks_exact(k))
        .filter(|(p, t)| argmax(p) == argmax(t))
        .count();
    let grads: IndexMap<String, Tensor<f32>> = vars
        .iter()
        .map(|(name, &v)| {
            g.grad(v)
                .map(|t| (name.clone(), t))
                .ok_or_else(|| Error::contract(format!("parameter {name:?} received no gradient")))
        })
        .collect::<Result<_>>()?;
    sgd_nesterov_step(params, &grads, state, lr, cfg.momentum, cfg.l2_coeff)?;
    params.apply_bn_stats(&pass.bn_stats)?;
    Ok(StepResult {
        loss: g.value(loss).item().into(),
        correct,
    })
}

/// Trains a fresh network on every fold except `held_out`.
///
/// Normalization statistics come from the training segments only. The
/// held-out fold's original segments are scored after every epoch with
/// clip-level averaging; its augmented copies are never used.
pub fn train(dataset: &Dataset, model_cfg: &ACRNNConfig, cfg: &TrainConfig, held_out: Option<u8>) -> Result<TrainOutcome> {
    cfg.validate()?;
    model_cfg.validate()?;
    if model_cfg.input != (N_BANDS, SEGMENT_FRAMES, CHANNELS) {
        return Err(Error::Config(format!(
            "model input {:?} does not match the {N_BANDS}×{SEGMENT_FRAMES}×{CHANNELS} segments",
            model_cfg.input
        )));
    }
    if model_cfg.num_classes != dataset.num_classes {
        return Err(Error::Config(format!(
            "model has {} classes but the dataset has {}",
            model_cfg.num_classes, dataset.num_classes
        )));
    }
    let selection = training_selection(dataset, cfg, held_out);
    if selection.is_empty() {
        return Err(Error::contract("no training segments outside the held-out fold"));
    }
    let val_groups = match held_out {
        Some(fold) => {
            let groups = dataset.clip_groups(fold);
            if groups.is_empty() {
                return Err(Error::contract(format!("held-out fold {fold} has no clips")));
            }
            Some((fold, groups))
        }
        None => None,
    };

    let mut audit = LeakageAudit {
        held_out_clips: held_out.map(|f| dataset.clips_by_fold().remove(&f).unwrap_or_default()).unwrap_or_default(),
        ..LeakageAudit::default()
    };
    let norm = NormStats::compute(selection.iter().map(|&i| &dataset.segments[i]))?;
    audit.norm_clips = selection.iter().map(|&i| dataset.segments[i].clip_id.clone()).collect();
    if !audit.is_clean() {
        return Err(Error::contract("normalization statistics include held-out clips"));
    }

    let mut rngs = Streams::new(cfg.seed);
    let mut params: ModelParams<f32> = build(model_cfg, &mut rngs.init)?;
    init_weights(&mut params, INIT_STD, rngs.init.random())?;
    let mut state = OptimizerState::new(&params);
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, Checkpoint)> = None;
    let snapshot = |params: &ModelParams<f32>, epoch| Checkpoint {
        config: model_cfg.clone(),
        params: params.clone(),
        norm,
        epoch,
    };

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let lr = lr_schedule(epoch, cfg);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in epoch_batches(selection.len(), cfg.batch_size, &mut rngs.batches) {
            let idx: Vec<usize> = batch.iter().map(|&b| selection[b]).collect();
            audit
                .gradient_clips
                .extend(idx.iter().map(|&i| dataset.segments[i].clip_id.clone()));
            let (x, y) = assemble(dataset, &idx, &norm, &cfg.augment, &mut rngs.batches)?;
            let r = step(&mut params, &mut state, model_cfg, x, &y, lr, cfg, &mut rngs.dropout)?;
            history.step_losses.push(r.loss);
            loss_sum += r.loss * idx.len() as f64;
            correct += r.correct;
        }
        if !audit.is_clean() {
            return Err(Error::contract(format!("held-out clips reached a gradient update in epoch {epoch}")));
        }
        audit.epochs_checked += 1;

        let val_acc = match &val_groups {
            Some((fold, groups)) => Some(evaluate_fold(model_cfg, &params, &norm, dataset, *fold, groups)?.accuracy()),
            None => None,
        };
        let n = selection.len() as f64;
        let record = EpochRecord {
            epoch,
            lr,
            train_loss: loss_sum / n,
            train_acc: correct as f64 / n,
            val_acc,
            seconds: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}: lr {lr} loss {:.4} acc {:.3} val {}",
            record.train_loss,
            record.train_acc,
            val_acc.map_or("-".to_string(), |v| format!("{v:.3}"))
        );
        history.epochs.push(record);
        if let Some(acc) = val_acc {
            if best.as_ref().is_none_or(|(b, _)| acc > *b) {
                best = Some((acc, snapshot(&params, epoch)));
            }
        }
    }

    let last = snapshot(&params, cfg.epochs - 1);
    let (best_val_acc, best) = match best {
        Some((acc, ckpt)) => (Some(acc), ckpt),
        None => (None, last.clone()),
    };
    Ok(TrainOutcome {
        best,
        last,
        best_val_acc,
        history,
        audit,
    })
}
