//! Clip-level inference, cross-validation, confusion matrices and the
//! attention/augmentation ablation harness.

mod confusion;
mod predict;
mod report;


use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

pub use confusion::{confusion_matrix, ConfusionMatrix};
pub use predict::{argmax, average_probabilities, predict_clip, segment_probabilities, INFER_BATCH};
pub use report::{write_ablation_csv, AblationRow, EvalReport, FoldScore};

use crate::augment::AugmentConfig;
use crate::dataset::{ClipGroup, Dataset};
use crate::dsp::{LogGTSegment, NormStats};
use crate::error::{Error, Result};
use crate::model::{ACRNNConfig, ModelParams, Placement};
use crate::train::{train, Checkpoint, TrainConfig, TrainOutcome};

/// Prediction for one clip.
#[derive(Clone, Debug, PartialEq)]
pub struct ClipPrediction {
    pub clip_id: String,
    pub truth: usize,
    pub predicted: usize,
    pub probs: Vec<f32>,
}

/// Clip predictions for one fold.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldEvaluation {
    pub fold: u8,
    pub clips: Vec<ClipPrediction>,
    pub confusion: ConfusionMatrix,
}

impl FoldEvaluation {
    pub fn accuracy(&self) -> f64 {
        self.confusion.accuracy()
    }
}

/// Scores `groups` (clips of `fold`, see [`Dataset::clip_groups`]) with
/// segment-averaged predictions.
pub fn evaluate_fold(
    cfg: &ACRNNConfig,
    params: &ModelParams<f32>,
    norm: &NormStats,
    dataset: &Dataset,
    fold: u8,
    groups: &[ClipGroup],
) -> Result<FoldEvaluation> {
    if groups.is_empty() {
        return Err(Error::contract(format!("fold {fold} has no clips to evaluate")));
    }
    let segs: Vec<&LogGTSegment> = groups
        .iter()
        .flat_map(|g| g.indices.iter().map(|&i| &dataset.segments[i]))
        .collect();
    let probs = segment_probabilities(cfg, params, norm, &segs)?;
    let mut confusion = ConfusionMatrix::zeros(cfg.num_classes);
    let mut clips = Vec::with_capacity(groups.len());
    let mut offset = 0;
    for g in groups {
        let rows = &probs[offset..offset + g.indices.len()];
        offset += g.indices.len();
        let (predicted, mean) = average_probabilities(rows)?;
        confusion.record(g.label, predicted)?;
        clips.push(ClipPrediction {
            clip_id: g.clip_id.clone(),
            truth: g.label,
            predicted,
            probs: mean,
        });
    }
    Ok(FoldEvaluation { fold, clips, confusion })
}

/// Evaluates a checkpoint on the original segments of `fold`.
pub fn evaluate_checkpoint(ckpt: &Checkpoint, dataset: &Dataset, fold: u8) -> Result<FoldEvaluation> {
    let groups = dataset.clip_groups(fold);
    evaluate_fold(&ckpt.config, &ckpt.params, &ckpt.norm, dataset, fold, &groups)
}

/// Fold id to clip ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldSplit {
    folds: BTreeMap<u8, BTreeSet<String>>,
}

impl FoldSplit {
    /// Rejects empty folds and clips listed in more than one fold.
    pub fn new(folds: BTreeMap<u8, BTreeSet<String>>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (fold, clips) in &folds {
            if clips.is_empty() {
                return Err(Error::contract(format!("fold {fold} has zero clips")));
            }
            for c in clips {
                if !seen.insert(c) {
                    return Err(Error::contract(format!("clip {c} appears in more than one fold")));
                }
            }
        }
        Ok(FoldSplit { folds })
    }

    /// The folds recorded on the dataset's segments.
    pub fn from_dataset(dataset: &Dataset) -> Result<Self> {
        Self::new(dataset.clips_by_fold())
    }

    pub fn folds(&self) -> impl Iterator<Item = u8> + '_ {
        self.folds.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.folds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }

    pub fn clips(&self, fold: u8) -> Option<&BTreeSet<String>> {
        self.folds.get(&fold)
    }

    /// Checks that the split lists exactly the dataset's clips, each under
    /// the fold recorded on its segments.
    pub fn check_covers(&self, dataset: &Dataset) -> Result<()> {
        if self.folds != dataset.clips_by_fold() {
            return Err(Error::contract("fold split does not match the dataset's fold assignment"));
        }
        Ok(())
    }
}

/// One fold of a cross-validation run.
#[derive(Clone, Debug)]
pub struct FoldRun {
    pub fold: u8,
    pub outcome: TrainOutcome,
    /// Scores of the final-epoch weights.
    pub last: FoldEvaluation,
    /// Scores of the best-validation weights.
    pub best: FoldEvaluation,
}

#[derive(Clone, Debug)]
pub struct CrossValidation {
    pub runs: Vec<FoldRun>,
    pub report: EvalReport,
}

/// Trains one model per fold on the remaining folds (seed `seed + fold`)
/// and scores the fold's clips. Final-epoch accuracy is the primary
/// metric; best-epoch accuracy is reported alongside. Folds run on the
/// rayon pool; results do not depend on scheduling.
pub fn cross_validate(
    dataset: &Dataset,
    model_cfg: &ACRNNConfig,
    train_cfg: &TrainConfig,
    split: &FoldSplit,
) -> Result<CrossValidation> {
    split.check_covers(dataset)?;
    let folds: Vec<u8> = split.folds().collect();
    let runs: Vec<FoldRun> = folds
        .par_iter()
        .map(|&fold| {
            let cfg = TrainConfig {
                seed: train_cfg.seed.wrapping_add(u64::from(fold)),
                ..train_cfg.clone()
            };
            let outcome = train(dataset, model_cfg, &cfg, Some(fold))?;
            let test_clips = split.clips(fold).expect("fold taken from the split");
            if !outcome.audit.is_clean() || !outcome.audit.norm_clips.is_disjoint(test_clips) {
                return Err(Error::contract(format!("fold {fold} leaked test clips into training")));
            }
            let last = evaluate_checkpoint(&outcome.last, dataset, fold)?;
            let best = evaluate_checkpoint(&outcome.best, dataset, fold)?;
            Ok(FoldRun { fold, outcome, last, best })
        })
        .collect::<Result<_>>()?;
    let mut confusion = ConfusionMatrix::zeros(dataset.num_classes);
    for r in &runs {
        confusion.merge(&r.last.confusion)?;
    }
    let report = EvalReport {
        folds: runs
            .iter()
            .map(|r| FoldScore {
                fold: r.fold,
                clips: r.last.clips.len(),
                accuracy: r.last.accuracy(),
                best_accuracy: Some(r.best.accuracy()),
            })
            .collect(),
        confusion,
        class_names: dataset.class_names.clone(),
    };
    Ok(CrossValidation { runs, report })
}

/// Cross-validates once per placement with otherwise identical settings
/// and seed.
pub fn ablate(
    dataset: &Dataset,
    model_cfg: &ACRNNConfig,
    train_cfg: &TrainConfig,
    split: &FoldSplit,
    placements: &[Placement],
) -> Result<Vec<AblationRow>> {
    placements
        .iter()
        .map(|&p| {
            let cfg = ACRNNConfig {
                attention_placement: p,
                ..model_cfg.clone()
            };
            let cv = cross_validate(dataset, &cfg, train_cfg, split)?;
            Ok(AblationRow::from_report(p.label(), &cv.report))
        })
        .collect()
}

/// Attention on/off crossed with augmentation on/off, labelled `base`,
/// `attention`, `augment` and `attention+augment`. Attention uses the
/// configured placement (l10 when the configuration has none); augmentation
/// uses `train_cfg.augment`, and "off" means original segments only with
/// mixup disabled.
pub fn ablate_grid(
    dataset: &Dataset,
    model_cfg: &ACRNNConfig,
    train_cfg: &TrainConfig,
    split: &FoldSplit,
) -> Result<Vec<AblationRow>> {
    let placement = match model_cfg.attention_placement {
        Placement::None => Placement::L10,
        p => p,
    };
    let augment_off = AugmentConfig {
        copies_per_clip: 0,
        mixup_enabled: false,
        ..train_cfg.augment.clone()
    };
    let grid = [
        ("base", Placement::None, &augment_off),
        ("attention", placement, &augment_off),
        ("augment", Placement::None, &train_cfg.augment),
        ("attention+augment", placement, &train_cfg.augment),
    ];
    grid.into_iter()
        .map(|(label, p, augment)| {
            let m = ACRNNConfig {
                attention_placement: p,
                ..model_cfg.clone()
            };
            let t = TrainConfig {
                augment: augment.clone(),
                ..train_cfg.clone()
            };
            let cv = cross_validate(dataset, &m, &t, split)?;
            Ok(AblationRow::from_report(label, &cv.report))
        })
        .collect()
}
