//! In-memory segment collections grouped by clip and fold.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::dsp::{LogGTSegment, SEGMENT_LEN};
use crate::error::{Error, Result};

/// All segments of one clip in a fold, in segment order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClipGroup {
    pub clip_id: String,
    pub label: usize,
    pub indices: Vec<usize>,
}

/// Segments (raw and augmented) of a labelled dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub segments: Vec<LogGTSegment>,
    pub num_classes: usize,
    /// Display names per class index; `class_<k>` when unknown.
    pub class_names: Vec<String>,
}

impl Dataset {
    /// Checks that every segment has the network input size, a label below
    /// `num_classes`, and that each clip keeps one label and one fold.
    pub fn new(segments: Vec<LogGTSegment>, num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::contract(format!("a dataset needs at least 2 classes, got {num_classes}")));
        }
        let mut seen: HashMap<&str, (u32, u8)> = HashMap::new();
        for s in &segments {
            if s.values.len() != SEGMENT_LEN {
                return Err(Error::dim(format!(
                    "segment {}#{} has {} values, expected {SEGMENT_LEN}",
                    s.clip_id,
                    s.index,
                    s.values.len()
                )));
            }
            if s.label as usize >= num_classes {
                return Err(Error::contract(format!(
                    "clip {} has label {} but only {num_classes} classes",
                    s.clip_id, s.label
                )));
            }
            match seen.get(s.clip_id.as_str()) {
                Some(&(label, fold)) if (label, fold) != (s.label, s.fold) => {
                    return Err(Error::contract(format!(
                        "clip {} appears with label/fold {label}/{fold} and {}/{}",
                        s.clip_id, s.label, s.fold
                    )));
                }
                Some(_) => {}
                None => {
                    seen.insert(&s.clip_id, (s.label, s.fold));
                }
            }
        }
        Ok(Dataset {
            segments,
            num_classes,
            class_names: (0..num_classes).map(|k| format!("class_{k}")).collect(),
        })
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.num_classes {
            return Err(Error::contract(format!(
                "{} class names for {} classes",
                names.len(),
                self.num_classes
            )));
        }
        self.class_names = names;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn folds(&self) -> BTreeSet<u8> {
        self.segments.iter().map(|s| s.fold).collect()
    }

    /// Clip ids per fold.
    pub fn clips_by_fold(&self) -> BTreeMap<u8, BTreeSet<String>> {
        let mut out: BTreeMap<u8, BTreeSet<String>> = BTreeMap::new();
        for s in &self.segments {
            out.entry(s.fold).or_default().insert(s.clip_id.clone());
        }
        out
    }

    /// Indices of every segment (raw and augmented) outside `held_out`.
    pub fn training_indices(&self, held_out: &[u8]) -> Vec<usize> {
        (0..self.segments.len())
            .filter(|&i| !held_out.contains(&self.segments[i].fold))
            .collect()
    }

    /// Original (non-augmented) segments of each clip in `fold`, sorted by
    /// clip id then segment index.
    pub fn clip_groups(&self, fold: u8) -> Vec<ClipGroup> {
        let mut groups: BTreeMap<&str, ClipGroup> = BTreeMap::new();
        for (i, s) in self.segments.iter().enumerate() {
            if s.fold != fold || s.is_augmented() {
                continue;
            }
            groups
                .entry(&s.clip_id)
                .or_insert_with(|| ClipGroup {
                    clip_id: s.clip_id.clone(),
                    label: s.label as usize,
                    indices: Vec::new(),
                })
                .indices
                .push(i);
        }
        let mut out: Vec<ClipGroup> = groups.into_values().collect();
        for g in &mut out {
            g.indices.sort_by_key(|&i| self.segments[i].index);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(clip: &str, index: u32, label: u32, fold: u8, augmented: u8) -> LogGTSegment {
        LogGTSegment {
            clip_id: clip.into(),
            index,
            label,
            fold,
            augmented,
            values: vec![0.0; SEGMENT_LEN],
        }
    }

    #[test]
    fn grouping_and_selection() {
        let ds = Dataset::new(
            vec![
                seg("b", 1, 1, 1, 0),
                seg("a", 0, 0, 1, 0),
                seg("b", 0, 1, 1, 0),
                seg("b", 0, 1, 1, 1),
                seg("c", 0, 0, 2, 0),
            ],
            2,
        )
        .unwrap();
        let groups = ds.clip_groups(1);
        assert_eq!(groups.len(), 2);
        assert_eq!((groups[0].clip_id.as_str(), groups[0].indices.clone()), ("a", vec![1]));
        // the augmented copy is left out and segments come back in index order
        assert_eq!((groups[1].clip_id.as_str(), groups[1].indices.clone()), ("b", vec![2, 0]));
        assert_eq!(ds.training_indices(&[1]), vec![4]);
        assert_eq!(ds.training_indices(&[2]), vec![0, 1, 2, 3]);
        assert_eq!(ds.folds().into_iter().collect::<Vec<_>>(), vec![1, 2]);
        assert!(ds.clip_groups(3).is_empty());
    }

    #[test]
    fn inconsistent_inputs_are_rejected() {
        assert!(matches!(Dataset::new(vec![seg("a", 0, 2, 1, 0)], 2), Err(Error::Contract(_))));
        let split = vec![seg("a", 0, 0, 1, 0), seg("a", 1, 0, 2, 0)];
        assert!(matches!(Dataset::new(split, 2), Err(Error::Contract(_))));
        let relabelled = vec![seg("a", 0, 0, 1, 0), seg("a", 1, 1, 1, 0)];
        assert!(matches!(Dataset::new(relabelled, 2), Err(Error::Contract(_))));
        let mut short = seg("a", 0, 0, 1, 0);
        short.values.pop();
        assert!(matches!(Dataset::new(vec![short], 2), Err(Error::Dimension(_))));
        assert!(Dataset::new(vec![], 1).is_err());
        let ds = Dataset::new(vec![], 2).unwrap();
        assert!(ds.with_class_names(vec!["x".into()]).is_err());
    }
}
