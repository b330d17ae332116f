//! Run configuration files: one `key = value` per line, `#` comments,
//! section prefixes such as `train.lr0` or `model.attention_placement`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::metadata::Variant;
use crate::error::{Error, Result};
use crate::model::{ACRNNConfig, Placement, RnnAttentionForm};
use crate::train::TrainConfig;

/// Network width presets selectable with `model.preset`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ModelPreset {
    #[default]
    Full,
    Narrow,
}

impl ModelPreset {
    pub fn label(self) -> &'static str {
        match self {
            ModelPreset::Full => "full",
            ModelPreset::Narrow => "narrow",
        }
    }

    fn config(self) -> ACRNNConfig {
        match self {
            ModelPreset::Full => ACRNNConfig::default(),
            ModelPreset::Narrow => ACRNNConfig::narrow(ACRNNConfig::default().num_classes),
        }
    }
}

impl FromStr for ModelPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(ModelPreset::Full),
            "narrow" => Ok(ModelPreset::Narrow),
            other => Err(Error::Config(format!("unknown model preset {other:?} (full, narrow)"))),
        }
    }
}

/// Everything a run needs besides the command itself.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub meta: Option<PathBuf>,
    pub audio_dir: Option<PathBuf>,
    pub variant: Variant,
    pub cache: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    /// Drives training, augmentation and mixup randomness.
    pub seed: u64,
    pub preset: ModelPreset,
    /// `num_classes` is replaced by the dataset's class count at run time.
    pub model: ACRNNConfig,
    /// `train.augment.rng_seed` and `train.seed` always equal `seed`.
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            meta: None,
            audio_dir: None,
            variant: Variant::default(),
            cache: None,
            output_dir: None,
            seed: 0,
            preset: ModelPreset::Full,
            model: ACRNNConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

/// Prefix of keys that only carry provenance in a manifest.
pub const MANIFEST_PREFIX: &str = "manifest.";

fn value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::parse(line, format!("{key}: cannot parse {raw:?}")))
}

fn boolean(line: usize, key: &str, raw: &str) -> Result<bool> {
    match raw {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::parse(line, format!("{key}: expected true or false, got {raw:?}"))),
    }
}

fn at_line<T>(line: usize, key: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::parse(line, format!("{key}: {e}")))
}

/// `key = value` pairs with their line numbers. Keys must be unique.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, (usize, String)>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split_once('#').map_or(raw, |(before, _)| before).trim();
        if content.is_empty() {
            continue;
        }
        let (key, val) = content
            .split_once('=')
            .ok_or_else(|| Error::parse(line, format!("expected `key = value`, got {content:?}")))?;
        let (key, val) = (key.trim(), val.trim());
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(Error::parse(line, format!("invalid key {key:?}")));
        }
        if let Some((prev, _)) = out.insert(key.to_string(), (line, val.to_string())) {
            return Err(Error::parse(line, format!("{key} already set on line {prev}")));
        }
    }
    Ok(out)
}

impl RunConfig {
    /// Parses a configuration file. Unknown keys are rejected; `manifest.*`
    /// keys are accepted and ignored so a manifest can be fed back in.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = parse_pairs(text)?;
        let mut cfg = RunConfig::default();
        // the preset decides the defaults that later model keys override
        if let Some((line, raw)) = pairs.remove("model.preset") {
            cfg.preset = at_line(line, "model.preset", raw.parse())?;
            cfg.model = cfg.preset.config();
        }
        for (key, (line, raw)) in pairs {
            let l = line;
            let raw = raw.as_str();
            let aug = &mut cfg.train.augment;
            match key.as_str() {
                "seed" => cfg.seed = value(l, &key, raw)?,
                "data.meta" => cfg.meta = Some(PathBuf::from(raw)),
                "data.audio_dir" => cfg.audio_dir = Some(PathBuf::from(raw)),
                "data.variant" => cfg.variant = at_line(l, &key, raw.parse())?,
                "data.cache" => cfg.cache = Some(PathBuf::from(raw)),
                "output.dir" => cfg.output_dir = Some(PathBuf::from(raw)),
                "train.batch_size" => cfg.train.batch_size = value(l, &key, raw)?,
                "train.epochs" => cfg.train.epochs = value(l, &key, raw)?,
                "train.lr0" => cfg.train.lr0 = value(l, &key, raw)?,
                "train.lr_decay_factor" => cfg.train.lr_decay_factor = value(l, &key, raw)?,
                "train.lr_decay_every" => cfg.train.lr_decay_every = value(l, &key, raw)?,
                "train.momentum" => cfg.train.momentum = value(l, &key, raw)?,
                "train.l2_coeff" => cfg.train.l2_coeff = value(l, &key, raw)?,
                "augment.stretch_min" => aug.stretch_range.0 = value(l, &key, raw)?,
                "augment.stretch_max" => aug.stretch_range.1 = value(l, &key, raw)?,
                "augment.shift_min" => aug.shift_range_semitones.0 = value(l, &key, raw)?,
                "augment.shift_max" => aug.shift_range_semitones.1 = value(l, &key, raw)?,
                "augment.copies_per_clip" => aug.copies_per_clip = value(l, &key, raw)?,
                "augment.mixup_alpha" => aug.mixup_alpha = value(l, &key, raw)?,
                "augment.mixup_enabled" => aug.mixup_enabled = boolean(l, &key, raw)?,
                "model.attention_placement" => {
                    cfg.model.attention_placement = at_line(l, &key, Placement::from_str(raw))?;
                }
                "model.rnn_attention_form" => {
                    cfg.model.rnn_attention_form = at_line(l, &key, RnnAttentionForm::from_str(raw))?;
                }
                "model.conv_widths" => {
                    let widths: Vec<usize> = raw
                        .split(',')
                        .map(|w| value(l, &key, w.trim()))
                        .collect::<Result<_>>()?;
                    cfg.model.conv_widths = widths
                        .try_into()
                        .map_err(|_| Error::parse(l, "model.conv_widths needs exactly 8 comma-separated widths"))?;
                }
                "model.gru_hidden" => cfg.model.gru_hidden = value(l, &key, raw)?,
                "model.dropout_p" => cfg.model.dropout_p = value(l, &key, raw)?,
                k if k.starts_with(MANIFEST_PREFIX) => {}
                _ => return Err(Error::parse(l, format!("unknown key {key:?}"))),
            }
        }
        cfg.sync();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
        Self::parse(&text).map_err(|e| e.in_file(path))
    }

    /// Copies the shared seed and L2 coefficient into the nested configs.
    pub fn sync(&mut self) {
        self.train.seed = self.seed;
        self.train.augment.rng_seed = self.seed;
        self.model.l2_coeff = self.train.l2_coeff;
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.model.validate()
    }

    /// Model configuration for a dataset with `num_classes` classes.
    pub fn model_for(&self, num_classes: usize) -> ACRNNConfig {
        ACRNNConfig {
            num_classes,
            ..self.model.clone()
        }
    }

    /// Applies `key = value` overrides on top of this configuration. Values
    /// go through the same parser as file entries; parse errors name the
    /// offending override. Overriding `model.preset` resets the widths to
    /// that preset's.
    pub fn with_overrides(&self, overrides: &[(String, String)]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        if let Some((k, _)) = overrides.iter().find(|(k, v)| k.contains(['\n', '=', '#']) || v.contains(['\n', '#'])) {
            return Err(Error::Config(format!("override {k:?} contains a reserved character")));
        }
        let mut dropped: BTreeSet<&str> = overrides.iter().map(|(k, _)| k.as_str()).collect();
        if dropped.contains("model.preset") {
            dropped.extend(["model.conv_widths", "model.gru_hidden"]);
        }
        let mut text = String::new();
        let mut base_lines = 0;
        for line in self.to_text().lines() {
            let key = line.split_once('=').map_or("", |(k, _)| k.trim());
            if !dropped.contains(key) {
                text.push_str(line);
                text.push('\n');
                base_lines += 1;
            }
        }
        for (k, v) in overrides {
            let _ = writeln!(text, "{k} = {v}");
        }
        RunConfig::parse(&text).map_err(|e| match e {
            Error::Parse { line, message } if line > base_lines => {
                let (k, v) = &overrides[line - base_lines - 1];
                Error::Config(format!("{k}={v}: {message}"))
            }
            other => other,
        })
    }

    /// Canonical text form; [`RunConfig::parse`] reads it back to an equal
    /// value.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        kv("seed", self.seed.to_string());
        for (k, v) in [
            ("data.meta", path(&self.meta)),
            ("data.audio_dir", path(&self.audio_dir)),
            ("data.cache", path(&self.cache)),
            ("output.dir", path(&self.output_dir)),
        ] {
            if let Some(v) = v {
                kv(k, v);
            }
        }
        kv("data.variant", self.variant.to_string());
        let t = &self.train;
        kv("train.batch_size", t.batch_size.to_string());
        kv("train.epochs", t.epochs.to_string());
        kv("train.lr0", t.lr0.to_string());
        kv("train.lr_decay_factor", t.lr_decay_factor.to_string());
        kv("train.lr_decay_every", t.lr_decay_every.to_string());
        kv("train.momentum", t.momentum.to_string());
        kv("train.l2_coeff", t.l2_coeff.to_string());
        let a = &t.augment;
        kv("augment.stretch_min", a.stretch_range.0.to_string());
        kv("augment.stretch_max", a.stretch_range.1.to_string());
        kv("augment.shift_min", a.shift_range_semitones.0.to_string());
        kv("augment.shift_max", a.shift_range_semitones.1.to_string());
        kv("augment.copies_per_clip", a.copies_per_clip.to_string());
        kv("augment.mixup_alpha", a.mixup_alpha.to_string());
        kv("augment.mixup_enabled", a.mixup_enabled.to_string());
        let m = &self.model;
        kv("model.preset", self.preset.label().to_string());
        kv("model.attention_placement", m.attention_placement.to_string());
        kv("model.rnn_attention_form", m.rnn_attention_form.to_string());
        kv(
            "model.conv_widths",
            m.conv_widths.iter().map(ToString::to_string).collect::<Vec<_>>().join(","),
        );
        kv("model.gru_hidden", m.gru_hidden.to_string());
        kv("model.dropout_p", m.dropout_p.to_string());
        s
    }
}
