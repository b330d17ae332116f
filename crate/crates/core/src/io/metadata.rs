//! ESC-style metadata CSV: `filename,fold,target,category` plus an `esc10`
//! subset flag.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Which label set a metadata file describes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Variant {
    /// The 10-class subset flagged in the `esc10` column, targets remapped
    /// to `0..10` in ascending original order.
    Esc10,
    /// All 50 classes.
    #[default]
    Esc50,
    /// Any number of classes; `K` is one more than the largest target.
    Custom,
}

impl Variant {
    pub fn label(self) -> &'static str {
        match self {
            Variant::Esc10 => "esc10",
            Variant::Esc50 => "esc50",
            Variant::Custom => "custom",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "esc10" => Ok(Variant::Esc10),
            "esc50" => Ok(Variant::Esc50),
            "custom" => Ok(Variant::Custom),
            other => Err(Error::Config(format!("unknown dataset variant {other:?} (esc10, esc50, custom)"))),
        }
    }
}

/// Highest fold id accepted.
pub const MAX_FOLD: u8 = 5;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClipRecord {
    pub filename: String,
    pub fold: u8,
    pub target: u32,
    pub category: String,
}

impl ClipRecord {
    /// File name without its extension.
    pub fn clip_id(&self) -> &str {
        Path::new(&self.filename)
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or(&self.filename)
    }
}

/// Records with the class count and names they imply.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Metadata {
    pub records: Vec<ClipRecord>,
    pub num_classes: usize,
    /// Category per class index; `class_<k>` for classes with no record.
    pub class_names: Vec<String>,
}

/// The source-recording part of an ESC file name `{fold}-{source}-{take}-{target}.wav`.
fn source_key(clip_id: &str) -> Option<&str> {
    let parts: Vec<&str> = clip_id.split('-').collect();
    (parts.len() == 4).then(|| parts[1])
}

fn truthy(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" | "" => Some(false),
        _ => None,
    }
}

/// Parses metadata CSV text. Errors carry the 1-based line number.
pub fn parse_metadata(text: &str, variant: Variant) -> Result<Metadata> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::parse(1, format!("unreadable header: {e}")))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(c_file), Some(c_fold), Some(c_target), Some(c_cat)) =
        (col("filename"), col("fold"), col("target"), col("category"))
    else {
        return Err(Error::parse(1, "header must contain filename, fold, target and category"));
    };
    let c_esc10 = col("esc10");
    if variant == Variant::Esc10 && c_esc10.is_none() {
        return Err(Error::parse(1, "the esc10 variant needs an esc10 column"));
    }

    let mut records = Vec::new();
    let mut files: HashMap<String, usize> = HashMap::new();
    let mut sources: HashMap<String, (u8, usize)> = HashMap::new();
    let mut last_line = 1;
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(last_line + 1, |p| p.line() as usize);
            Error::parse(line, e.to_string())
        })?;
        let line = row.position().map_or(last_line + 1, |p| p.line() as usize);
        last_line = line;
        let field = |i: usize| row.get(i).unwrap_or("");
        let filename = field(c_file).to_string();
        if filename.is_empty() {
            return Err(Error::parse(line, "empty filename"));
        }
        let fold: u8 = field(c_fold)
            .parse()
            .ok()
            .filter(|f| (1..=MAX_FOLD).contains(f))
            .ok_or_else(|| Error::parse(line, format!("fold {:?} is not in 1..={MAX_FOLD}", field(c_fold))))?;
        let target: u32 = field(c_target)
            .parse()
            .map_err(|_| Error::parse(line, format!("target {:?} is not a class index", field(c_target))))?;
        if variant == Variant::Esc50 && target >= 50 {
            return Err(Error::parse(line, format!("target {target} outside 0..50")));
        }
        if variant == Variant::Custom && target >= 10_000 {
            return Err(Error::parse(line, format!("target {target} is implausibly large")));
        }
        if let Some(prev) = files.insert(filename.clone(), line) {
            return Err(Error::parse(line, format!("{filename} already listed on line {prev}")));
        }
        let record = ClipRecord {
            filename,
            fold,
            target,
            category: field(c_cat).to_string(),
        };
        if let Some(src) = source_key(record.clip_id()) {
            match sources.get(src) {
                Some(&(f, prev)) if f != fold => {
                    return Err(Error::parse(
                        line,
                        format!("source clip {src} is in fold {fold} here but fold {f} on line {prev}"),
                    ));
                }
                Some(_) => {}
                None => {
                    sources.insert(src.to_string(), (fold, line));
                }
            }
        }
        if variant == Variant::Esc10 {
            let flag = field(c_esc10.expect("checked above"));
            match truthy(flag) {
                Some(true) => {}
                Some(false) => continue,
                None => return Err(Error::parse(line, format!("esc10 flag {flag:?} is not a boolean"))),
            }
        }
        records.push(record);
    }

    let num_classes = match variant {
        Variant::Esc50 => 50,
        Variant::Esc10 => {
            let originals: BTreeSet<u32> = records.iter().map(|r| r.target).collect();
            if originals.len() != 10 {
                return Err(Error::Config(format!(
                    "esc10 subset has {} classes, expected 10",
                    originals.len()
                )));
            }
            let remap: BTreeMap<u32, u32> = originals.into_iter().zip(0..).collect();
            for r in &mut records {
                r.target = remap[&r.target];
            }
            10
        }
        Variant::Custom => records.iter().map(|r| r.target as usize + 1).max().unwrap_or(0),
    };
    if records.is_empty() {
        return Err(Error::Config("metadata lists no clips".into()));
    }
    if num_classes < 2 {
        return Err(Error::Config("metadata needs at least 2 classes".into()));
    }
    let mut class_names: Vec<String> = (0..num_classes).map(|k| format!("class_{k}")).collect();
    for r in &records {
        class_names[r.target as usize].clone_from(&r.category);
    }
    Ok(Metadata {
        records,
        num_classes,
        class_names,
    })
}

pub fn load_metadata(path: impl AsRef<Path>, variant: Variant) -> Result<Metadata> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
    parse_metadata(&text, variant).map_err(|e| e.in_file(path))
}
