use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::cache::{atomic_write, CACHE_VERSION};
use super::checkpoint::CHECKPOINT_VERSION;
use super::config::{parse_pairs, RunConfig};
use crate::error::{Error, Result};

/// Record of one run: the command, its arguments and the effective
/// configuration. The text form is itself a valid run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub command: String,
    /// Command-line arguments by long flag name, without the leading dashes.
    pub args: BTreeMap<String, String>,
    pub config: RunConfig,
}

impl Manifest {
    pub const FILE_NAME: &'static str = "manifest.cfg";

    pub fn to_text(&self) -> String {
        let mut s = String::from("# run manifest\n");
        s.push_str(&format!("manifest.command = {}\n", self.command));
        s.push_str(&format!("manifest.version = {}\n", env!("CARGO_PKG_VERSION")));
        s.push_str(&format!("manifest.cache_format = LGT1 v{CACHE_VERSION}\n"));
        s.push_str(&format!("manifest.checkpoint_format = ACRN v{CHECKPOINT_VERSION}\n"));
        for (k, v) in &self.args {
            s.push_str(&format!("manifest.arg.{k} = {v}\n"));
        }
        s.push_str(&self.config.to_text());
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let config = RunConfig::parse(text)?;
        let pairs = parse_pairs(text)?;
        let command = pairs
            .get("manifest.command")
            .map(|(_, v)| v.clone())
            .ok_or_else(|| Error::parse(1, "manifest lacks manifest.command"))?;
        let args = pairs
            .iter()
            .filter_map(|(k, (_, v))| k.strip_prefix("manifest.arg.").map(|a| (a.to_string(), v.clone())))
            .collect();
        Ok(Manifest { command, args, config })
    }

    /// Writes `manifest.cfg` into `dir` and returns its path.
    pub fn write_to(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::from(e).in_file(dir))?;
        let path = dir.join(Self::FILE_NAME);
        let text = self.to_text();
        atomic_write(&path, |w| Ok(w.write_all(text.as_bytes())?))?;
        Ok(path)
    }
}
