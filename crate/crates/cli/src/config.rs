//! Flat `key = value` configuration files merged with command-line flags.
//!
//! Every config key mirrors a long flag of the same name (`epsilon = 0.5`
//! and `--epsilon 0.5` are interchangeable); when both are given the flag
//! wins. Lines starting with `#` and blank lines are ignored. Unknown keys
//! are an error, so typos fail loudly instead of silently using defaults.
//!
//! The resolver records the final value of every key it serves, which the
//! commands write into `manifest.txt`; equal manifests therefore mean equal
//! resolved configurations.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};

pub struct Resolver {
    file: BTreeMap<String, String>,
    used: Vec<String>,
    resolved: BTreeMap<String, String>,
}

impl Resolver {
    pub fn new(config: Option<&Path>) -> Result<Self> {
        let mut file = BTreeMap::new();
        if let Some(path) = config {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config file {}", path.display()))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((key, value)) = line.split_once('=') else {
                    bail!(
                        "config {} line {}: expected `key = value`, got {line:?}",
                        path.display(),
                        lineno + 1
                    );
                };
                let key = key.trim().to_string();
                if file.insert(key.clone(), value.trim().to_string()).is_some() {
                    bail!("config {} line {}: duplicate key {key:?}", path.display(), lineno + 1);
                }
            }
        }
        Ok(Resolver {
            file,
            used: Vec::new(),
            resolved: BTreeMap::new(),
        })
    }

    /// Flag value if given, else config value, else the default; parsed as
    /// `T` with a usage error naming the key on failure.
    pub fn value<T>(&mut self, key: &str, flag: &Option<String>, default: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        let raw = self.raw(key, flag).unwrap_or_else(|| default.to_string());
        self.resolved.insert(key.to_string(), raw.clone());
        raw.parse::<T>()
            .map_err(|e| anyhow::anyhow!("invalid value {raw:?} for {key}: {e}"))
    }

    /// Like [`value`](Self::value) but without a default.
    pub fn optional<T>(&mut self, key: &str, flag: &Option<String>) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.raw(key, flag) {
            None => Ok(None),
            Some(raw) => {
                self.resolved.insert(key.to_string(), raw.clone());
                raw.parse::<T>()
                    .map(Some)
                    .map_err(|e| anyhow::anyhow!("invalid value {raw:?} for {key}: {e}"))
            }
        }
    }

    /// A path-valued key: the flag wins, else the config value.
    pub fn path(&mut self, key: &str, flag: &Option<PathBuf>) -> Option<PathBuf> {
        let flag_string = flag.as_ref().map(|p| p.display().to_string());
        let raw = self.raw(key, &flag_string)?;
        self.resolved.insert(key.to_string(), raw.clone());
        Some(PathBuf::from(raw))
    }

    fn raw(&mut self, key: &str, flag: &Option<String>) -> Option<String> {
        self.used.push(key.to_string());
        match flag {
            Some(v) => Some(v.clone()),
            None => self.file.get(key).cloned(),
        }
    }

    /// Rejects unrecognized config keys and hands back the resolved map for
    /// the manifest.
    pub fn finish(self) -> Result<BTreeMap<String, String>> {
        let unknown: Vec<&String> = self
            .file
            .keys()
            .filter(|k| !self.used.contains(k))
            .collect();
        if !unknown.is_empty() {
            bail!(
                "unknown config key(s): {}",
                unknown
                    .iter()
                    .map(|k| format!("{k:?}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            );
        }
        Ok(self.resolved)
    }
}

/// A comma-separated list of floats, used for grid-valued flags.
#[derive(Debug, Clone)]
pub struct FloatList(pub Vec<f64>);

impl FromStr for FloatList {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let values = s
            .split(',')
            .map(|part| {
                part.trim()
                    .parse::<f64>()
                    .map_err(|e| format!("{part:?}: {e}"))
            })
            .collect::<std::result::Result<Vec<f64>, String>>()?;
        if values.is_empty() {
            return Err("empty list".to_string());
        }
        Ok(FloatList(values))
    }
}

/// A comma-separated list of sample sizes.
#[derive(Debug, Clone)]
pub struct SizeList(pub Vec<usize>);

impl FromStr for SizeList {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let values = s
            .split(',')
            .map(|part| {
                part.trim()
                    .parse::<usize>()
                    .map_err(|e| format!("{part:?}: {e}"))
            })
            .collect::<std::result::Result<Vec<usize>, String>>()?;
        if values.is_empty() {
            return Err("empty list".to_string());
        }
        Ok(SizeList(values))
    }
}
