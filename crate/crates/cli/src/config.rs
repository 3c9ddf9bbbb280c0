//! Plain `key: value` configuration files and flag/file/default resolution.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};

/// Every key a configuration file may set.
pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "corpus.utterances",
    "corpus.min_frames",
    "corpus.max_frames",
    "train.batch_size",
    "train.max_epochs",
    "train.patience",
    "train.weight_decay",
    "train.stop_below_dev_mse",
    "schedule.lr_initial",
    "schedule.first_cycle_steps",
    "schedule.cycle_growth",
    "schedule.peak_decay",
    "schedule.lr_min",
    "vocoder.backend",
    "vocoder.cmd",
    "vocoder.hop",
    "vocoder.sample_rate",
    "vocoder.iterations",
    "mushra.noise_level",
    "mushra.utterances_per_speaker",
];

#[derive(Clone, Debug, Default)]
pub struct ConfigFile {
    path: Option<PathBuf>,
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    /// Blank lines and lines starting with `#` are ignored; every other line
    /// is `key: value`. Unknown and repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once(':') else {
                bail!("line {}: expected `key: value`, got `{line}`", i + 1);
            };
            let (key, value) = (key.trim(), value.trim());
            if !KNOWN_KEYS.contains(&key) {
                bail!("line {}: unknown key `{key}`", i + 1);
            }
            if values.insert(key.to_string(), value.to_string()).is_some() {
                bail!("line {}: `{key}` set twice", i + 1);
            }
        }
        Ok(Self { path: None, values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("in config {}", path.display()))?;
        cfg.path = Some(path.to_path_buf());
        Ok(cfg)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// Resolves settings with precedence flag > config file > default and
/// remembers every resolved value for the run manifest.
#[derive(Debug)]
pub struct Settings {
    file: ConfigFile,
    resolved: BTreeMap<String, String>,
}

impl Settings {
    pub fn new(file: ConfigFile) -> Self {
        Self { file, resolved: BTreeMap::new() }
    }

    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => v,
            None => self.from_file(key)?.unwrap_or(default),
        };
        self.resolved.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    /// Like [`Settings::get`] for settings without a default.
    pub fn get_opt<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => Some(v),
            None => self.from_file(key)?,
        };
        if let Some(v) = &value {
            self.resolved.insert(key.to_string(), v.to_string());
        }
        Ok(value)
    }

    fn from_file<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        debug_assert!(KNOWN_KEYS.contains(&key), "unregistered key {key}");
        match self.file.raw(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|e| anyhow::anyhow!("config key `{key}`: cannot parse `{raw}`: {e}")),
        }
    }

    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.resolved
    }

    pub fn config_path(&self) -> Option<&Path> {
        self.file.path()
    }
}
