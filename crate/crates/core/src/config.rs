//! Flat `key = value` job configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Command-line flags
//! override file values.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::trainer::TrainingConfig;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JobConfig {
    values: BTreeMap<String, String>,
    /// Directory relative paths in the file are resolved against.
    base: Option<PathBuf>,
}

impl JobConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: "expected key = value".into(),
            })?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: "empty key".into(),
                });
            }
            if values.insert(k.to_string(), v.trim().to_string()).is_some() {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("duplicate key {k}"),
                });
            }
        }
        Ok(JobConfig { values, base: None })
    }

    /// Loads a file; relative paths inside it resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_text(&text).map_err(|e| match e {
            Error::Parse { line, msg } => Error::config(format!("{}:{line}: {msg}", path.display())),
            other => other,
        })?;
        cfg.base = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    /// Flag override. Flag paths are taken relative to the working directory,
    /// so they are made absolute here when the file carries a base directory.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.to_string(), value.into());
    }

    pub fn set_path(&mut self, key: &str, path: &Path) {
        let p = if path.is_relative() && self.base.is_some() {
            std::env::current_dir().map(|d| d.join(path)).unwrap_or_else(|_| path.to_path_buf())
        } else {
            path.to_path_buf()
        };
        self.set(key, p.to_string_lossy());
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.values.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::config(format!(
                "unknown key {k} (allowed: {})",
                allowed.join(", ")
            ))),
            None => Ok(()),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::config(format!("missing required key {key}")))
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::config(format!("{key}: cannot parse {v:?}")))
            })
            .transpose()
    }

    fn resolve(&self, value: &str) -> PathBuf {
        let p = PathBuf::from(value);
        match &self.base {
            Some(b) if p.is_relative() => b.join(p),
            _ => p,
        }
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(|v| self.resolve(v))
    }

    /// Path that must already exist as a file.
    pub fn input_path(&self, key: &str) -> Result<PathBuf> {
        let p = self.resolve(self.require(key)?);
        if !p.is_file() {
            return Err(Error::config(format!("{key}: {} does not exist", p.display())));
        }
        Ok(p)
    }

    /// Path whose parent directory must exist.
    pub fn output_path(&self, key: &str) -> Result<PathBuf> {
        let p = self.resolve(self.require(key)?);
        check_output_path(key, &p)?;
        Ok(p)
    }

    /// Training hyperparameters on top of the defaults.
    pub fn training_config(&self) -> Result<TrainingConfig> {
        let mut c = TrainingConfig::default();
        macro_rules! field {
            ($name:ident) => {
                if let Some(v) = self.parsed(stringify!($name))? {
                    c.$name = v;
                }
            };
        }
        field!(batch_size);
        field!(epochs);
        field!(learning_rate);
        field!(rho);
        field!(epsilon);
        field!(clip_norm);
        field!(seed);
        field!(max_char_len);
        field!(hidden);
        c.validate()?;
        Ok(c)
    }
}

pub const TRAINING_KEYS: [&str; 9] = [
    "batch_size",
    "epochs",
    "learning_rate",
    "rho",
    "epsilon",
    "clip_norm",
    "seed",
    "max_char_len",
    "hidden",
];

pub fn check_output_path(key: &str, p: &Path) -> Result<()> {
    match p.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => Err(Error::config(format!(
            "{key}: directory {} does not exist",
            dir.display()
        ))),
        _ => Ok(()),
    }
}
