//! Merges command-line flags over an optional config file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{Error, Result};
use pcscale::io::Config;

/// Marks an error as a problem with the invocation rather than the data.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(message: impl Into<String>) -> Error {
    Error::new(Usage(message.into()))
}

pub struct Settings {
    config: Config,
    /// Relative paths in the config file resolve against its directory.
    base: PathBuf,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(p) = path else {
            return Ok(Self {
                config: Config::default(),
                base: PathBuf::new(),
            });
        };
        let config = Config::load(p).map_err(|e| usage(format!("config file: {e}")))?;
        Ok(Self {
            config,
            base: p.parent().map(Path::to_path_buf).unwrap_or_default(),
        })
    }

    /// Flag value if given, else the config value under `key`.
    pub fn get<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        self.config
            .parse(key)
            .map_err(|e| usage(format!("config file: {e}")))
    }

    pub fn require<T: FromStr>(&self, flag: Option<T>, key: &str, name: &str) -> Result<T> {
        self.get(flag, key)?.ok_or_else(|| {
            usage(format!(
                "missing {name}: pass --{name} or set '{key}' in the config"
            ))
        })
    }

    pub fn or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        Ok(self.get(flag, key)?.unwrap_or(default))
    }

    pub fn path(&self, flag: Option<PathBuf>, key: &str) -> Option<PathBuf> {
        flag.or_else(|| self.config.get(key).map(|v| self.base.join(v)))
    }

    pub fn require_path(&self, flag: Option<PathBuf>, key: &str) -> Result<PathBuf> {
        self.path(flag, key).ok_or_else(|| {
            usage(format!(
                "missing {key}: pass --{key} or set '{key}' in the config"
            ))
        })
    }
}
