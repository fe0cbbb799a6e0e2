//! Service settings from a TOML file with `RFTWIN_*` environment overrides.
//!
//! ```toml
//! [broker]
//! listen = "127.0.0.1:8750"
//! store_dir = "rftwin-store"
//! worker_token = "change-me"
//! lease_s = 300
//! compact_every = 1000
//!
//! [worker]
//! broker_url = "http://127.0.0.1:8750"
//! worker_token = "change-me"
//! poll_interval_ms = 500
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ENV_PREFIX: &str = "RFTWIN_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value {value:?} for {var}")]
    Env { var: String, value: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BrokerConfig {
    pub listen: String,
    pub store_dir: PathBuf,
    pub worker_token: String,
    pub lease_s: u64,
    /// Compact the log after this many appends; 0 disables.
    pub compact_every: usize,
}

impl Default for BrokerConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8750".into(),
            store_dir: PathBuf::from("rftwin-store"),
            worker_token: "change-me".into(),
            lease_s: 300,
            compact_every: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkerConfig {
    pub broker_url: String,
    pub worker_token: String,
    pub poll_interval_ms: u64,
}

impl Default for WorkerConfig {
    fn default() -> Self {
        Self {
            broker_url: "http://127.0.0.1:8750".into(),
            worker_token: "change-me".into(),
            poll_interval_ms: 500,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub broker: BrokerConfig,
    pub worker: WorkerConfig,
}

fn parse_env<T: std::str::FromStr>(var: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::Env {
        var: var.to_string(),
        value: value.to_string(),
    })
}

impl ServiceConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(s)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Defaults, then the file if given, then the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => Self::from_path(p)?,
            None => Self::default(),
        };
        cfg.apply_env(std::env::vars())?;
        Ok(cfg)
    }

    /// Applies `RFTWIN_*` overrides. `RFTWIN_WORKER_TOKEN` sets the token on
    /// both sides.
    pub fn apply_env<I, K, V>(&mut self, vars: I) -> Result<(), ConfigError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        for (k, v) in vars {
            let (k, v) = (k.as_ref(), v.as_ref());
            let Some(name) = k.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            match name {
                "LISTEN" => self.broker.listen = v.to_string(),
                "STORE_DIR" => self.broker.store_dir = PathBuf::from(v),
                "WORKER_TOKEN" => {
                    self.broker.worker_token = v.to_string();
                    self.worker.worker_token = v.to_string();
                }
                "LEASE_S" => self.broker.lease_s = parse_env(k, v)?,
                "COMPACT_EVERY" => self.broker.compact_every = parse_env(k, v)?,
                "BROKER_URL" => self.worker.broker_url = v.to_string(),
                "POLL_INTERVAL_MS" => self.worker.poll_interval_ms = parse_env(k, v)?,
                _ => {}
            }
        }
        Ok(())
    }
}
