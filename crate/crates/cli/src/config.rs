use std::path::Path;

use anyhow::Context;
use rfsoc_twin::bias::FluxMapParams;
use rfsoc_twin::rfsoc::BoardConfig;
use rfsoc_twin_scheduler::{BrokerConfig, ServiceConfig, WorkerConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub board: BoardConfig,
    pub flux: FluxMapParams,
    pub broker: BrokerConfig,
    pub worker: WorkerConfig,
}

impl CliConfig {
    /// Defaults, then the file, then `RFTWIN_*` variables for the service.
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let mut cfg: CliConfig = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => CliConfig::default(),
        };
        cfg.board.validate()?;
        let mut service = ServiceConfig {
            broker: cfg.broker.clone(),
            worker: cfg.worker.clone(),
        };
        service.apply_env(std::env::vars())?;
        cfg.broker = service.broker;
        cfg.worker = service.worker;
        Ok(cfg)
    }
}
