pub mod bias;
pub mod device;
pub mod service;
pub mod signal;

use crate::config::CliConfig;
use crate::{Cli, Command, Global};

/// Everything a command needs besides its own flags.
pub struct Ctx {
    pub global: Global,
    pub config: CliConfig,
}

pub fn dispatch(cli: Cli) -> anyhow::Result<()> {
    let config = CliConfig::load(cli.global.config.as_deref())?;
    let ctx = Ctx {
        global: cli.global,
        config,
    };
    match cli.command {
        Command::PinkNoise(a) => signal::pink_noise(&ctx, a),
        Command::SnrSweep(a) => signal::snr_sweep(&ctx, a),
        Command::PowerSweep(a) => signal::power_sweep(&ctx, a),
        Command::Alias(a) => signal::alias(&ctx, a),
        Command::FeedbackDemo(a) => device::feedback_demo(&ctx, a),
        Command::SyncDemo(a) => device::sync_demo(&ctx, a),
        Command::BiasNoise(a) => bias::bias_noise(&ctx, a),
        Command::Allan(a) => bias::allan(&ctx, a),
        Command::FluxMap(a) => bias::flux_map(&ctx, a),
        Command::Serve(a) => service::serve(&ctx, a),
        Command::Work(a) => service::work(&ctx, a),
        Command::Submit(a) => service::submit(&ctx, a),
        Command::Fetch(a) => service::fetch(&ctx, a),
    }
}
