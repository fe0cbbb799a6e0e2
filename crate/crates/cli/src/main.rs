mod analysis;
mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Desk-scale experiments on the RFSoC twin, and the job service.
///
/// Every experiment writes CSV/JSON artifacts plus a run manifest into
/// `--out`; all randomness is derived from `--seed`.
#[derive(Debug, Parser)]
#[command(name = "rftwin", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Directory for artifacts and the run manifest.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// TOML file with [board], [flux], [broker] and [worker] sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Voss-McCartney pink noise and its periodogram slope.
    PinkNoise(commands::signal::PinkNoiseArgs),
    /// Loopback SNR of one tone imaged into successive Nyquist zones.
    SnrSweep(commands::signal::SnrSweepArgs),
    /// Expected DAC output power against frequency, NRZ and Mix.
    PowerSweep(commands::signal::PowerSweepArgs),
    /// First-zone alias and zone index of a frequency.
    Alias(commands::signal::AliasArgs),
    /// Gang switch in the middle of a playback, seen by a loopback capture.
    FeedbackDemo(commands::device::FeedbackArgs),
    /// Trigger resynchronisation jitter and two-board alignment.
    SyncDemo(commands::device::SyncArgs),
    /// Noise spectrum of one bias output.
    BiasNoise(commands::bias::BiasNoiseArgs),
    /// Allan deviation of a long bias-current recording.
    Allan(commands::bias::AllanArgs),
    /// Cavity transmission against flux bias current.
    FluxMap(commands::bias::FluxMapArgs),
    /// Run the job broker in the foreground.
    Serve(commands::service::ServeArgs),
    /// Run a worker against a broker in the foreground.
    Work(commands::service::WorkArgs),
    /// Submit a job document to a broker.
    Submit(commands::service::SubmitArgs),
    /// Fetch the result of a job.
    Fetch(commands::service::FetchArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
