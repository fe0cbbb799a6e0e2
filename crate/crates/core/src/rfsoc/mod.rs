//! Behavioural model of RFSoC boards.
//!
//! A [`Board`] owns sixteen FIFO-limited DAC channels and a bank of ADC
//! channels. DAC triggers turn loaded buffers into [`AnalogSignal`]s; an ADC
//! capture samples whatever is wired to its inputs at the ADC rate, so
//! higher-zone content folds exactly as it does on hardware. A [`Rig`] ties
//! boards, trigger paths and [`Wiring`] together and runs trigger schedules.

mod analog;
mod bench;
mod board;
mod capture;
mod config;
mod lti;
mod quantize;
mod sequence;
mod wiring;

pub use analog::{render, AnalogSignal, AnalogSource, LinkedSource, SamplingGrid, SwitchPoint, Tone};
pub use bench::{LoopbackBench, ToneReading};
pub use board::{AdcInputs, Board, ChannelState, Gang, GangSwitch};
pub use capture::{decode_binary, decode_binary_stream, Capture, CAPTURE_MAGIC};
pub use config::{BoardConfig, DEFAULT_ADC_NOISE_DENSITY, FIFO_DEPTH};
pub use quantize::Quantizer;
pub use sequence::{Repetition, RetriggerClash, Rig, Schedule, ScheduledTrigger, SequenceResult};
pub use wiring::{SourceRef, WireLink, Wiring};

use thiserror::Error;

use crate::signal::SignalError;
use crate::sync::{SyncError, TriggerTarget};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RfsocError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("fifo overflow: {len} samples exceed the {depth}-sample FIFO")]
    FifoOverflow { len: usize, depth: usize },
    #[error("retrigger violation{}: {target:?} trigger {interval_s:.3e} s after the previous one, minimum is {min_s:.3e} s", index.map(|i| format!(" at schedule index {i}")).unwrap_or_default())]
    RetriggerViolation {
        target: TriggerTarget,
        interval_s: f64,
        min_s: f64,
        index: Option<usize>,
    },
    #[error("not armed: {0}")]
    NotArmed(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Sync(#[from] SyncError),
}

impl RfsocError {
    /// Short machine-readable tag, stable across releases.
    pub fn kind(&self) -> &'static str {
        match self {
            RfsocError::InvalidArgument(_) => "invalid-argument",
            RfsocError::FifoOverflow { .. } => "fifo-overflow",
            RfsocError::RetriggerViolation { .. } => "retrigger-violation",
            RfsocError::NotArmed(_) => "not-armed",
            RfsocError::InvalidState(_) => "invalid-state",
            RfsocError::Config(_) => "config",
            RfsocError::Format(_) => "format",
            RfsocError::Signal(_) => "invalid-argument",
            RfsocError::Sync(_) => "invalid-argument",
        }
    }
}

pub type Result<T> = std::result::Result<T, RfsocError>;

pub(crate) fn invalid(msg: impl Into<String>) -> RfsocError {
    RfsocError::InvalidArgument(msg.into())
}
