//! Low-noise bipolar DC current source.
//!
//! A 16-bit DAC sets the voltage across a sense resistor, so the output
//! current is a linear function of the code. Around that ideal value the
//! model adds white noise and a slow random-walk drift, and the bench
//! digitizer quantizes what it records. Statistics of recorded traces
//! (amplitude spectral density, overlapping Allan deviation) live here too,
//! along with a toy map of a flux-tuned cavity.

mod allan;
mod channel;
mod flux;
mod noise;
mod trace;

pub use allan::{log_spaced_taus, overlapping_allan_deviation};
pub use channel::{BiasChannel, DEFAULT_DRIFT_COEFF, DEFAULT_WHITE_DENSITY};
pub use flux::{cavity_transmission_map, FluxMapParams};
pub use noise::{amplitude_noise_spectrum, total_rms_noise, NoiseSpectrum};
pub use trace::{simulate_trace, CurrentTrace, TraceBench};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BiasError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("compliance: {0}")]
    Compliance(String),
}

impl BiasError {
    pub fn kind(&self) -> &'static str {
        match self {
            BiasError::InvalidArgument(_) => "invalid-argument",
            BiasError::Compliance(_) => "compliance",
        }
    }
}

pub type Result<T> = std::result::Result<T, BiasError>;

pub(crate) fn invalid(msg: impl Into<String>) -> BiasError {
    BiasError::InvalidArgument(msg.into())
}
