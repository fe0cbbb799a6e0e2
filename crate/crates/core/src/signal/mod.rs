//! Frequency-domain math for direct RF sampling.
//!
//! Everything here is a pure function of its inputs. Frequencies are in Hz
//! and sample rates in samples per second throughout.

mod balun;
mod nyquist;
mod pink;
mod power;
mod reconstruction;
mod spectrum;

pub use balun::BalunModel;
pub(crate) use balun::Section;
pub use nyquist::{alias_to_first_zone, image_frequencies, nyquist_zone_of, zone_image};
pub use pink::{voss_pink_noise, DEFAULT_VOSS_ROWS};
pub use power::{band_mean_dbm, expected_output_power_dbm, PowerModel, CALIBRATION_TARGET_DBM};
pub use reconstruction::{reconstruction_response, sin_pi, sinc_pi};
pub use spectrum::{snr, spectrum, spectrum_windowed, Spectrum, Window, DEFAULT_NOISE_BANDWIDTH_HZ};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, SignalError>;

pub(crate) fn invalid(msg: impl Into<String>) -> SignalError {
    SignalError::InvalidArgument(msg.into())
}

/// DAC decoder mode. Selects the per-sample reconstruction kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DecoderMode {
    /// Non-return-to-zero: each sample is held for a full period.
    #[default]
    Nrz,
    /// Mix mode: the held value is inverted halfway through the period.
    Mix,
}

impl std::fmt::Display for DecoderMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DecoderMode::Nrz => f.write_str("nrz"),
            DecoderMode::Mix => f.write_str("mix"),
        }
    }
}

impl std::str::FromStr for DecoderMode {
    type Err = SignalError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nrz" | "normal" => Ok(DecoderMode::Nrz),
            "mix" | "mixed" => Ok(DecoderMode::Mix),
            other => Err(invalid(format!("unknown decoder mode `{other}`"))),
        }
    }
}

/// A finite real sample sequence with its sample rate.
///
/// Samples are full-scale normalised, so a converter's full range maps to
/// `[-1, 1]`. Values outside that range are allowed here; converters clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate_hz: f64,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid("waveform must contain at least one sample"));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(invalid(format!("sample rate must be positive, got {sample_rate_hz}")));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(invalid(format!("sample {i} is not finite")));
        }
        Ok(Self { samples, sample_rate_hz })
    }

    /// A tone `amplitude * cos(2π f t + phase)` sampled at `t = k / sample_rate`.
    pub fn tone(len: usize, sample_rate_hz: f64, f_hz: f64, amplitude: f64, phase_rad: f64) -> Result<Self> {
        let samples = (0..len)
            .map(|k| {
                let t = k as f64 / sample_rate_hz;
                amplitude * (std::f64::consts::TAU * f_hz * t + phase_rad).cos()
            })
            .collect();
        Self::new(samples, sample_rate_hz)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    /// Sampling period `T = 1 / sample_rate`.
    pub fn period_s(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn waveform_rejects_bad_input() {
        assert!(Waveform::new(vec![], 1.0).is_err());
        assert!(Waveform::new(vec![0.0], 0.0).is_err());
        assert!(Waveform::new(vec![0.0], -1.0).is_err());
        assert!(Waveform::new(vec![f64::NAN], 1.0).is_err());
        assert!(Waveform::new(vec![0.5, f64::INFINITY], 1.0).is_err());
    }

    #[test]
    fn waveform_duration() {
        let w = Waveform::new(vec![0.0; 65_536], 6.144e9).unwrap();
        assert!((w.duration_s() - 10.6667e-6).abs() < 1e-10);
    }

    #[test]
    fn decoder_mode_parses() {
        assert_eq!("NRZ".parse::<DecoderMode>().unwrap(), DecoderMode::Nrz);
        assert_eq!("mix".parse::<DecoderMode>().unwrap(), DecoderMode::Mix);
        assert!("rz".parse::<DecoderMode>().is_err());
    }
}
