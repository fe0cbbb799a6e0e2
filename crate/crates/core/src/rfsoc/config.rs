use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Quantizer, Result, RfsocError};
use crate::signal::DecoderMode;
use crate::sync::{ClockDomain, MASTER_CLOCK_HZ};

/// Samples held by each DAC FIFO and captured per ADC trigger.
pub const FIFO_DEPTH: usize = 65_536;

/// Rated converter ceilings.
pub const MAX_DAC_RATE_HZ: f64 = 6.554e9;
pub const MAX_ADC_RATE_HZ: f64 = 2.058e9;

/// ADC input noise density in full-scale units per √Hz.
///
/// Chosen so an 800 MHz full-scale NRZ tone looped back from a 6.144 GS/s
/// DAC through the balun, captured at 1.96608 GS/s and analysed with a Hann
/// window over a 100 MHz noise band, reads an SNR of about 2×10³
/// (see [`LoopbackBench`](super::LoopbackBench)).
pub const DEFAULT_ADC_NOISE_DENSITY: f64 = 6.6e-7;

/// Static board limits and clocking.
///
/// Loaded from TOML; every key is optional and falls back to the defaults
/// below.
///
/// ```toml
/// n_dac_channels = 16
/// n_adc_channels = 8
/// dac_bits = 14
/// adc_bits = 12
/// fifo_depth = 65536
/// master_clock_hz = 122.88e6
/// dac_rate_multiplier = 50      # 6.144 GS/s
/// adc_rate_multiplier = 16      # 1.96608 GS/s
/// decoder_mode = "nrz"          # or "mix"
/// min_retrigger_interval_s = 30e-6
/// switch_latency_s = 5e-9
/// dac_latency_s = 0.0
/// adc_noise_density = 6.6e-7    # full scale per sqrt(Hz)
/// loopback = false
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoardConfig {
    pub n_dac_channels: usize,
    pub n_adc_channels: usize,
    pub dac_bits: u32,
    pub adc_bits: u32,
    pub fifo_depth: usize,
    pub master_clock_hz: f64,
    pub dac_rate_multiplier: u32,
    pub adc_rate_multiplier: u32,
    pub decoder_mode: DecoderMode,
    pub min_retrigger_interval_s: f64,
    pub switch_latency_s: f64,
    pub dac_latency_s: f64,
    pub adc_noise_density: f64,
    pub loopback: bool,
}

impl Default for BoardConfig {
    fn default() -> Self {
        Self {
            n_dac_channels: 16,
            n_adc_channels: 8,
            dac_bits: 14,
            adc_bits: 12,
            fifo_depth: FIFO_DEPTH,
            master_clock_hz: MASTER_CLOCK_HZ,
            dac_rate_multiplier: 50,
            adc_rate_multiplier: 16,
            decoder_mode: DecoderMode::Nrz,
            min_retrigger_interval_s: 30e-6,
            switch_latency_s: 5e-9,
            dac_latency_s: 0.0,
            adc_noise_density: DEFAULT_ADC_NOISE_DENSITY,
            loopback: false,
        }
    }
}

fn config_err(msg: impl Into<String>) -> RfsocError {
    RfsocError::Config(msg.into())
}

impl BoardConfig {
    pub fn dac_rate_hz(&self) -> f64 {
        self.dac_rate_multiplier as f64 * self.master_clock_hz
    }

    pub fn adc_rate_hz(&self) -> f64 {
        self.adc_rate_multiplier as f64 * self.master_clock_hz
    }

    pub fn dac_quantizer(&self) -> Quantizer {
        Quantizer::new(self.dac_bits).expect("validated")
    }

    pub fn adc_quantizer(&self) -> Quantizer {
        Quantizer::new(self.adc_bits).expect("validated")
    }

    pub fn clock(&self) -> ClockDomain {
        ClockDomain::new(self.master_clock_hz, 0.0).expect("validated")
    }

    /// Length of one ADC capture in seconds.
    pub fn capture_duration_s(&self) -> f64 {
        self.fifo_depth as f64 / self.adc_rate_hz()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_dac_channels != 16 {
            return Err(config_err(format!(
                "the board has 16 DAC channels in two gangs of eight, got {}",
                self.n_dac_channels
            )));
        }
        if !(1..=16).contains(&self.n_adc_channels) {
            return Err(config_err(format!("ADC channel count must be 1..=16, got {}", self.n_adc_channels)));
        }
        if self.fifo_depth != FIFO_DEPTH {
            return Err(config_err(format!("FIFO depth is fixed at {FIFO_DEPTH}, got {}", self.fifo_depth)));
        }
        if Quantizer::new(self.dac_bits).is_none() || Quantizer::new(self.adc_bits).is_none() {
            return Err(config_err("converter bit depths must be in 2..=16"));
        }
        if !(self.master_clock_hz.is_finite() && self.master_clock_hz > 0.0) {
            return Err(config_err("master clock must be positive"));
        }
        if self.dac_rate_multiplier == 0 || self.adc_rate_multiplier == 0 {
            return Err(config_err("rate multipliers must be positive"));
        }
        if self.dac_rate_hz() > MAX_DAC_RATE_HZ {
            return Err(config_err(format!(
                "DAC rate {} S/s exceeds the {MAX_DAC_RATE_HZ} S/s ceiling",
                self.dac_rate_hz()
            )));
        }
        if self.adc_rate_hz() > MAX_ADC_RATE_HZ {
            return Err(config_err(format!(
                "ADC rate {} S/s exceeds the {MAX_ADC_RATE_HZ} S/s ceiling",
                self.adc_rate_hz()
            )));
        }
        for (name, v) in [
            ("min_retrigger_interval_s", self.min_retrigger_interval_s),
            ("switch_latency_s", self.switch_latency_s),
            ("dac_latency_s", self.dac_latency_s),
            ("adc_noise_density", self.adc_noise_density),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(config_err(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = BoardConfig::default();
        c.validate().unwrap();
        assert_eq!(c.dac_rate_hz(), 6.144e9);
        assert!((c.adc_rate_hz() - 1.96608e9).abs() < 1e-3);
        assert!((c.capture_duration_s() - 33.333e-6).abs() < 1e-9);
    }

    #[test]
    fn ceilings_enforced() {
        let c = BoardConfig {
            dac_rate_multiplier: 54,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = BoardConfig {
            dac_rate_multiplier: 53,
            ..Default::default()
        };
        assert!(c.validate().is_ok());
        let c = BoardConfig {
            adc_rate_multiplier: 17,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn fifo_depth_is_fixed() {
        let c = BoardConfig {
            fifo_depth: 1024,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn toml_round_trip_and_partial_files() {
        let c = BoardConfig::default();
        assert_eq!(BoardConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
        let partial = BoardConfig::from_toml_str("decoder_mode = \"mix\"\ndac_rate_multiplier = 16\n").unwrap();
        assert_eq!(partial.decoder_mode, DecoderMode::Mix);
        assert_eq!(partial.dac_rate_multiplier, 16);
        assert_eq!(partial.adc_bits, 12);
        assert!(BoardConfig::from_toml_str("bogus = 1").is_err());
        assert!(BoardConfig::from_toml_str("fifo_depth = 10").is_err());
    }
}
