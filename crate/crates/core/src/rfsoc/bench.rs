//! Single-tone loopback measurement: one DAC channel wired to one ADC input.

use std::f64::consts::PI;

use super::capture::Capture;
use super::config::BoardConfig;
use super::sequence::{Rig, Schedule, ScheduledTrigger};
use super::wiring::WireLink;
use super::{invalid, Result};
use crate::signal::{alias_to_first_zone, nyquist_zone_of, snr, spectrum_windowed, BalunModel, Waveform, Window};
use crate::sync::TriggerTarget;

/// Tone loopback from DAC 0 to ADC 0 of a single board.
///
/// The ADC triggers first and the DAC `dac_delay_s` later, so the capture
/// starts with leading zeros. Spectra are taken over a gate of `gate_len`
/// samples that lies entirely inside the playback, `gate_margin` samples
/// after it starts.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopbackBench {
    pub config: BoardConfig,
    pub balun: Option<BalunModel>,
    pub dac_delay_s: f64,
    pub gate_len: usize,
    pub gate_margin: usize,
    pub window: Window,
    pub noise_bandwidth_hz: f64,
}

impl Default for LoopbackBench {
    fn default() -> Self {
        Self {
            config: BoardConfig::default(),
            balun: Some(BalunModel::default()),
            dac_delay_s: 1e-6,
            gate_len: 20_480,
            gate_margin: 256,
            window: Window::Hann,
            noise_bandwidth_hz: crate::signal::DEFAULT_NOISE_BANDWIDTH_HZ,
        }
    }
}

/// One tone measured on the bench.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToneReading {
    pub tone_hz: f64,
    pub zone: u64,
    pub alias_hz: f64,
    pub peak_hz: f64,
    pub snr: f64,
}

impl LoopbackBench {
    /// A full FIFO of a full-scale sine at `f_hz`, sampled at the DAC rate.
    pub fn tone_buffer(&self, f_hz: f64) -> Vec<f64> {
        let fs = self.config.dac_rate_hz();
        (0..self.config.fifo_depth)
            .map(|n| (2.0 * PI * f_hz * n as f64 / fs).sin())
            .collect()
    }

    /// Plays a tone and returns the raw capture with the first gated index.
    pub fn capture_tone(&self, f_hz: f64, seed: u64) -> Result<(Capture, usize)> {
        if !(f_hz.is_finite() && f_hz >= 0.0) {
            return Err(invalid(format!("tone frequency must be finite and non-negative, got {f_hz}")));
        }
        let mut rig = Rig::uniform(&self.config, 1)?;
        rig.board_mut(0)?.load_waveform(0, &self.tone_buffer(f_hz))?;
        let link = WireLink::loopback(0, 0, 0, 0);
        rig.connect(match self.balun {
            Some(b) => link.with_balun(b),
            None => link.without_balun(),
        })?;
        let schedule = Schedule::new(vec![
            ScheduledTrigger::new(TriggerTarget::Adc, 0.0),
            ScheduledTrigger::new(TriggerTarget::Dac, self.dac_delay_s),
        ]);
        let mut result = rig.run_sequence(&schedule, 1, seed)?;
        let capture = result.repetitions.remove(0).captures.remove(0);
        let clock = rig.clock();
        let dac_start = clock.edge_time(clock.first_edge_after(self.dac_delay_s)) + self.config.dac_latency_s;
        let first = ((dac_start - capture.start_time_s) * capture.sample_rate_hz).ceil().max(0.0) as usize + self.gate_margin;
        let playback = (self.config.fifo_depth as f64 / self.config.dac_rate_hz() * capture.sample_rate_hz) as usize;
        if self.gate_margin + self.gate_len > playback || first + self.gate_len > capture.len() {
            return Err(invalid("analysis gate does not fit inside the playback"));
        }
        Ok((capture, first))
    }

    /// The gated, captured waveform of a tone.
    pub fn gated_tone(&self, f_hz: f64, seed: u64) -> Result<Waveform> {
        let (capture, first) = self.capture_tone(f_hz, seed)?;
        let w = capture.waveform(0)?;
        Ok(Waveform::new(
            w.samples()[first..first + self.gate_len].to_vec(),
            w.sample_rate_hz(),
        )?)
    }

    /// SNR of a tone at its first-zone alias.
    pub fn measure(&self, f_hz: f64, seed: u64) -> Result<ToneReading> {
        let w = self.gated_tone(f_hz, seed)?;
        let fs = w.sample_rate_hz();
        let spec = spectrum_windowed(&w, self.window)?;
        let alias_hz = alias_to_first_zone(f_hz, fs)?;
        Ok(ToneReading {
            tone_hz: f_hz,
            zone: nyquist_zone_of(f_hz, fs)?,
            alias_hz,
            peak_hz: spec.bin_frequencies_hz()[spec.peak_bin()],
            snr: snr(&spec, alias_hz, self.noise_bandwidth_hz)?,
        })
    }
}
