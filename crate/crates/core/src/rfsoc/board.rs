use std::collections::BTreeMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::analog::{render, AnalogSignal, LinkedSource, SamplingGrid, SwitchPoint};
use super::capture::Capture;
use super::config::BoardConfig;
use super::{invalid, Result, RfsocError};
use crate::derive_seed;
use crate::sync::{flipflop_sync, ClockDomain, ClockTime, TileSync, TriggerEvent, TriggerTarget};

/// DAC channels per gang.
const GANG_SIZE: usize = 8;

/// Half of the DAC bank that a channel belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gang {
    /// Channels 0-7.
    Upper,
    /// Channels 8-15.
    Lower,
}

impl Gang {
    pub fn of(channel: usize) -> Self {
        if channel < GANG_SIZE {
            Gang::Upper
        } else {
            Gang::Lower
        }
    }
}

/// One DAC channel: its FIFO contents and arm state.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    pub index: usize,
    pub loaded: Option<Arc<[i16]>>,
    pub gang: Gang,
    pub armed: bool,
}

/// Signals wired into each ADC channel of a board.
pub type AdcInputs = BTreeMap<usize, Vec<LinkedSource>>;

/// Result of a gang switch: which buffer each upper channel now plays and from when.
///
/// `at == None` means the switch happened before playback started.
#[derive(Debug, Clone, PartialEq)]
pub struct GangSwitch {
    pub board: usize,
    pub at: Option<ClockTime>,
    pub buffers: BTreeMap<usize, Arc<[i16]>>,
}

impl GangSwitch {
    /// Applies the switch to a signal that is already playing.
    ///
    /// Signals from other boards, lower-gang channels, or upper channels
    /// without a lower partner pass through unchanged. Applying the same
    /// switch twice gives the same result as applying it once.
    pub fn apply(&self, signal: AnalogSignal) -> AnalogSignal {
        if signal.board != self.board {
            return signal;
        }
        let Some(codes) = self.buffers.get(&signal.channel) else {
            return signal;
        };
        match self.at {
            None => AnalogSignal {
                codes: codes.clone(),
                switch: None,
                ..signal
            },
            Some(at) => AnalogSignal {
                switch: Some(SwitchPoint {
                    at,
                    codes: codes.clone(),
                }),
                ..signal
            },
        }
    }
}

/// Behavioural model of one board.
///
/// A state machine driven by a single controller: waveforms are loaded and
/// armed, DAC triggers emit [`AnalogSignal`]s and ADC triggers capture
/// whatever [`AdcInputs`] are supplied.
#[derive(Debug, Clone)]
pub struct Board {
    id: usize,
    config: BoardConfig,
    clock: ClockDomain,
    dac: Vec<ChannelState>,
    adc_armed: bool,
    switched: bool,
    tiles: TileSync,
    last_raw: BTreeMap<TargetKey, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum TargetKey {
    Dac,
    Adc,
}

impl Board {
    pub fn new(id: usize, config: BoardConfig) -> Result<Self> {
        let clock = ClockDomain::new(config.master_clock_hz, 0.0)?;
        Self::with_clock(id, config, clock)
    }

    /// A board clocked from a shared reference.
    pub fn with_clock(id: usize, config: BoardConfig, clock: ClockDomain) -> Result<Self> {
        config.validate()?;
        if clock.frequency_hz() != config.master_clock_hz {
            return Err(RfsocError::Config(format!(
                "clock runs at {} Hz but the board expects {} Hz",
                clock.frequency_hz(),
                config.master_clock_hz
            )));
        }
        let dac = (0..config.n_dac_channels)
            .map(|index| ChannelState {
                index,
                loaded: None,
                gang: Gang::of(index),
                armed: false,
            })
            .collect();
        Ok(Self {
            id,
            config,
            clock,
            dac,
            adc_armed: false,
            switched: false,
            tiles: TileSync::default(),
            last_raw: BTreeMap::new(),
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn config(&self) -> &BoardConfig {
        &self.config
    }

    pub fn clock(&self) -> &ClockDomain {
        &self.clock
    }

    pub fn channel(&self, channel: usize) -> Option<&ChannelState> {
        self.dac.get(channel)
    }

    pub fn channels(&self) -> &[ChannelState] {
        &self.dac
    }

    pub fn tiles(&self) -> &TileSync {
        &self.tiles
    }

    pub fn set_tile_offsets(&mut self, offsets_s: Vec<f64>) {
        self.tiles = TileSync::with_offsets(offsets_s);
    }

    /// Runs multi-tile synchronisation; returns the per-tile offsets.
    pub fn mts_align(&mut self) -> Vec<f64> {
        self.tiles.mts_align().to_vec()
    }

    pub fn is_switched(&self) -> bool {
        self.switched
    }

    pub fn adc_armed(&self) -> bool {
        self.adc_armed
    }

    /// Clips, quantizes and stores `samples` in a DAC FIFO; the channel is
    /// left disarmed.
    pub fn load_waveform(&mut self, channel: usize, samples: &[f64]) -> Result<&ChannelState> {
        if channel >= self.dac.len() {
            return Err(invalid(format!("DAC channel {channel} out of range 0..{}", self.dac.len())));
        }
        if samples.is_empty() {
            return Err(invalid("waveform must hold at least one sample"));
        }
        if samples.len() > self.config.fifo_depth {
            return Err(RfsocError::FifoOverflow {
                len: samples.len(),
                depth: self.config.fifo_depth,
            });
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("sample {i} is not finite")));
        }
        let q = self.config.dac_quantizer();
        let codes: Arc<[i16]> = samples.iter().map(|&v| q.encode(v)).collect();
        let ch = &mut self.dac[channel];
        ch.loaded = Some(codes);
        ch.armed = false;
        Ok(ch)
    }

    pub fn clear_channel(&mut self, channel: usize) -> Result<()> {
        let ch = self
            .dac
            .get_mut(channel)
            .ok_or_else(|| invalid(format!("DAC channel {channel} out of range")))?;
        ch.loaded = None;
        ch.armed = false;
        Ok(())
    }

    /// Arms every loaded DAC channel.
    pub fn arm_dacs(&mut self) {
        for ch in &mut self.dac {
            ch.armed = ch.loaded.is_some();
        }
    }

    pub fn arm_adcs(&mut self) {
        self.adc_armed = true;
    }

    fn check_retrigger(&mut self, key: TargetKey, t: &TriggerEvent) -> Result<()> {
        if let Some(&prev) = self.last_raw.get(&key) {
            let interval = t.raw_time_s - prev;
            if interval < self.config.min_retrigger_interval_s {
                return Err(RfsocError::RetriggerViolation {
                    target: t.target,
                    interval_s: interval,
                    min_s: self.config.min_retrigger_interval_s,
                    index: None,
                });
            }
        }
        Ok(())
    }

    fn synced_edge(&self, t: &TriggerEvent, expected: TriggerTarget) -> Result<i64> {
        if t.target != expected {
            return Err(invalid(format!("expected a {expected:?} trigger, got {:?}", t.target)));
        }
        let synced = match t.synced {
            Some(s) => s,
            None => flipflop_sync(&self.clock, t)?.synced.expect("flip-flop sets synced"),
        };
        Ok(synced.cycle)
    }

    /// Starts playback on every loaded channel.
    ///
    /// All signals start on the same synchronised clock edge, delayed by the
    /// configured DAC latency and their tile's offset. With the gang
    /// switched, upper channels play their lower partner's buffer.
    pub fn trigger_dacs(&mut self, trigger: &TriggerEvent) -> Result<Vec<AnalogSignal>> {
        let cycle = self.synced_edge(trigger, TriggerTarget::Dac)?;
        self.check_retrigger(TargetKey::Dac, trigger)?;
        let sources: Vec<(usize, usize)> = self
            .dac
            .iter()
            .map(|ch| (ch.index, self.playback_source(ch.index)))
            .filter(|&(_, src)| self.dac[src].loaded.is_some())
            .collect();
        if let Some(&(out, src)) = sources.iter().find(|&&(_, src)| !self.dac[src].armed) {
            return Err(RfsocError::NotArmed(format!(
                "DAC channel {out} (buffer of channel {src}) is loaded but not armed"
            )));
        }
        self.last_raw.insert(TargetKey::Dac, trigger.raw_time_s);
        let q = self.config.dac_quantizer();
        let signals = sources
            .iter()
            .map(|&(out, src)| AnalogSignal {
                board: self.id,
                channel: out,
                codes: self.dac[src].loaded.clone().expect("filtered on loaded"),
                full_scale_code: q.full_scale_code() as i32,
                mode: self.config.decoder_mode,
                clock: self.clock,
                rate_multiplier: self.config.dac_rate_multiplier,
                start: ClockTime {
                    cycle,
                    offset_s: self.config.dac_latency_s + self.tiles.offset_for_channel(out),
                },
                noise_density: 0.0,
                switch: None,
            })
            .collect();
        if !self.config.loopback {
            for &(_, src) in &sources {
                self.dac[src].armed = false;
            }
        }
        Ok(signals)
    }

    fn playback_source(&self, channel: usize) -> usize {
        let partner = channel + GANG_SIZE;
        if self.switched && Gang::of(channel) == Gang::Upper && self.dac.get(partner).is_some_and(|c| c.loaded.is_some()) {
            partner
        } else {
            channel
        }
    }

    /// Clears the re-trigger history, as after a power cycle.
    pub fn forget_triggers(&mut self) {
        self.last_raw.clear();
    }

    /// Switches the upper gang to the lower gang's buffers.
    ///
    /// Without a trigger the switch applies to all later playback. With a
    /// switch trigger, the returned [`GangSwitch`] also carries the instant
    /// (synchronised edge plus switch latency) at which signals already
    /// playing change over; apply it to them with [`GangSwitch::apply`].
    pub fn feedback_switch(&mut self, trigger: Option<&TriggerEvent>) -> Result<GangSwitch> {
        let buffers: BTreeMap<usize, Arc<[i16]>> = (0..GANG_SIZE)
            .filter_map(|ch| {
                self.dac
                    .get(ch + GANG_SIZE)
                    .and_then(|c| c.loaded.clone())
                    .map(|codes| (ch, codes))
            })
            .collect();
        if buffers.is_empty() {
            return Err(RfsocError::InvalidState("lower gang holds no waveforms".into()));
        }
        let at = match trigger {
            None => None,
            Some(t) => {
                let cycle = self.synced_edge(t, TriggerTarget::Switch)?;
                Some(ClockTime {
                    cycle,
                    offset_s: self.config.switch_latency_s,
                })
            }
        };
        self.switched = true;
        Ok(GangSwitch {
            board: self.id,
            at,
            buffers,
        })
    }

    /// Returns the upper gang to its own buffers.
    pub fn reset_gang(&mut self) {
        self.switched = false;
    }

    /// Captures one FIFO-length record on every ADC channel.
    ///
    /// Each sample is the sum of the wired sources at that instant plus
    /// Gaussian noise, quantized to the ADC depth. The ADC re-arms itself
    /// once the record is transferred.
    pub fn capture(&mut self, trigger: &TriggerEvent, inputs: &AdcInputs, seed: u64) -> Result<Capture> {
        let cycle = self.synced_edge(trigger, TriggerTarget::Adc)?;
        if !self.adc_armed {
            return Err(RfsocError::NotArmed("ADC bank is not armed".into()));
        }
        self.check_retrigger(TargetKey::Adc, trigger)?;
        if let Some(&ch) = inputs.keys().find(|&&ch| ch >= self.config.n_adc_channels) {
            return Err(invalid(format!("ADC channel {ch} out of range 0..{}", self.config.n_adc_channels)));
        }
        self.last_raw.insert(TargetKey::Adc, trigger.raw_time_s);

        let grid = SamplingGrid {
            clock: self.clock,
            start: ClockTime::at_edge(cycle),
            rate_multiplier: self.config.adc_rate_multiplier,
            len: self.config.fifo_depth,
        };
        let q = self.config.adc_quantizer();
        let fs = grid.sample_rate_hz();
        let mut channels = Vec::with_capacity(self.config.n_adc_channels);
        for ch in 0..self.config.n_adc_channels {
            let links = inputs.get(&ch).map(Vec::as_slice).unwrap_or(&[]);
            let mut x = render(links, &grid)?;
            let carried: f64 = links
                .iter()
                .map(|l| (l.gain * l.source.noise_density()).powi(2))
                .sum();
            let density = (self.config.adc_noise_density.powi(2) + carried).sqrt();
            let sigma = density * (fs / 2.0).sqrt();
            if sigma > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[self.id as u64, ch as u64]));
                let normal = Normal::new(0.0, sigma).expect("sigma is finite and positive");
                for v in &mut x {
                    *v += normal.sample(&mut rng);
                }
            }
            channels.push(x.into_iter().map(|v| q.encode(v)).collect());
        }
        Ok(Capture {
            board: self.id,
            sample_rate_hz: fs,
            start: grid.start,
            start_time_s: grid.start_time_s(),
            full_scale_code: q.full_scale_code(),
            channels,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rfsoc::{AnalogSource, FIFO_DEPTH};

    fn board() -> Board {
        Board::new(0, BoardConfig::default()).unwrap()
    }

    #[test]
    fn fifo_boundary() {
        let mut b = board();
        let ch = b.load_waveform(0, &vec![0.1; FIFO_DEPTH]).unwrap();
        assert_eq!(ch.loaded.as_ref().unwrap().len(), FIFO_DEPTH);
        assert!(!ch.armed);
        let err = b.load_waveform(0, &vec![0.1; FIFO_DEPTH + 1]).unwrap_err();
        assert_eq!(err.kind(), "fifo-overflow");
        assert_eq!(b.load_waveform(16, &[0.0]).unwrap_err().kind(), "invalid-argument");
        assert!(b.load_waveform(0, &[]).is_err());
        assert!(b.load_waveform(0, &[f64::NAN]).is_err());
    }

    #[test]
    fn full_buffer_plays_for_ten_microseconds() {
        let mut b = board();
        b.load_waveform(3, &vec![0.5; FIFO_DEPTH]).unwrap();
        b.arm_dacs();
        let s = b.trigger_dacs(&TriggerEvent::dac(0.0)).unwrap();
        assert!((s[0].duration_s() - 10.6667e-6).abs() < 1e-9);
    }

    #[test]
    fn clipping_to_full_scale() {
        let mut b = board();
        let ch = b.load_waveform(1, &[2.0, -3.0, 0.0]).unwrap();
        assert_eq!(&ch.loaded.as_ref().unwrap()[..], &[8191, -8191, 0]);
    }

    #[test]
    fn one_trigger_one_start() {
        let mut b = board();
        b.load_waveform(0, &[0.5; 16]).unwrap();
        b.load_waveform(9, &[0.25; 16]).unwrap();
        b.arm_dacs();
        let s = b.trigger_dacs(&TriggerEvent::dac(1.234e-6)).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].start, s[1].start);
        assert_eq!(s[0].start_time_s().to_bits(), s[1].start_time_s().to_bits());
        assert!(s[0].start_time_s() > 1.234e-6);
    }

    #[test]
    fn retrigger_limit() {
        let mut b = Board::new(
            0,
            BoardConfig {
                loopback: true,
                ..Default::default()
            },
        )
        .unwrap();
        b.load_waveform(0, &[0.5; 16]).unwrap();
        b.arm_dacs();
        b.trigger_dacs(&TriggerEvent::dac(0.0)).unwrap();
        let err = b.trigger_dacs(&TriggerEvent::dac(10e-6)).unwrap_err();
        assert_eq!(err.kind(), "retrigger-violation");
        // loopback keeps the channel armed
        assert_eq!(b.trigger_dacs(&TriggerEvent::dac(30e-6)).unwrap().len(), 1);
    }

    #[test]
    fn empty_board_emits_nothing() {
        let mut b = board();
        assert!(b.trigger_dacs(&TriggerEvent::dac(0.0)).unwrap().is_empty());
    }

    #[test]
    fn unarmed_and_disarmed_channels() {
        let mut b = board();
        b.load_waveform(0, &[0.5; 4]).unwrap();
        assert_eq!(b.trigger_dacs(&TriggerEvent::dac(0.0)).unwrap_err().kind(), "not-armed");
        b.arm_dacs();
        b.trigger_dacs(&TriggerEvent::dac(0.0)).unwrap();
        // without loopback the FIFO must be re-armed
        assert_eq!(b.trigger_dacs(&TriggerEvent::dac(40e-6)).unwrap_err().kind(), "not-armed");
        assert!(b.trigger_dacs(&TriggerEvent::adc(80e-6)).is_err());
    }

    #[test]
    fn gang_switch_plays_lower_buffer() {
        let mut b = board();
        let sine: Vec<f64> = (0..32).map(|i| (i as f64 * 0.3).sin()).collect();
        let square: Vec<f64> = (0..32).map(|i| if i % 8 < 4 { 0.9 } else { -0.9 }).collect();
        b.load_waveform(8, &sine).unwrap();
        b.load_waveform(0, &square).unwrap();
        let sine_codes = b.channel(8).unwrap().loaded.clone().unwrap();
        b.feedback_switch(None).unwrap();
        b.feedback_switch(None).unwrap();
        assert!(b.is_switched());
        b.arm_dacs();
        let s = b.trigger_dacs(&TriggerEvent::dac(0.0)).unwrap();
        let ch0 = s.iter().find(|s| s.channel == 0).unwrap();
        let ch8 = s.iter().find(|s| s.channel == 8).unwrap();
        assert_eq!(ch0.codes, sine_codes);
        assert_eq!(ch8.codes, sine_codes);
        b.reset_gang();
        b.arm_dacs();
        let s = b.trigger_dacs(&TriggerEvent::dac(50e-6)).unwrap();
        assert_ne!(s[0].codes, sine_codes);
    }

    #[test]
    fn switch_needs_lower_gang() {
        let mut b = board();
        b.load_waveform(0, &[0.5]).unwrap();
        assert_eq!(b.feedback_switch(None).unwrap_err().kind(), "invalid-state");
    }

    #[test]
    fn switch_mid_playback_is_piecewise() {
        let mut b = board();
        b.load_waveform(0, &vec![0.5; 4096]).unwrap();
        b.load_waveform(8, &vec![-0.25; 4096]).unwrap();
        b.arm_dacs();
        let s = b.trigger_dacs(&TriggerEvent::dac(0.0)).unwrap();
        let t_s = 200e-9;
        let sw = b.feedback_switch(Some(&TriggerEvent::switch(t_s))).unwrap();
        let ch0 = sw.apply(s[0].clone());
        let again = sw.apply(ch0.clone());
        assert_eq!(ch0, again);
        let at = b.clock().seconds(sw.at.unwrap());
        let edge = b.clock().edge_time(b.clock().first_edge_after(t_s));
        assert!((at - edge - 5e-9).abs() < 1e-15);
        let fs = b.config().dac_rate_hz();
        let mut t = s[0].start_time_s() + 0.5 / fs;
        while t < s[0].start_time_s() + s[0].duration_s() {
            let want = if t < at { 8191.0 / 2.0 } else { -8191.0 / 4.0 };
            let want = (want as f64).round() / 8191.0;
            assert_eq!(ch0.value_at_seconds(t), want, "t={t}");
            t += 1.0 / fs;
        }
        // lower-gang signals are untouched
        assert_eq!(sw.apply(s[1].clone()), s[1]);
    }

    #[test]
    fn capture_is_always_full_length() {
        let mut b = board();
        let err = b.capture(&TriggerEvent::adc(0.0), &AdcInputs::new(), 1).unwrap_err();
        assert_eq!(err.kind(), "not-armed");
        b.arm_adcs();
        let c = b.capture(&TriggerEvent::adc(0.0), &AdcInputs::new(), 1).unwrap();
        assert_eq!(c.n_channels(), 8);
        assert!(c.channels.iter().all(|ch| ch.len() == FIFO_DEPTH));
        assert!(c.channels[0].iter().any(|&v| v != 0));
        assert!((c.len() as f64 / c.sample_rate_hz - 33.33e-6).abs() < 1e-8);
        // the ADC re-arms itself after the transfer
        assert!(b.adc_armed());
        assert_eq!(
            b.capture(&TriggerEvent::adc(10e-6), &AdcInputs::new(), 1).unwrap_err().kind(),
            "retrigger-violation"
        );
    }

    #[test]
    fn noise_free_capture_is_deterministic_and_quiet() {
        let cfg = BoardConfig {
            adc_noise_density: 0.0,
            ..Default::default()
        };
        let mut b = Board::new(0, cfg).unwrap();
        b.arm_adcs();
        let c = b.capture(&TriggerEvent::adc(0.0), &AdcInputs::new(), 5).unwrap();
        assert!(c.channels.iter().flatten().all(|&v| v == 0));

        let mut inputs = AdcInputs::new();
        inputs.insert(
            2,
            vec![LinkedSource::direct(AnalogSource::Tone(crate::rfsoc::Tone::new(100e6, 0.5)))],
        );
        let a = b.capture(&TriggerEvent::adc(40e-6), &inputs, 5).unwrap();
        assert!(a.channels[2].iter().any(|&v| v.abs() > 1000));
        let mut inputs_bad = AdcInputs::new();
        inputs_bad.insert(8, vec![]);
        assert!(b.capture(&TriggerEvent::adc(80e-6), &inputs_bad, 5).is_err());
    }
}
