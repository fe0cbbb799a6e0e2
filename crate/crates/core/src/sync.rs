//! Clock-domain alignment.
//!
//! Asynchronous trigger edges are resynchronised by a D flip-flop clocked
//! from the master oscillator, so every downstream timestamp is a clock edge
//! plus a fixed offset. Timestamps are carried as [`ClockTime`]: an integer
//! edge index and a small offset in seconds. Keeping the edge index exact is
//! what makes start times of channels and boards bit-identical.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rfsoc::AnalogSignal;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SyncError {
    #[error("invalid clock: {0}")]
    InvalidClock(String),
    #[error("trigger time must be finite, got {0}")]
    NonFiniteTrigger(f64),
}

/// Default master reference, 122.88 MHz.
pub const MASTER_CLOCK_HZ: f64 = 122.88e6;

/// A periodic clock: rising edges at `phase_s + k / frequency_hz`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockDomain {
    frequency_hz: f64,
    phase_s: f64,
}

impl Default for ClockDomain {
    fn default() -> Self {
        Self {
            frequency_hz: MASTER_CLOCK_HZ,
            phase_s: 0.0,
        }
    }
}

impl ClockDomain {
    pub fn new(frequency_hz: f64, phase_s: f64) -> Result<Self, SyncError> {
        if !(frequency_hz.is_finite() && frequency_hz > 0.0) {
            return Err(SyncError::InvalidClock(format!("frequency must be positive, got {frequency_hz}")));
        }
        if !(phase_s.is_finite() && phase_s >= 0.0 && phase_s < 1.0 / frequency_hz) {
            return Err(SyncError::InvalidClock(format!(
                "phase must lie in [0, one period), got {phase_s}"
            )));
        }
        Ok(Self { frequency_hz, phase_s })
    }

    pub fn frequency_hz(&self) -> f64 {
        self.frequency_hz
    }

    pub fn phase_s(&self) -> f64 {
        self.phase_s
    }

    pub fn period_s(&self) -> f64 {
        1.0 / self.frequency_hz
    }

    /// Absolute time of edge `cycle`.
    pub fn edge_time(&self, cycle: i64) -> f64 {
        self.phase_s + cycle as f64 / self.frequency_hz
    }

    /// Index of the first edge strictly after `t`.
    pub fn first_edge_after(&self, t: f64) -> i64 {
        let mut k = ((t - self.phase_s) * self.frequency_hz).floor() as i64 + 1;
        // The estimate can be off by one when `t` sits on or next to an edge.
        while self.edge_time(k) <= t {
            k += 1;
        }
        while self.edge_time(k - 1) > t {
            k -= 1;
        }
        k
    }

    pub fn seconds(&self, t: ClockTime) -> f64 {
        self.edge_time(t.cycle) + t.offset_s
    }
}

/// A timestamp anchored to a clock edge: `edge(cycle) + offset_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockTime {
    pub cycle: i64,
    pub offset_s: f64,
}

impl ClockTime {
    pub fn at_edge(cycle: i64) -> Self {
        Self { cycle, offset_s: 0.0 }
    }

    pub fn shifted(self, dt_s: f64) -> Self {
        Self {
            cycle: self.cycle,
            offset_s: self.offset_s + dt_s,
        }
    }
}

/// Which converter bank a trigger line drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TriggerTarget {
    Dac,
    Adc,
    Switch,
}

/// Active edge of the trigger line. The hardware only uses falling edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    #[default]
    Falling,
}

/// A trigger assertion, before and (optionally) after resynchronisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriggerEvent {
    pub raw_time_s: f64,
    pub synced: Option<SyncedEdge>,
    pub edge: Edge,
    pub target: TriggerTarget,
}

/// The clock edge a trigger was latched on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncedEdge {
    pub cycle: i64,
    pub time_s: f64,
}

impl TriggerEvent {
    pub fn new(target: TriggerTarget, raw_time_s: f64) -> Self {
        Self {
            raw_time_s,
            synced: None,
            edge: Edge::Falling,
            target,
        }
    }

    pub fn dac(raw_time_s: f64) -> Self {
        Self::new(TriggerTarget::Dac, raw_time_s)
    }

    pub fn adc(raw_time_s: f64) -> Self {
        Self::new(TriggerTarget::Adc, raw_time_s)
    }

    pub fn switch(raw_time_s: f64) -> Self {
        Self::new(TriggerTarget::Switch, raw_time_s)
    }

    pub fn synced_time_s(&self) -> Option<f64> {
        self.synced.map(|s| s.time_s)
    }

    pub fn synced_clock_time(&self) -> Option<ClockTime> {
        self.synced.map(|s| ClockTime::at_edge(s.cycle))
    }
}

/// Latches `t` on the first clock edge strictly after its raw time.
///
/// An event exactly on an edge moves to the next one, so the added delay is
/// always in `(0, 1/f]`. Metastability is not modelled.
pub fn flipflop_sync(clock: &ClockDomain, t: &TriggerEvent) -> Result<TriggerEvent, SyncError> {
    if !t.raw_time_s.is_finite() {
        return Err(SyncError::NonFiniteTrigger(t.raw_time_s));
    }
    let cycle = clock.first_edge_after(t.raw_time_s);
    Ok(TriggerEvent {
        synced: Some(SyncedEdge {
            cycle,
            time_s: clock.edge_time(cycle),
        }),
        ..*t
    })
}

/// Number of DAC tiles and channels per tile on one board.
pub const DAC_TILES: usize = 4;
pub const CHANNELS_PER_TILE: usize = 4;

/// Per-tile output latency offsets of one board.
///
/// Before multi-tile synchronisation each tile may lag the others; after
/// [`TileSync::mts_align`] every tile reports the same deterministic latency
/// and channel-to-channel skew is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileSync {
    offsets_s: Vec<f64>,
}

impl Default for TileSync {
    fn default() -> Self {
        Self {
            offsets_s: vec![0.0; DAC_TILES],
        }
    }
}

impl TileSync {
    /// Tiles with arbitrary initial skews, e.g. straight after power-up.
    pub fn with_offsets(offsets_s: Vec<f64>) -> Self {
        Self { offsets_s }
    }

    pub fn offsets_s(&self) -> &[f64] {
        &self.offsets_s
    }

    pub fn offset_for_channel(&self, channel: usize) -> f64 {
        self.offsets_s
            .get(channel / CHANNELS_PER_TILE)
            .copied()
            .unwrap_or(0.0)
    }

    pub fn is_aligned(&self) -> bool {
        self.offsets_s.iter().all(|&o| o == 0.0)
    }

    /// Aligns all tiles; returns the resulting per-tile offsets (all zero).
    pub fn mts_align(&mut self) -> &[f64] {
        self.offsets_s.iter_mut().for_each(|o| *o = 0.0);
        &self.offsets_s
    }
}

/// Trigger distribution path from the flip-flop to one board.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoardLink {
    pub board: usize,
    pub cable_delay_s: f64,
    pub compensation_s: f64,
}

impl BoardLink {
    pub fn new(board: usize, cable_delay_s: f64, compensation_s: f64) -> Self {
        Self {
            board,
            cable_delay_s,
            compensation_s,
        }
    }

    /// `cable_delay - compensation`; negative when over-compensated.
    pub fn effective_skew_s(&self) -> f64 {
        self.cable_delay_s - self.compensation_s
    }

    /// Shifts the start of `signal` by the effective skew.
    pub fn apply_skew(&self, signal: AnalogSignal) -> AnalogSignal {
        let skew = self.effective_skew_s();
        if skew == 0.0 {
            return signal;
        }
        signal.delayed(skew)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn on_edge_moves_to_next_edge() {
        let clock = ClockDomain::default();
        let t = clock.edge_time(1000);
        let s = flipflop_sync(&clock, &TriggerEvent::dac(t)).unwrap();
        assert_eq!(s.synced.unwrap().cycle, 1001);
        assert!(s.synced_time_s().unwrap() > t);
    }

    #[test]
    fn just_before_edge_uses_that_edge() {
        let clock = ClockDomain::default();
        let edge = clock.edge_time(77);
        let s = flipflop_sync(&clock, &TriggerEvent::adc(edge - 1e-12)).unwrap();
        assert_eq!(s.synced.unwrap().cycle, 77);
    }

    #[test]
    fn identical_raw_times_identical_sync() {
        let clock = ClockDomain::new(122.88e6, 1.3e-9).unwrap();
        let a = flipflop_sync(&clock, &TriggerEvent::dac(12.345e-6)).unwrap();
        let b = flipflop_sync(&clock, &TriggerEvent::dac(12.345e-6)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn negative_times_sync_too() {
        let clock = ClockDomain::default();
        let s = flipflop_sync(&clock, &TriggerEvent::dac(-3.3e-9)).unwrap();
        let d = s.synced_time_s().unwrap() + 3.3e-9;
        assert!(d > 0.0 && d <= clock.period_s());
    }

    #[test]
    fn clock_validation() {
        assert!(ClockDomain::new(0.0, 0.0).is_err());
        assert!(ClockDomain::new(1e6, 1e-6).is_err());
        assert!(ClockDomain::new(1e6, -1e-9).is_err());
        assert!(ClockDomain::new(1e6, 0.5e-6).is_ok());
        assert!(flipflop_sync(&ClockDomain::default(), &TriggerEvent::dac(f64::NAN)).is_err());
    }

    #[test]
    fn mts_alignment_is_idempotent() {
        let mut tiles = TileSync::with_offsets(vec![1e-9, -0.4e-9, 0.0, 2.2e-9]);
        assert!(!tiles.is_aligned());
        assert_eq!(tiles.offset_for_channel(13), 2.2e-9);
        assert!(tiles.mts_align().iter().all(|&o| o == 0.0));
        let once = tiles.clone();
        tiles.mts_align();
        assert_eq!(once, tiles);
    }

    #[test]
    fn skew_arithmetic() {
        assert_eq!(BoardLink::new(1, 2e-9, 0.0).effective_skew_s(), 2e-9);
        assert_eq!(BoardLink::new(1, 2e-9, 2e-9).effective_skew_s(), 0.0);
        assert!((BoardLink::new(1, 1e-9, 2e-9).effective_skew_s() + 1e-9).abs() < 1e-24);
    }
}
