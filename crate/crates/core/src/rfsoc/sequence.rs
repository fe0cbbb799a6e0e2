use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::analog::AnalogSignal;
use super::board::Board;
use super::capture::{encode_binary, Capture};
use super::config::BoardConfig;
use super::wiring::{WireLink, Wiring};
use super::{invalid, Result, RfsocError};
use crate::derive_seed;
use crate::sync::{flipflop_sync, BoardLink, ClockDomain, SyncedEdge, TriggerEvent, TriggerTarget};

/// One trigger in an experiment sequence.
///
/// `boards` empty means every board in the rig.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledTrigger {
    pub time_s: f64,
    pub target: TriggerTarget,
    #[serde(default)]
    pub boards: Vec<usize>,
}

impl ScheduledTrigger {
    pub fn new(target: TriggerTarget, time_s: f64) -> Self {
        Self {
            time_s,
            target,
            boards: Vec::new(),
        }
    }

    pub fn on(mut self, boards: &[usize]) -> Self {
        self.boards = boards.to_vec();
        self
    }
}

/// Trigger times of one repetition, relative to its start.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub triggers: Vec<ScheduledTrigger>,
}

impl Schedule {
    pub fn new(triggers: Vec<ScheduledTrigger>) -> Self {
        Self { triggers }
    }

    pub fn push(&mut self, t: ScheduledTrigger) -> &mut Self {
        self.triggers.push(t);
        self
    }

    /// Earliest and latest trigger time.
    fn span(&self) -> (f64, f64) {
        self.triggers.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| {
            (lo.min(t.time_s), hi.max(t.time_s))
        })
    }
}

/// Two triggers of a schedule that violate the re-trigger limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetriggerClash {
    pub board: usize,
    pub target: TriggerTarget,
    pub previous: usize,
    pub index: usize,
    pub interval_s: f64,
    pub min_s: f64,
}

/// Captures taken during one repetition, in trigger order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Repetition {
    pub index: usize,
    pub captures: Vec<Capture>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceResult {
    pub repetition_period_s: f64,
    pub repetitions: Vec<Repetition>,
}

impl SequenceResult {
    /// Every capture of every repetition in the binary capture format,
    /// concatenated in order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for rep in &self.repetitions {
            for c in &rep.captures {
                out.extend(encode_binary(&c.channels));
            }
        }
        out
    }
}

/// Boards sharing one reference clock, their trigger paths and cabling.
#[derive(Debug, Clone)]
pub struct Rig {
    clock: ClockDomain,
    boards: Vec<Board>,
    links: BTreeMap<usize, BoardLink>,
    wiring: Wiring,
}

impl Rig {
    pub fn new(clock: ClockDomain) -> Self {
        Self {
            clock,
            boards: Vec::new(),
            links: BTreeMap::new(),
            wiring: Wiring::new(),
        }
    }

    /// A rig of `n` identical boards on the configured master clock.
    pub fn uniform(config: &BoardConfig, n: usize) -> Result<Self> {
        let mut rig = Self::new(ClockDomain::new(config.master_clock_hz, 0.0)?);
        for _ in 0..n {
            rig.add_board(config.clone())?;
        }
        Ok(rig)
    }

    pub fn clock(&self) -> &ClockDomain {
        &self.clock
    }

    /// Adds a board; returns its id.
    pub fn add_board(&mut self, config: BoardConfig) -> Result<usize> {
        let id = self.boards.len();
        self.boards.push(Board::with_clock(id, config, self.clock)?);
        Ok(id)
    }

    pub fn boards(&self) -> &[Board] {
        &self.boards
    }

    pub fn board(&self, id: usize) -> Result<&Board> {
        self.boards.get(id).ok_or_else(|| invalid(format!("no board {id}")))
    }

    pub fn board_mut(&mut self, id: usize) -> Result<&mut Board> {
        self.boards.get_mut(id).ok_or_else(|| invalid(format!("no board {id}")))
    }

    pub fn set_link(&mut self, link: BoardLink) -> Result<()> {
        self.board(link.board)?;
        if !(link.cable_delay_s.is_finite() && link.cable_delay_s >= 0.0 && link.compensation_s.is_finite()) {
            return Err(invalid("cable delay must be finite and non-negative, compensation finite"));
        }
        self.links.insert(link.board, link);
        Ok(())
    }

    pub fn link(&self, board: usize) -> BoardLink {
        self.links.get(&board).copied().unwrap_or(BoardLink::new(board, 0.0, 0.0))
    }

    pub fn wiring(&self) -> &Wiring {
        &self.wiring
    }

    pub fn connect(&mut self, link: WireLink) -> Result<()> {
        if let super::SourceRef::Dac { board, channel } = link.source {
            let b = self.board(board)?;
            if channel >= b.channels().len() {
                return Err(invalid(format!("board {board} has no DAC channel {channel}")));
            }
        }
        let adc = self.board(link.adc_board)?;
        if link.adc_channel >= adc.config().n_adc_channels {
            return Err(invalid(format!("board {} has no ADC channel {}", link.adc_board, link.adc_channel)));
        }
        self.wiring.connect(link)
    }

    /// Triggers the DACs of every board from one trigger event and applies
    /// each board's distribution skew.
    pub fn trigger_all_dacs(&mut self, trigger: &TriggerEvent) -> Result<Vec<AnalogSignal>> {
        let synced = flipflop_sync(&self.clock, trigger)?;
        let mut out = Vec::new();
        for id in 0..self.boards.len() {
            let link = self.link(id);
            let signals = self.boards[id].trigger_dacs(&synced)?;
            out.extend(signals.into_iter().map(|s| link.apply_skew(s)));
        }
        Ok(out)
    }

    fn targets(&self, t: &ScheduledTrigger) -> Vec<usize> {
        if t.boards.is_empty() {
            (0..self.boards.len()).collect()
        } else {
            t.boards.clone()
        }
    }

    /// Checks board indices and re-trigger spacing within one repetition.
    pub fn validate_schedule(&self, schedule: &Schedule) -> Result<()> {
        match self.retrigger_clashes(schedule)?.first() {
            Some(c) => Err(RfsocError::RetriggerViolation {
                target: c.target,
                interval_s: c.interval_s,
                min_s: c.min_s,
                index: Some(c.index),
            }),
            None => Ok(()),
        }
    }

    /// Every pair of same-target triggers on one board that are closer than
    /// the board's re-trigger limit, in time order.
    pub fn retrigger_clashes(&self, schedule: &Schedule) -> Result<Vec<RetriggerClash>> {
        let mut last: BTreeMap<(usize, TriggerTarget), (usize, f64)> = BTreeMap::new();
        let mut order: Vec<usize> = (0..schedule.triggers.len()).collect();
        order.sort_by(|&a, &b| schedule.triggers[a].time_s.total_cmp(&schedule.triggers[b].time_s));
        let mut clashes = Vec::new();
        for i in order {
            let t = &schedule.triggers[i];
            if !t.time_s.is_finite() {
                return Err(invalid(format!("trigger {i} has a non-finite time")));
            }
            for b in self.targets(t) {
                let board = self.board(b)?;
                if t.target == TriggerTarget::Switch {
                    continue;
                }
                let min = board.config().min_retrigger_interval_s;
                if let Some((prev, at)) = last.insert((b, t.target), (i, t.time_s)) {
                    let interval = t.time_s - at;
                    if interval < min {
                        clashes.push(RetriggerClash {
                            board: b,
                            target: t.target,
                            previous: prev,
                            index: i,
                            interval_s: interval,
                            min_s: min,
                        });
                    }
                }
            }
        }
        Ok(clashes)
    }

    /// Time between repetition starts: the schedule span plus enough room
    /// for captures and playback to finish and the converters to re-arm,
    /// rounded up to whole clock cycles.
    fn repetition_cycles(&self, schedule: &Schedule) -> i64 {
        let (lo, hi) = schedule.span();
        let guard = self
            .boards
            .iter()
            .map(|b| {
                let c = b.config();
                c.min_retrigger_interval_s
                    .max(c.capture_duration_s())
                    .max(c.fifo_depth as f64 / c.dac_rate_hz())
            })
            .fold(0.0, f64::max);
        ((hi - lo + guard) * self.clock.frequency_hz()).ceil() as i64
    }

    /// Runs `schedule` `repetitions` times and collects every capture.
    ///
    /// Each call starts a fresh timeline: boards are re-armed and their
    /// gangs reset before every repetition, and repetitions are spaced by a
    /// whole number of clock cycles so that, with zero noise, every
    /// repetition yields identical codes. Noise streams derive from `seed`,
    /// the repetition and the trigger index.
    pub fn run_sequence(&mut self, schedule: &Schedule, repetitions: usize, seed: u64) -> Result<SequenceResult> {
        if repetitions == 0 {
            return Err(invalid("repetitions must be at least 1"));
        }
        self.validate_schedule(schedule)?;
        let rep_cycles = self.repetition_cycles(schedule);
        let period = self.clock.period_s();

        let mut order: Vec<usize> = (0..schedule.triggers.len()).collect();
        order.sort_by(|&a, &b| schedule.triggers[a].time_s.total_cmp(&schedule.triggers[b].time_s));
        let base: Vec<TriggerEvent> = schedule
            .triggers
            .iter()
            .map(|t| flipflop_sync(&self.clock, &TriggerEvent::new(t.target, t.time_s)))
            .collect::<std::result::Result<_, _>>()?;

        for b in &mut self.boards {
            b.forget_triggers();
        }

        let mut reps = Vec::with_capacity(repetitions);
        for r in 0..repetitions {
            let shift = r as i64 * rep_cycles;
            let event = |i: usize| {
                let e = base[i];
                let s = e.synced.expect("synced above");
                TriggerEvent {
                    raw_time_s: e.raw_time_s + shift as f64 * period,
                    synced: Some(SyncedEdge {
                        cycle: s.cycle + shift,
                        time_s: self.clock.edge_time(s.cycle + shift),
                    }),
                    ..e
                }
            };
            for b in &mut self.boards {
                b.reset_gang();
                b.arm_dacs();
                b.arm_adcs();
            }

            let mut signals: Vec<AnalogSignal> = Vec::new();
            for &i in &order {
                let t = &schedule.triggers[i];
                let ev = event(i);
                match t.target {
                    TriggerTarget::Dac => {
                        for b in self.targets(t) {
                            let link = self.link(b);
                            let emitted = self.boards[b].trigger_dacs(&ev)?;
                            signals.extend(emitted.into_iter().map(|s| link.apply_skew(s)));
                        }
                    }
                    TriggerTarget::Switch => {
                        for b in self.targets(t) {
                            let sw = self.boards[b].feedback_switch(Some(&ev))?;
                            let skew = self.link(b).effective_skew_s();
                            let sw = super::GangSwitch {
                                at: sw.at.map(|at| at.shifted(skew)),
                                ..sw
                            };
                            signals = signals.into_iter().map(|s| sw.apply(s)).collect();
                        }
                    }
                    TriggerTarget::Adc => {}
                }
            }

            let mut captures = Vec::new();
            for &i in &order {
                let t = &schedule.triggers[i];
                if t.target != TriggerTarget::Adc {
                    continue;
                }
                let ev = event(i);
                for b in self.targets(t) {
                    let inputs = self.wiring.resolve(&signals, b);
                    let s = derive_seed(seed, &[r as u64, i as u64]);
                    captures.push(self.boards[b].capture(&ev, &inputs, s)?);
                }
            }
            reps.push(Repetition { index: r, captures });
        }
        Ok(SequenceResult {
            repetition_period_s: rep_cycles as f64 * period,
            repetitions: reps,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet() -> BoardConfig {
        BoardConfig {
            adc_noise_density: 0.0,
            ..Default::default()
        }
    }

    fn basic(reps: usize, cfg: &BoardConfig) -> SequenceResult {
        let mut rig = Rig::uniform(cfg, 1).unwrap();
        let w: Vec<f64> = (0..4096).map(|n| (n as f64 * 0.61).sin()).collect();
        rig.board_mut(0).unwrap().load_waveform(0, &w).unwrap();
        rig.connect(WireLink::loopback(0, 0, 0, 0)).unwrap();
        let s = Schedule::new(vec![
            ScheduledTrigger::new(TriggerTarget::Dac, 0.0),
            ScheduledTrigger::new(TriggerTarget::Adc, 0.0),
        ]);
        rig.run_sequence(&s, reps, 9).unwrap()
    }

    #[test]
    fn single_repetition() {
        let r = basic(1, &quiet());
        assert_eq!(r.repetitions.len(), 1);
        assert_eq!(r.repetitions[0].captures.len(), 1);
        assert_eq!(r.repetitions[0].captures[0].channels[0].len(), 65_536);
    }

    #[test]
    fn quiet_repetitions_are_identical() {
        let r = basic(10, &quiet());
        assert_eq!(r.repetitions.len(), 10);
        let first = &r.repetitions[0].captures[0].channels;
        assert!(first[0].iter().any(|&v| v != 0));
        for rep in &r.repetitions[1..] {
            assert_eq!(&rep.captures[0].channels, first);
        }
        assert!(r.repetition_period_s >= 33.3e-6);
    }

    #[test]
    fn noisy_runs_repeat_per_seed() {
        let cfg = BoardConfig::default();
        let a = basic(2, &cfg);
        let b = basic(2, &cfg);
        assert_eq!(a.to_bytes(), b.to_bytes());
        assert_ne!(a.repetitions[0].captures[0].channels, a.repetitions[1].captures[0].channels);
    }

    #[test]
    fn violation_reports_index() {
        let mut rig = Rig::uniform(&quiet(), 2).unwrap();
        let s = Schedule::new(vec![
            ScheduledTrigger::new(TriggerTarget::Dac, 0.0),
            ScheduledTrigger::new(TriggerTarget::Adc, 0.0),
            ScheduledTrigger::new(TriggerTarget::Dac, 20e-6).on(&[1]),
            ScheduledTrigger::new(TriggerTarget::Dac, 40e-6).on(&[1]),
        ]);
        match rig.run_sequence(&s, 1, 0).unwrap_err() {
            RfsocError::RetriggerViolation { index, target, .. } => {
                assert_eq!(index, Some(2));
                assert_eq!(target, TriggerTarget::Dac);
            }
            e => panic!("unexpected {e}"),
        }
        assert!(rig.run_sequence(&Schedule::default(), 0, 0).is_err());
        let bad = Schedule::new(vec![ScheduledTrigger::new(TriggerTarget::Adc, 0.0).on(&[5])]);
        assert!(rig.run_sequence(&bad, 1, 0).is_err());
    }

    #[test]
    fn matched_boards_start_together() {
        let mut rig = Rig::uniform(&quiet(), 2).unwrap();
        for b in 0..2 {
            rig.board_mut(b).unwrap().load_waveform(0, &[0.5; 64]).unwrap();
            rig.board_mut(b).unwrap().arm_dacs();
        }
        rig.set_link(BoardLink::new(1, 2e-9, 2e-9)).unwrap();
        let s = rig.trigger_all_dacs(&TriggerEvent::dac(3.21e-7)).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].start_time_s().to_bits(), s[1].start_time_s().to_bits());
    }

    #[test]
    fn skewed_board_lags() {
        let mut rig = Rig::uniform(&quiet(), 2).unwrap();
        for b in 0..2 {
            rig.board_mut(b).unwrap().load_waveform(0, &[0.5; 64]).unwrap();
            rig.board_mut(b).unwrap().arm_dacs();
        }
        rig.set_link(BoardLink::new(1, 2e-9, 0.0)).unwrap();
        let s = rig.trigger_all_dacs(&TriggerEvent::dac(0.0)).unwrap();
        assert!((s[1].start_time_s() - s[0].start_time_s() - 2e-9).abs() < 1e-18);
        assert!(rig.set_link(BoardLink::new(1, -1.0, 0.0)).is_err());
    }
}
