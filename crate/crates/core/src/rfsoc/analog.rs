//! Continuous-time signals and their sampling.
//!
//! A DAC output is described by its quantized codes, decoder mode and a
//! start timestamp. Sampling happens on an integer lattice: one clock cycle
//! is split into `2·m_dac·m_adc` units, so DAC sample boundaries, Mix
//! half-samples and ADC instants all fall on exact integers relative to a
//! shared clock edge. Sub-unit offsets (latencies, skews) are carried as a
//! single fractional part, which keeps repeated captures bit-identical.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::lti::{StateSpace, Stepper};
use super::{invalid, Result};
use crate::signal::{BalunModel, DecoderMode};
use crate::sync::{ClockDomain, ClockTime};

/// Continuous sine source, `amplitude · sin(2π f t + phase)` in full-scale units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    pub frequency_hz: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

impl Tone {
    pub fn new(frequency_hz: f64, amplitude: f64) -> Self {
        Self {
            frequency_hz,
            amplitude,
            phase_rad: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.frequency_hz.is_finite() && self.frequency_hz >= 0.0) {
            return Err(invalid(format!("tone frequency must be finite and non-negative, got {}", self.frequency_hz)));
        }
        if !(self.amplitude.is_finite() && self.phase_rad.is_finite()) {
            return Err(invalid("tone amplitude and phase must be finite"));
        }
        Ok(())
    }
}

/// Buffer swap at a fixed instant: from `at` onwards the output plays `codes`.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchPoint {
    pub at: ClockTime,
    pub codes: Arc<[i16]>,
}

/// One DAC channel's output after a trigger.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogSignal {
    pub board: usize,
    pub channel: usize,
    pub codes: Arc<[i16]>,
    pub full_scale_code: i32,
    pub mode: DecoderMode,
    pub clock: ClockDomain,
    pub rate_multiplier: u32,
    pub start: ClockTime,
    /// White noise carried with the signal, in full-scale units per √Hz.
    pub noise_density: f64,
    pub switch: Option<SwitchPoint>,
}

impl AnalogSignal {
    pub fn sample_rate_hz(&self) -> f64 {
        self.clock.frequency_hz() * self.rate_multiplier as f64
    }

    pub fn start_time_s(&self) -> f64 {
        self.clock.seconds(self.start)
    }

    pub fn duration_s(&self) -> f64 {
        self.codes.len() as f64 / self.sample_rate_hz()
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// The same signal, `dt_s` later. A pending switch moves with it.
    pub fn delayed(mut self, dt_s: f64) -> Self {
        self.start = self.start.shifted(dt_s);
        if let Some(sw) = self.switch.as_mut() {
            sw.at = sw.at.shifted(dt_s);
        }
        self
    }

    /// Output level at absolute time `t_s`, in full-scale units.
    ///
    /// Zero outside the playback window. NRZ holds each sample for a full
    /// period; Mix holds it for half a period and its negation for the other
    /// half.
    pub fn value_at_seconds(&self, t_s: f64) -> f64 {
        let fs = self.sample_rate_hz();
        let edge = self.clock.edge_time(self.start.cycle);
        let x = ((t_s - edge) - self.start.offset_s) * fs;
        if x < 0.0 {
            return 0.0;
        }
        let n = x.floor();
        if n >= self.codes.len() as f64 {
            return 0.0;
        }
        let codes = match &self.switch {
            Some(sw) if t_s >= self.clock.seconds(sw.at) => &sw.codes,
            _ => &self.codes,
        };
        let v = codes.get(n as usize).copied().unwrap_or(0) as f64 / self.full_scale_code as f64;
        match self.mode {
            DecoderMode::Nrz => v,
            DecoderMode::Mix if x - n < 0.5 => v,
            DecoderMode::Mix => -v,
        }
    }
}

/// Anything that can drive an ADC input.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalogSource {
    Playback(AnalogSignal),
    Tone(Tone),
}

impl AnalogSource {
    pub fn noise_density(&self) -> f64 {
        match self {
            AnalogSource::Playback(s) => s.noise_density,
            AnalogSource::Tone(_) => 0.0,
        }
    }
}

/// A source as seen at an ADC input: through an optional balun, times a gain.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkedSource {
    pub source: AnalogSource,
    pub balun: Option<BalunModel>,
    pub gain: f64,
}

impl LinkedSource {
    pub fn direct(source: AnalogSource) -> Self {
        Self {
            source,
            balun: None,
            gain: 1.0,
        }
    }
}

/// Uniform sampling instants `start + k / (f_clock · rate_multiplier)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingGrid {
    pub clock: ClockDomain,
    pub start: ClockTime,
    pub rate_multiplier: u32,
    pub len: usize,
}

impl SamplingGrid {
    pub fn sample_rate_hz(&self) -> f64 {
        self.clock.frequency_hz() * self.rate_multiplier as f64
    }

    pub fn start_time_s(&self) -> f64 {
        self.clock.seconds(self.start)
    }

    /// Absolute time of sample `k`.
    pub fn time_of(&self, k: usize) -> f64 {
        self.clock.edge_time(self.start.cycle) + (self.start.offset_s + k as f64 / self.sample_rate_hz())
    }
}

/// Sums every source at the grid instants.
pub fn render(sources: &[LinkedSource], grid: &SamplingGrid) -> Result<Vec<f64>> {
    if grid.rate_multiplier == 0 {
        return Err(invalid("sampling grid rate multiplier must be positive"));
    }
    let mut out = vec![0.0; grid.len];
    for link in sources {
        if !link.gain.is_finite() {
            return Err(invalid("link gain must be finite"));
        }
        if let Some(b) = &link.balun {
            b.validate()?;
        }
        match &link.source {
            AnalogSource::Tone(tone) => add_tone(&mut out, tone, link, grid)?,
            AnalogSource::Playback(sig) => {
                if sig.clock != grid.clock {
                    return Err(invalid("source and sampling grid must share one clock domain"));
                }
                if sig.rate_multiplier == 0 || sig.full_scale_code <= 0 {
                    return Err(invalid("signal rate multiplier and full-scale code must be positive"));
                }
                let lattice = Lattice::new(sig, grid);
                match &link.balun {
                    None => lattice.add_held(&mut out, link.gain),
                    Some(b) => lattice.add_filtered(&mut out, b, link.gain),
                }
            }
        }
    }
    Ok(out)
}

fn add_tone(out: &mut [f64], tone: &Tone, link: &LinkedSource, grid: &SamplingGrid) -> Result<()> {
    tone.validate()?;
    let (mag, phase) = match &link.balun {
        None => (1.0, 0.0),
        Some(b) => {
            let h = b.response(tone.frequency_hz);
            (h.norm(), h.arg())
        }
    };
    let amp = link.gain * tone.amplitude * mag;
    let f = tone.frequency_hz;
    let fs = grid.sample_rate_hz();
    // Cycles at the grid start, reduced mod 1 to keep the phase accurate.
    let c0 = (f * grid.clock.edge_time(grid.start.cycle)).fract() + (f * grid.start.offset_s).fract();
    for (k, o) in out.iter_mut().enumerate() {
        let cycles = c0 + (f * k as f64 / fs).fract();
        *o += amp * (2.0 * PI * cycles + tone.phase_rad + phase).sin();
    }
    Ok(())
}

/// A point on the sampling lattice: integer units plus a fraction in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
struct Pos {
    int: i64,
    frac: f64,
}

impl Pos {
    fn split(x: f64) -> Self {
        let i = x.floor();
        Self { int: i as i64, frac: x - i }
    }

    fn at(int: i64) -> Self {
        Self { int, frac: 0.0 }
    }

    /// `self - earlier` in units.
    fn since(self, earlier: Pos) -> f64 {
        (self.int - earlier.int) as f64 + (self.frac - earlier.frac)
    }
}

/// A signal positioned against a sampling grid, in signal-relative units.
struct Lattice<'a> {
    sig: &'a AnalogSignal,
    /// Units per clock cycle.
    units: i64,
    /// Units per DAC sample.
    sample_units: i64,
    /// Units per ADC step.
    step_units: i64,
    first: Pos,
    switch: Option<Pos>,
    len: usize,
}

impl<'a> Lattice<'a> {
    fn new(sig: &'a AnalogSignal, grid: &SamplingGrid) -> Self {
        let dm = sig.rate_multiplier as i64;
        let am = grid.rate_multiplier as i64;
        let units = 2 * dm * am;
        let f = sig.clock.frequency_hz();
        let rel = |t: ClockTime| {
            let mut p = Pos::split((t.offset_s - sig.start.offset_s) * f * units as f64);
            p.int += (t.cycle - sig.start.cycle) * units;
            p
        };
        Self {
            sig,
            units,
            sample_units: 2 * am,
            step_units: 2 * dm,
            first: rel(grid.start),
            switch: sig.switch.as_ref().map(|s| rel(s.at)),
            len: grid.len,
        }
    }

    fn time_unit_s(&self) -> f64 {
        1.0 / (self.sig.clock.frequency_hz() * self.units as f64)
    }

    fn end(&self) -> Pos {
        Pos::at(self.sig.codes.len() as i64 * self.sample_units)
    }

    fn instant(&self, k: usize) -> Pos {
        Pos {
            int: self.first.int + k as i64 * self.step_units,
            frac: self.first.frac,
        }
    }

    /// Held level just after `p`.
    fn level(&self, p: Pos) -> f64 {
        if p.int < 0 || p >= self.end() {
            return 0.0;
        }
        let n = (p.int / self.sample_units) as usize;
        let codes = match (&self.switch, &self.sig.switch) {
            (Some(sp), Some(sw)) if p >= *sp => &sw.codes,
            _ => &self.sig.codes,
        };
        let v = codes.get(n).copied().unwrap_or(0) as f64 / self.sig.full_scale_code as f64;
        match self.sig.mode {
            DecoderMode::Nrz => v,
            DecoderMode::Mix => {
                if (p.int % self.sample_units) < self.sample_units / 2 {
                    v
                } else {
                    -v
                }
            }
        }
    }

    /// Distance between input breakpoints.
    fn segment_units(&self) -> i64 {
        match self.sig.mode {
            DecoderMode::Nrz => self.sample_units,
            DecoderMode::Mix => self.sample_units / 2,
        }
    }

    /// First input breakpoint strictly after `p`, if any remain.
    fn next_breakpoint(&self, p: Pos) -> Option<Pos> {
        let end = self.end();
        if p >= end {
            return None;
        }
        let seg = self.segment_units();
        let next_grid = Pos::at((p.int.div_euclid(seg) + 1) * seg);
        let mut best = if next_grid < end { next_grid } else { end };
        if let Some(sp) = self.switch {
            if sp > p && sp < best {
                best = sp;
            }
        }
        Some(best)
    }

    fn add_held(&self, out: &mut [f64], gain: f64) {
        for (k, o) in out.iter_mut().enumerate() {
            *o += gain * self.level(self.instant(k));
        }
    }

    fn add_filtered(&self, out: &mut [f64], balun: &BalunModel, gain: f64) {
        let mut stepper = Stepper::new(StateSpace::balun(balun, self.time_unit_s()));
        let mut cur = Pos::at(0);
        for (k, o) in out.iter_mut().enumerate().take(self.len) {
            let target = self.instant(k);
            if target < cur {
                continue;
            }
            while let Some(b) = self.next_breakpoint(cur) {
                if b > target {
                    break;
                }
                stepper.step(b.since(cur), self.level(cur));
                cur = b;
            }
            let u = self.level(cur);
            stepper.step(target.since(cur), u);
            cur = target;
            *o += gain * stepper.output(self.level(cur));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clock() -> ClockDomain {
        ClockDomain::new(1e6, 0.0).unwrap()
    }

    fn signal(codes: &[i16], mode: DecoderMode, dm: u32) -> AnalogSignal {
        AnalogSignal {
            board: 0,
            channel: 0,
            codes: codes.into(),
            full_scale_code: 100,
            mode,
            clock: clock(),
            rate_multiplier: dm,
            start: ClockTime::at_edge(2),
            noise_density: 0.0,
            switch: None,
        }
    }

    fn grid(am: u32, start: ClockTime, len: usize) -> SamplingGrid {
        SamplingGrid {
            clock: clock(),
            start,
            rate_multiplier: am,
            len,
        }
    }

    fn held(sig: &AnalogSignal, g: &SamplingGrid) -> Vec<f64> {
        render(&[LinkedSource::direct(AnalogSource::Playback(sig.clone()))], g).unwrap()
    }

    #[test]
    fn nrz_samples_on_matching_grid() {
        let sig = signal(&[100, -50, 25], DecoderMode::Nrz, 4);
        let out = held(&sig, &grid(4, ClockTime::at_edge(2), 5));
        assert_eq!(out, vec![1.0, -0.5, 0.25, 0.0, 0.0]);
    }

    #[test]
    fn mix_inverts_second_half() {
        let sig = signal(&[100, -50], DecoderMode::Mix, 4);
        let out = held(&sig, &grid(8, ClockTime::at_edge(2), 5));
        assert_eq!(out, vec![1.0, -1.0, -0.5, 0.5, 0.0]);
    }

    #[test]
    fn zero_before_start() {
        let sig = signal(&[100, 100], DecoderMode::Nrz, 4);
        let out = held(&sig, &grid(4, ClockTime::at_edge(1), 7));
        assert_eq!(out, vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn fractional_offsets_shift_the_hold() {
        // Start a quarter sample late: the sample instant at the start edge
        // still sees silence, the next one sees the first code.
        let sig = signal(&[100, 50], DecoderMode::Nrz, 4).delayed(0.25 / 4e6);
        let out = held(&sig, &grid(4, ClockTime::at_edge(2), 4));
        assert_eq!(out, vec![0.0, 1.0, 0.5, 0.0]);
    }

    #[test]
    fn render_agrees_with_value_at_seconds() {
        let codes: Vec<i16> = (0..64).map(|i| ((i * 37) % 201 - 100) as i16).collect();
        for mode in [DecoderMode::Nrz, DecoderMode::Mix] {
            let sig = signal(&codes, mode, 6).delayed(3.3e-8);
            let g = grid(7, ClockTime { cycle: 1, offset_s: 1.1e-8 }, 80);
            let out = held(&sig, &g);
            for (k, v) in out.iter().enumerate() {
                assert_eq!(*v, sig.value_at_seconds(g.time_of(k)), "{mode} k={k}");
            }
        }
    }

    #[test]
    fn switch_point_changes_buffer() {
        let mut sig = signal(&[100; 8], DecoderMode::Nrz, 4);
        sig.switch = Some(SwitchPoint {
            at: ClockTime { cycle: 3, offset_s: 0.1e-6 },
            codes: vec![-100i16; 8].into(),
        });
        let out = held(&sig, &grid(4, ClockTime::at_edge(2), 8));
        assert_eq!(out, vec![1.0, 1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0]);
    }

    #[test]
    fn filtered_render_matches_fine_stepping() {
        let balun = BalunModel::new(20e3, 2e6, 2).unwrap();
        let codes: Vec<i16> = (0..40).map(|i| if (i / 3) % 2 == 0 { 90 } else { -60 }).collect();
        for mode in [DecoderMode::Nrz, DecoderMode::Mix] {
            let mut sig = signal(&codes, mode, 4);
            sig.switch = Some(SwitchPoint {
                at: ClockTime::at_edge(5),
                codes: vec![30i16; 40].into(),
            });
            let g = grid(3, ClockTime::at_edge(1), 60);
            let link = LinkedSource {
                source: AnalogSource::Playback(sig.clone()),
                balun: Some(balun),
                gain: 1.0,
            };
            let out = render(&[link], &g).unwrap();

            // Reference: one lattice unit per step from the signal start.
            let lat = Lattice::new(&sig, &g);
            let mut st = Stepper::new(StateSpace::balun(&balun, lat.time_unit_s()));
            let mut cur = 0i64;
            for (k, v) in out.iter().enumerate() {
                let target = lat.instant(k).int;
                if target < 0 {
                    assert_eq!(*v, 0.0);
                    continue;
                }
                while cur < target {
                    st.step(1.0, lat.level(Pos::at(cur)));
                    cur += 1;
                }
                let want = st.output(lat.level(Pos::at(cur)));
                assert!((v - want).abs() < 1e-9, "{mode} k={k}: {v} vs {want}");
            }
        }
    }

    #[test]
    fn tone_through_balun_is_scaled() {
        let balun = BalunModel::default();
        let f = 9e9;
        let g = SamplingGrid {
            clock: ClockDomain::default(),
            start: ClockTime::at_edge(0),
            rate_multiplier: 16,
            len: 4096,
        };
        let link = |b| LinkedSource {
            source: AnalogSource::Tone(Tone::new(f, 0.5)),
            balun: b,
            gain: 2.0,
        };
        let raw = render(&[link(None)], &g).unwrap();
        let filtered = render(&[link(Some(balun))], &g).unwrap();
        let peak = |x: &[f64]| x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak(&raw) - 1.0).abs() < 1e-3);
        let want = balun.gain(f).unwrap();
        assert!((peak(&filtered) - want).abs() < 2e-3, "{} vs {want}", peak(&filtered));
    }

    #[test]
    fn clock_mismatch_rejected() {
        let sig = signal(&[1], DecoderMode::Nrz, 4);
        let g = SamplingGrid {
            clock: ClockDomain::new(2e6, 0.0).unwrap(),
            ..grid(4, ClockTime::at_edge(0), 4)
        };
        assert!(render(&[LinkedSource::direct(AnalogSource::Playback(sig))], &g).is_err());
    }

    #[test]
    fn delay_moves_switch_too() {
        let mut sig = signal(&[1, 2], DecoderMode::Nrz, 4);
        sig.switch = Some(SwitchPoint {
            at: ClockTime::at_edge(3),
            codes: vec![5i16, 6].into(),
        });
        let d = sig.clone().delayed(2e-9);
        assert!((d.start_time_s() - sig.start_time_s() - 2e-9).abs() < 1e-18);
        assert_eq!(d.switch.unwrap().at.offset_s, 2e-9);
        assert!((sig.duration_s() - 0.5e-6).abs() < 1e-18);
    }
}
