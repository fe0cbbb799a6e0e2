use anyhow::bail;
use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfsoc_twin::derive_seed;
use rfsoc_twin::rfsoc::{Rig, Schedule, ScheduledTrigger, WireLink};
use rfsoc_twin::signal::{spectrum_windowed, Waveform, Window};
use rfsoc_twin::sync::{flipflop_sync, BoardLink, ClockDomain, TriggerEvent, TriggerTarget};
use serde::Serialize;
use serde_json::json;

use super::Ctx;
use crate::manifest::{csv, Run};

#[derive(Debug, Clone, Args, Serialize)]
pub struct FeedbackArgs {
    /// Tone in the upper-gang buffer, played first.
    #[arg(long, default_value_t = 300e6)]
    pub f_before: f64,
    /// Tone in the lower-gang buffer, played after the switch.
    #[arg(long, default_value_t = 700e6)]
    pub f_after: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub dac_at: f64,
    #[arg(long, default_value_t = 4e-6)]
    pub switch_at: f64,
}

fn sine(len: usize, f: f64, fs: f64) -> Vec<f64> {
    (0..len)
        .map(|n| 0.8 * (2.0 * std::f64::consts::PI * f * n as f64 / fs).sin())
        .collect()
}

fn peak_hz(samples: &[f64], fs: f64) -> anyhow::Result<f64> {
    let spec = spectrum_windowed(&Waveform::new(samples.to_vec(), fs)?, Window::Hann)?;
    Ok(spec.bin_frequencies_hz()[spec.peak_bin()])
}

pub fn feedback_demo(ctx: &Ctx, a: FeedbackArgs) -> anyhow::Result<()> {
    let cfg = ctx.config.board.clone();
    if cfg.n_dac_channels < 9 {
        bail!("the feedback demo needs the lower DAC gang (channel 8)");
    }
    if !(a.switch_at > a.dac_at) {
        bail!("the switch must come after the DAC trigger");
    }
    let mut run = Run::start(&ctx.global.out, "feedback-demo", ctx.global.seed, json!({"args": &a, "board": &cfg}))?;
    let mut rig = Rig::uniform(&cfg, 1)?;
    let fs_dac = cfg.dac_rate_hz();
    let board = rig.board_mut(0)?;
    board.load_waveform(0, &sine(cfg.fifo_depth, a.f_before, fs_dac))?;
    board.load_waveform(8, &sine(cfg.fifo_depth, a.f_after, fs_dac))?;
    rig.connect(WireLink::loopback(0, 0, 0, 0))?;
    let schedule = Schedule::new(vec![
        ScheduledTrigger::new(TriggerTarget::Adc, 0.0),
        ScheduledTrigger::new(TriggerTarget::Dac, a.dac_at),
        ScheduledTrigger::new(TriggerTarget::Switch, a.switch_at),
    ]);
    let result = rig.run_sequence(&schedule, 1, ctx.global.seed)?;
    let capture = &result.repetitions[0].captures[0];
    let clock = rig.clock();
    let dac_start = clock.edge_time(clock.first_edge_after(a.dac_at)) + cfg.dac_latency_s;
    let switch = clock.edge_time(clock.first_edge_after(a.switch_at)) + cfg.switch_latency_s;
    let playback_end = dac_start + cfg.fifo_depth as f64 / fs_dac;

    let w = capture.waveform(0)?;
    let fs = w.sample_rate_hz();
    let index = |t: f64| (((t - capture.start_time_s) * fs).round().max(0.0) as usize).min(w.len());
    let guard = 100e-9;
    let before = &w.samples()[index(dac_start + guard)..index(switch - guard)];
    let after = &w.samples()[index(switch + guard)..index(playback_end.min(capture.start_time_s + w.duration_s()) - guard)];
    let f_before = peak_hz(before, fs)?;
    let f_after = peak_hz(after, fs)?;

    let times = (0..w.len()).map(|k| capture.start_time_s + k as f64 / fs);
    run.write(
        "feedback_capture.csv",
        csv(&["time_s", "value"], times.zip(w.samples()).map(|(t, &v)| vec![t, v])),
    )?;
    println!(
        "switch at {switch:.4e} s: peak {:.1} MHz before, {:.1} MHz after",
        f_before / 1e6,
        f_after / 1e6
    );
    run.finish(json!({
        "dac_start_s": dac_start,
        "switch_s": switch,
        "peak_before_hz": f_before,
        "peak_after_hz": f_after,
    }))?;
    Ok(())
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SyncArgs {
    /// Random trigger times to resynchronise.
    #[arg(long, default_value_t = 10_000)]
    pub triggers: usize,
    /// Cable delay to the second board, s.
    #[arg(long, default_value_t = 2.5e-9)]
    pub cable_delay: f64,
    /// Delay compensation on the second board's link, s.
    #[arg(long, default_value_t = 2.5e-9)]
    pub compensation: f64,
    /// Shared triggers fired at both boards.
    #[arg(long, default_value_t = 16)]
    pub board_triggers: usize,
}

pub fn sync_demo(ctx: &Ctx, a: SyncArgs) -> anyhow::Result<()> {
    let cfg = ctx.config.board.clone();
    let clock = ClockDomain::new(cfg.master_clock_hz, 0.0)?;
    let mut run = Run::start(&ctx.global.out, "sync-demo", ctx.global.seed, json!({"args": &a, "board": &cfg}))?;

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(ctx.global.seed, &[0]));
    let mut rows = Vec::with_capacity(a.triggers);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..a.triggers {
        let raw: f64 = rng.random_range(0.0..1e-3);
        let synced = flipflop_sync(&clock, &TriggerEvent::dac(raw))?
            .synced_time_s()
            .expect("resynchronised");
        let d = synced - raw;
        lo = lo.min(d);
        hi = hi.max(d);
        rows.push(vec![raw, synced, d]);
    }
    run.write("sync_jitter.csv", csv(&["raw_s", "synced_s", "delay_s"], rows))?;

    let mut rig = Rig::uniform(&cfg, 2)?;
    rig.set_link(BoardLink::new(1, a.cable_delay, a.compensation))?;
    for b in 0..2 {
        rig.board_mut(b)?.load_waveform(0, &[0.5; 64])?;
    }
    let spacing = cfg.min_retrigger_interval_s * 2.0;
    let mut board_rows = Vec::new();
    let mut max_gap: f64 = 0.0;
    for k in 0..a.board_triggers {
        let raw = k as f64 * spacing + rng.random_range(0.0..clock.period_s());
        for b in 0..2 {
            rig.board_mut(b)?.arm_dacs();
        }
        let signals = rig.trigger_all_dacs(&TriggerEvent::dac(raw))?;
        let start = |board: usize| {
            signals
                .iter()
                .find(|s| s.board == board)
                .map(|s| s.start_time_s())
                .expect("both boards play")
        };
        let (s0, s1) = (start(0), start(1));
        max_gap = max_gap.max((s1 - s0).abs());
        board_rows.push(vec![k as f64, raw, s0, s1, s1 - s0]);
    }
    run.write(
        "sync_boards.csv",
        csv(&["trigger", "raw_s", "board0_start_s", "board1_start_s", "difference_s"], board_rows),
    )?;
    println!(
        "resync delay in [{lo:.4e}, {hi:.4e}] s (clock period {:.4e} s); largest board start difference {max_gap:.3e} s",
        clock.period_s()
    );
    run.finish(json!({
        "min_delay_s": lo,
        "max_delay_s": hi,
        "clock_period_s": clock.period_s(),
        "max_board_difference_s": max_gap,
    }))?;
    Ok(())
}
