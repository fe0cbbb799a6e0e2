use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfsoc_twin::rfsoc::{
    AdcInputs, AnalogSource, Board, BoardConfig, LinkedSource, Rig, Schedule, ScheduledTrigger, Tone, WireLink,
};
use rfsoc_twin::signal::BalunModel;
use rfsoc_twin::sync::{TriggerEvent, TriggerTarget};

fn quiet() -> BoardConfig {
    BoardConfig {
        adc_noise_density: 0.0,
        ..Default::default()
    }
}

/// SNR in dB of `x` against the best-fitting sine at known frequency
/// `cycles_per_sample`, fitted by linear least squares on (sin, cos, 1).
fn sine_fit_snr_db(x: &[f64], cycles_per_sample: f64) -> f64 {
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for (i, &v) in x.iter().enumerate() {
        let ph = 2.0 * PI * (cycles_per_sample * i as f64).fract();
        let row = [ph.sin(), ph.cos(), 1.0];
        for r in 0..3 {
            for c in 0..3 {
                ata[r][c] += row[r] * row[c];
            }
            atb[r] += row[r] * v;
        }
    }
    let coef = solve3(ata, atb);
    let mut sig = 0.0;
    let mut err = 0.0;
    for (i, &v) in x.iter().enumerate() {
        let ph = 2.0 * PI * (cycles_per_sample * i as f64).fract();
        let fit = coef[0] * ph.sin() + coef[1] * ph.cos();
        sig += fit * fit;
        err += (v - fit - coef[2]).powi(2);
    }
    10.0 * (sig / err).log10()
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for i in 0..3 {
        let p = (i..3).max_by(|&r, &s| a[r][i].abs().total_cmp(&a[s][i].abs())).unwrap();
        a.swap(i, p);
        b.swap(i, p);
        for r in i + 1..3 {
            let f = a[r][i] / a[i][i];
            for c in i..3 {
                a[r][c] -= f * a[i][c];
            }
            b[r] -= f * b[i];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        x[i] = (b[i] - (i + 1..3).map(|c| a[i][c] * x[c]).sum::<f64>()) / a[i][i];
    }
    x
}

#[test]
fn dac_quantization_snr_is_fourteen_bit() {
    let mut b = Board::new(0, quiet()).unwrap();
    let r = 0.123_456_789_1;
    let x: Vec<f64> = (0..65_536).map(|i| (2.0 * PI * (r * i as f64).fract()).sin()).collect();
    let codes = b.load_waveform(0, &x).unwrap().loaded.clone().unwrap();
    let y: Vec<f64> = codes.iter().map(|&c| c as f64 / 8191.0).collect();
    let snr = sine_fit_snr_db(&y, r);
    assert!((snr - 86.0).abs() <= 2.0, "{snr} dB");
}

#[test]
fn adc_quantization_snr_is_twelve_bit() {
    let mut b = Board::new(0, quiet()).unwrap();
    b.arm_adcs();
    let f = 123.456_789e6;
    let mut inputs = AdcInputs::new();
    inputs.insert(0, vec![LinkedSource::direct(AnalogSource::Tone(Tone::new(f, 1.0)))]);
    let c = b.capture(&TriggerEvent::adc(0.0), &inputs, 0).unwrap();
    let y = c.waveform(0).unwrap();
    let snr = sine_fit_snr_db(y.samples(), f / c.sample_rate_hz);
    assert!((snr - 74.0).abs() <= 2.0, "{snr} dB");
}

#[test]
fn early_adc_trigger_sees_leading_zeros() {
    let cfg = quiet();
    let mut rig = Rig::uniform(&cfg, 1).unwrap();
    rig.board_mut(0).unwrap().load_waveform(0, &[0.5; 4096]).unwrap();
    rig.connect(WireLink::loopback(0, 0, 0, 0).without_balun()).unwrap();
    let t_dac = 2.5e-6;
    let schedule = Schedule::new(vec![
        ScheduledTrigger::new(TriggerTarget::Adc, 0.0),
        ScheduledTrigger::new(TriggerTarget::Dac, t_dac),
    ]);
    let res = rig.run_sequence(&schedule, 1, 0).unwrap();
    let ch = &res.repetitions[0].captures[0].channels[0];

    // Both triggers move to the next clock edge; the ADC takes 16 samples
    // per cycle.
    let period = 1.0 / cfg.master_clock_hz;
    let adc_edge = 1i64;
    let dac_edge = (t_dac / period).floor() as i64 + 1;
    let leading = ((dac_edge - adc_edge) * cfg.adc_rate_multiplier as i64) as usize;
    let playing = (4096.0 / cfg.dac_rate_hz() * cfg.adc_rate_hz()).ceil() as usize;
    let half = (0.5f64 * 2047.0).round() as i16;
    assert!(ch[..leading].iter().all(|&v| v == 0));
    assert!(ch[leading..leading + playing].iter().all(|&v| v == half));
    assert!(ch[leading + playing..].iter().all(|&v| v == 0));
}

#[test]
fn balun_rejects_one_megahertz() {
    let mut b = Board::new(0, quiet()).unwrap();
    b.arm_adcs();
    let rms = |b: &mut Board, f: f64, t: f64| {
        let mut inputs = AdcInputs::new();
        inputs.insert(
            0,
            vec![LinkedSource {
                source: AnalogSource::Tone(Tone::new(f, 0.9)),
                balun: Some(BalunModel::default()),
                gain: 1.0,
            }],
        );
        let c = b.capture(&TriggerEvent::adc(t), &inputs, 0).unwrap();
        let x = c.waveform(0).unwrap();
        (x.samples().iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    };
    let low = rms(&mut b, 1e6, 0.0);
    let mid = rms(&mut b, 100e6, 40e-6);
    let db = 20.0 * (low / mid).log10();
    assert!(db <= -20.0, "{db} dB");
}

#[test]
fn capture_length_independent_of_input() {
    for len in [1usize, 100, 65_536] {
        let mut rig = Rig::uniform(&BoardConfig::default(), 1).unwrap();
        rig.board_mut(0).unwrap().load_waveform(0, &vec![0.3; len]).unwrap();
        rig.connect(WireLink::loopback(0, 0, 0, 0)).unwrap();
        let s = Schedule::new(vec![
            ScheduledTrigger::new(TriggerTarget::Dac, 0.0),
            ScheduledTrigger::new(TriggerTarget::Adc, 0.0),
        ]);
        let r = rig.run_sequence(&s, 1, 1).unwrap();
        for ch in &r.repetitions[0].captures[0].channels {
            assert_eq!(ch.len(), 65_536);
        }
    }
}

#[test]
fn aligned_tiles_and_boards_coincide() {
    let mut rig = Rig::uniform(&quiet(), 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for b in 0..2 {
        let board = rig.board_mut(b).unwrap();
        board.set_tile_offsets((0..4).map(|_| rng.random_range(0.0..3e-9)).collect());
        for ch in [0, 5, 10, 15] {
            board.load_waveform(ch, &[0.5; 32]).unwrap();
        }
        board.arm_dacs();
    }
    let before = rig.trigger_all_dacs(&TriggerEvent::dac(1e-6)).unwrap();
    assert!(before.iter().any(|s| s.start != before[0].start));
    for b in 0..2 {
        let board = rig.board_mut(b).unwrap();
        assert!(board.mts_align().iter().all(|&o| o == 0.0));
        assert!(board.mts_align().iter().all(|&o| o == 0.0));
        board.arm_dacs();
    }
    let after = rig.trigger_all_dacs(&TriggerEvent::dac(50e-6)).unwrap();
    assert_eq!(after.len(), 8);
    let t0 = after[0].start_time_s().to_bits();
    assert!(after.iter().all(|s| s.start_time_s().to_bits() == t0));
}

#[test]
fn feedback_switch_in_a_sequence() {
    let mut rig = Rig::uniform(&quiet(), 1).unwrap();
    let board = rig.board_mut(0).unwrap();
    board.load_waveform(0, &[0.5; 8192]).unwrap();
    board.load_waveform(8, &[-0.25; 8192]).unwrap();
    rig.connect(WireLink::loopback(0, 0, 0, 0).without_balun()).unwrap();
    let t_switch = 0.5e-6;
    let s = Schedule::new(vec![
        ScheduledTrigger::new(TriggerTarget::Dac, 0.0),
        ScheduledTrigger::new(TriggerTarget::Adc, 0.0),
        ScheduledTrigger::new(TriggerTarget::Switch, t_switch),
    ]);
    let r = rig.run_sequence(&s, 2, 0).unwrap();
    let clock = rig.clock();
    let start = clock.edge_time(clock.first_edge_after(0.0));
    let switch_at = clock.edge_time(clock.first_edge_after(t_switch)) + 5e-9;
    let fs = r.repetitions[0].captures[0].sample_rate_hz;
    for rep in &r.repetitions {
        let ch = &rep.captures[0].channels[0];
        for (k, &v) in ch.iter().enumerate().take(2600) {
            let t = start + k as f64 / fs;
            let want = if t < switch_at { 1024 } else { -512 };
            assert_eq!(v, want, "k={k}");
        }
    }
}
