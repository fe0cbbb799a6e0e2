use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rfsoc_twin::bias::{
    amplitude_noise_spectrum, overlapping_allan_deviation, simulate_trace, total_rms_noise, BiasChannel,
    CurrentTrace, FluxMapParams, TraceBench,
};

/// Overlapping Allan deviation straight from its definition: averages over
/// every window of `m` samples, then the mean squared difference of
/// averages `m` apart.
fn naive_adev(x: &[f64], m: usize) -> f64 {
    let n = x.len();
    let avg = |j: usize| x[j..j + m].iter().sum::<f64>() / m as f64;
    let mut sum = 0.0;
    let mut count = 0;
    for j in 0..=n - 2 * m {
        let d = avg(j + m) - avg(j);
        sum += d * d;
        count += 1;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    (sum / (2.0 * count as f64)).sqrt() / mean.abs()
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Two-sample Kolmogorov-Smirnov statistic.
fn ks_statistic(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

proptest! {
    #[test]
    fn allan_matches_naive_oracle(
        values in prop::collection::vec(0.5f64..1.5, 3..=64),
    ) {
        let t = CurrentTrace::new(values.clone(), 10.0, 1e-9).unwrap();
        let max_m = (values.len() - 1) / 2;
        let taus: Vec<f64> = (1..=max_m).map(|m| m as f64 / 10.0).collect();
        let got = overlapping_allan_deviation(&t, &taus).unwrap();
        for (m, g) in (1..=max_m).zip(got) {
            let want = naive_adev(&values, m);
            prop_assert!((g - want).abs() <= 1e-12 * want.max(1e-300), "m={} {} vs {}", m, g, want);
        }
    }
}

#[test]
fn white_noise_allan_slope() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let noise = Normal::new(1.0, 0.01).unwrap();
    let x: Vec<f64> = (0..200_000).map(|_| noise.sample(&mut rng)).collect();
    let t = CurrentTrace::new(x, 1.0, 1e-12).unwrap();
    let taus: Vec<f64> = (0..=20).map(|k| 10f64.powf(k as f64 / 10.0).round()).collect();
    let adev = overlapping_allan_deviation(&t, &taus).unwrap();
    let lx: Vec<f64> = taus.iter().map(|v| v.log10()).collect();
    let ly: Vec<f64> = adev.iter().map(|v| v.log10()).collect();
    let s = slope(&lx, &ly);
    assert!((s + 0.5).abs() <= 0.05, "slope {s}");
}

#[test]
fn calibrated_long_term_allan_at_500_s() {
    let bench = TraceBench::long_term().decimated(1_000_000);
    let t = simulate_trace(&BiasChannel::default(), 1e-3, &bench, 12).unwrap();
    // 500 s is not a whole number of decimated samples; use the nearest one.
    let m = (500.0 * bench.sample_rate_hz).round();
    let adev = overlapping_allan_deviation(&t, &[m / bench.sample_rate_hz]).unwrap()[0];
    assert!(adev > 4e-4 / 3.0 && adev < 4e-4 * 3.0, "{adev}");
}

#[test]
fn broadband_noise_of_calibrated_channel() {
    let bench = TraceBench {
        sample_rate_hz: 2e6,
        duration_s: 0.5,
        resolution_amps: 390e-9,
    };
    let t = simulate_trace(&BiasChannel::default(), 1e-3, &bench, 3).unwrap();
    let s = amplitude_noise_spectrum(&t).unwrap();
    let broadband = s.mean_density(1e3, 1e6).unwrap();
    assert!(broadband < 3e-6, "{broadband}");
}

#[test]
fn total_noise_in_band_matches_text_value() {
    let bench = TraceBench {
        sample_rate_hz: 20e3,
        duration_s: 20.0,
        resolution_amps: 390e-9,
    };
    let t = simulate_trace(&BiasChannel::default(), 1e-3, &bench, 8).unwrap();
    let s = amplitude_noise_spectrum(&t).unwrap();
    let rms = total_rms_noise(&s, 0.1, 10e3).unwrap();
    assert!((rms / 5.45e-6 - 1.0).abs() < 0.2, "{rms}");
}

#[test]
fn white_density_is_flat_per_decade() {
    let ch = BiasChannel {
        drift_a_per_rts: 0.0,
        ..BiasChannel::default()
    };
    let bench = TraceBench {
        sample_rate_hz: 20e3,
        duration_s: 5.0,
        resolution_amps: 1e-12,
    };
    let mut sums = [0.0f64; 3];
    let seeds = 10;
    for seed in 0..seeds {
        let s = amplitude_noise_spectrum(&simulate_trace(&ch, 0.0, &bench, seed).unwrap()).unwrap();
        for (i, (lo, hi)) in [(1.0, 10.0), (10.0, 100.0), (100.0, 1000.0)].into_iter().enumerate() {
            sums[i] += s.mean_density(lo, hi).unwrap();
        }
    }
    for v in sums {
        let d = v / seeds as f64;
        // Mean of a Rayleigh amplitude is sqrt(π)/2 of its rms.
        let want = 5.45e-8 * std::f64::consts::PI.sqrt() / 2.0;
        assert!((d / want - 1.0).abs() < 0.2, "{d} vs {want}");
    }
}

#[test]
fn segment_order_does_not_change_the_spectrum_distribution() {
    let ch = BiasChannel {
        drift_a_per_rts: 0.0,
        ..BiasChannel::default()
    };
    let bench = TraceBench {
        sample_rate_hz: 1e3,
        duration_s: 1.024,
        resolution_amps: 1e-12,
    };
    let (mut ab, mut ba) = (Vec::new(), Vec::new());
    for seed in 0..50 {
        let a = simulate_trace(&ch, 0.0, &bench, 2 * seed).unwrap();
        let b = simulate_trace(&ch, 0.0, &bench, 2 * seed + 1).unwrap();
        let join = |x: &CurrentTrace, y: &CurrentTrace| {
            let mut v = x.samples().to_vec();
            v.extend_from_slice(y.samples());
            CurrentTrace::new(v, 1e3, 1e-12).unwrap()
        };
        ab.extend(amplitude_noise_spectrum(&join(&a, &b)).unwrap().density[1..].iter().step_by(7));
        ba.extend(amplitude_noise_spectrum(&join(&b, &a)).unwrap().density[1..].iter().step_by(11));
    }
    let (n, m) = (ab.len() as f64, ba.len() as f64);
    let d = ks_statistic(&mut ab, &mut ba);
    let critical = 1.628 * ((n + m) / (n * m)).sqrt();
    assert!(d < critical, "KS {d} >= {critical}");
}

#[test]
fn flux_map_has_three_periods_over_four_milliamps() {
    let p = FluxMapParams::default();
    let n = 4001;
    let centers: Vec<f64> = (0..n)
        .map(|i| p.center_frequency_hz(-2e-3 + 4e-3 * i as f64 / (n - 1) as f64))
        .collect();
    let maxima = (1..n - 1)
        .filter(|&i| centers[i] > centers[i - 1] && centers[i] >= centers[i + 1])
        .count();
    assert_eq!(maxima, 3);
}
