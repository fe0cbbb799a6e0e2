use rfsoc_twin::signal::{spectrum, Waveform};

/// Periodogram `|X_k|² / N` averaged in log-spaced frequency bands.
///
/// Returns `(band centre, mean power)` for every non-empty band, skipping DC.
pub fn log_binned_periodogram(samples: &[f64], sample_rate_hz: f64, bins_per_decade: usize) -> anyhow::Result<Vec<(f64, f64)>> {
    let w = Waveform::new(samples.to_vec(), sample_rate_hz)?;
    let spec = spectrum(&w)?;
    let n = samples.len() as f64;
    let freqs = spec.bin_frequencies_hz();
    let mags = spec.magnitudes();
    let f_min = freqs[1];
    let per = bins_per_decade.max(1) as f64;
    let mut bands: Vec<(f64, f64, usize)> = Vec::new();
    let mut current: Option<i64> = None;
    for (f, m) in freqs.iter().zip(mags).skip(1) {
        let band = ((f / f_min).log10() * per).floor() as i64;
        let p = m * m / n;
        if current == Some(band) {
            let last = bands.last_mut().expect("band open");
            last.0 += f.ln();
            last.1 += p;
            last.2 += 1;
        } else {
            bands.push((f.ln(), p, 1));
            current = Some(band);
        }
    }
    Ok(bands
        .into_iter()
        .map(|(lf, p, k)| ((lf / k as f64).exp(), p / k as f64))
        .collect())
}

/// Least-squares slope of `10·log10(power)` against `log10(f)` for points
/// with `lo <= f <= hi`, in dB per decade.
pub fn slope_db_per_decade(points: &[(f64, f64)], lo: f64, hi: f64) -> Option<f64> {
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|(f, p)| *f >= lo && *f <= hi && *p > 0.0)
        .map(|(f, p)| (f.log10(), 10.0 * p.log10()))
        .collect();
    if xy.len() < 2 {
        return None;
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = xy.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xy.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = (1..100).map(|k| (k as f64, (k as f64).powf(-2.0))).collect();
        let s = slope_db_per_decade(&pts, 1.0, 100.0).unwrap();
        assert!((s + 20.0).abs() < 1e-9);
    }

    #[test]
    fn binned_white_noise_is_flat() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let x: Vec<f64> = (0..4096).map(|_| rng.random_range(-0.5..0.5)).collect();
        let pts = log_binned_periodogram(&x, 1.0, 8).unwrap();
        let s = slope_db_per_decade(&pts, 1e-2, 0.5).unwrap();
        assert!(s.abs() < 2.0, "{s}");
    }
}
