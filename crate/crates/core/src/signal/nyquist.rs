use super::{invalid, Result};

fn check_rate(sample_rate_hz: f64) -> Result<()> {
    if sample_rate_hz.is_finite() && sample_rate_hz > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("sample rate must be positive, got {sample_rate_hz}")))
    }
}

fn check_freq(f_hz: f64) -> Result<()> {
    if f_hz.is_finite() && f_hz >= 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("frequency must be finite and non-negative, got {f_hz}")))
    }
}

/// Nyquist zone `k` (1-based) with `(k-1)·fs/2 <= f < k·fs/2`.
///
/// A frequency exactly on a zone edge `k·fs/2` belongs to zone `k + 1`.
pub fn nyquist_zone_of(f_hz: f64, sample_rate_hz: f64) -> Result<u64> {
    check_freq(f_hz)?;
    check_rate(sample_rate_hz)?;
    let half = sample_rate_hz / 2.0;
    Ok((f_hz / half).floor() as u64 + 1)
}

/// Image of `f` in the first Nyquist zone `[0, fs/2]`.
///
/// Folds `f` modulo `fs`, then reflects about `fs/2` if needed.
pub fn alias_to_first_zone(f_hz: f64, sample_rate_hz: f64) -> Result<f64> {
    check_freq(f_hz)?;
    check_rate(sample_rate_hz)?;
    let folded = f_hz.rem_euclid(sample_rate_hz);
    Ok(if folded > sample_rate_hz / 2.0 {
        sample_rate_hz - folded
    } else {
        folded
    })
}

/// The image of a first-zone frequency that falls in zone `zone`.
///
/// Odd zones carry `f0` shifted up, even zones carry it mirrored.
pub fn zone_image(f0_hz: f64, sample_rate_hz: f64, zone: u64) -> Result<f64> {
    check_freq(f0_hz)?;
    check_rate(sample_rate_hz)?;
    if zone == 0 {
        return Err(invalid("Nyquist zones are numbered from 1"));
    }
    if f0_hz > sample_rate_hz / 2.0 {
        return Err(invalid(format!(
            "{f0_hz} Hz is above the first-zone edge {} Hz; fold it first",
            sample_rate_hz / 2.0
        )));
    }
    let n = (zone / 2) as f64;
    Ok(if zone % 2 == 1 {
        n * sample_rate_hz + f0_hz
    } else {
        n * sample_rate_hz - f0_hz
    })
}

/// Every image `n·fs ± f0` in `[0, f_max]`, ascending and deduplicated.
pub fn image_frequencies(f0_hz: f64, sample_rate_hz: f64, f_max_hz: f64) -> Result<Vec<f64>> {
    check_freq(f0_hz)?;
    check_rate(sample_rate_hz)?;
    if f0_hz > sample_rate_hz / 2.0 {
        return Err(invalid(format!(
            "{f0_hz} Hz is above the first-zone edge {} Hz; fold it first",
            sample_rate_hz / 2.0
        )));
    }
    if !f_max_hz.is_finite() {
        return Err(invalid("f_max must be finite"));
    }
    let mut out = Vec::new();
    let mut n = 0u64;
    loop {
        let base = n as f64 * sample_rate_hz;
        if base - f0_hz > f_max_hz {
            break;
        }
        for f in [base - f0_hz, base + f0_hz] {
            if (0.0..=f_max_hz).contains(&f) {
                out.push(f);
            }
        }
        n += 1;
    }
    out.sort_by(f64::total_cmp);
    // f0 = 0 and f0 = fs/2 produce coincident pairs.
    let tol = sample_rate_hz * 1e-12;
    out.dedup_by(|a, b| (*a - *b).abs() <= tol);
    Ok(out)
}
