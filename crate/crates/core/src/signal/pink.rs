use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{invalid, Result};

/// Row count used when callers have no preference.
pub const DEFAULT_VOSS_ROWS: usize = 16;

/// Voss-McCartney pink noise.
///
/// Row `k` is redrawn every `2^(k+1)` samples (the row picked by the number
/// of trailing zeros of a running counter) and one extra white term is drawn
/// for every sample. The sum has an approximately `1/f` power spectrum over
/// roughly `n_rows` octaves below Nyquist.
///
/// The output has its mean removed and is scaled so the peak absolute
/// amplitude is exactly 1, ready to load into a DAC.
pub fn voss_pink_noise(n_samples: usize, n_rows: usize, seed: u64) -> Result<Vec<f64>> {
    if n_samples < 2 {
        return Err(invalid(format!("pink noise needs at least 2 samples, got {n_samples}")));
    }
    if !(1..=32).contains(&n_rows) {
        return Err(invalid(format!("row count must be in 1..=32, got {n_rows}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<f64> = (0..n_rows).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut running: f64 = rows.iter().sum();

    let mut out = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let counter = i as u64 + 1;
        let row = counter.trailing_zeros() as usize;
        if row < n_rows {
            let fresh = rng.random_range(-1.0..1.0);
            running += fresh - rows[row];
            rows[row] = fresh;
        }
        let white: f64 = rng.random_range(-1.0..1.0);
        out.push(running + white);
    }

    let mean = out.iter().sum::<f64>() / n_samples as f64;
    out.iter_mut().for_each(|x| *x -= mean);
    let peak = out.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak > 0.0 {
        out.iter_mut().for_each(|x| *x /= peak);
    }
    Ok(out)
}
