use super::trace::CurrentTrace;
use super::{invalid, Result};

/// Fractional overlapping Allan deviation at each `tau`.
///
/// Every `tau` must be a whole number `m` of sample periods with
/// `2m < len`. The deviation of the current is divided by the trace mean,
/// so zero-mean traces are rejected.
pub fn overlapping_allan_deviation(trace: &CurrentTrace, taus: &[f64]) -> Result<Vec<f64>> {
    let mean = trace.mean();
    if mean == 0.0 {
        return Err(invalid("fractional deviation is undefined for a zero-mean trace"));
    }
    let fs = trace.sample_rate_hz();
    let n = trace.len();
    // Phase-like cumulative sum of the centred samples; centring keeps the
    // sums small so differences stay accurate.
    let mut x = Vec::with_capacity(n + 1);
    x.push(0.0);
    let mut acc = 0.0;
    for v in trace.samples() {
        acc += v - mean;
        x.push(acc);
    }
    taus.iter()
        .map(|&tau| {
            let m = tau_to_m(tau, fs)?;
            if 2 * m >= n {
                return Err(invalid(format!(
                    "tau {tau} s spans {m} samples; the trace of {n} samples needs 2m < {n}"
                )));
            }
            let mf = m as f64;
            let terms = n - 2 * m + 1;
            let sum: f64 = (0..terms)
                .map(|j| {
                    let d = (x[j + 2 * m] - x[j + m]) - (x[j + m] - x[j]);
                    (d / mf).powi(2)
                })
                .sum();
            Ok((sum / (2.0 * terms as f64)).sqrt() / mean.abs())
        })
        .collect()
}

fn tau_to_m(tau: f64, fs: f64) -> Result<usize> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(invalid(format!("tau {tau} s must be positive")));
    }
    let m = (tau * fs).round();
    if m < 1.0 || ((m / fs) - tau).abs() > 1e-9 * tau {
        return Err(invalid(format!("tau {tau} s is not a whole number of sample periods")));
    }
    Ok(m as usize)
}

/// Roughly `per_decade` log-spaced taus, each a whole number of samples,
/// from one sample up to a quarter of the trace.
pub fn log_spaced_taus(trace: &CurrentTrace, per_decade: usize) -> Vec<f64> {
    let fs = trace.sample_rate_hz();
    let max_m = (trace.len().saturating_sub(1)) / 4;
    let mut ms: Vec<usize> = Vec::new();
    let mut k = 0;
    loop {
        let m = 10f64.powf(k as f64 / per_decade.max(1) as f64).round() as usize;
        if m > max_m {
            break;
        }
        if ms.last() != Some(&m) {
            ms.push(m);
        }
        k += 1;
    }
    ms.into_iter().map(|m| m as f64 / fs).collect()
}
