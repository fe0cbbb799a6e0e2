use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::trace::CurrentTrace;
use super::{invalid, Result};

/// One-sided amplitude spectral density, A/√Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpectrum {
    pub frequencies_hz: Vec<f64>,
    pub density: Vec<f64>,
    pub resolution_hz: f64,
}

impl NoiseSpectrum {
    /// Indices of bins with `low <= f <= high`.
    fn band(&self, low_hz: f64, high_hz: f64) -> std::ops::Range<usize> {
        let lo = self.frequencies_hz.partition_point(|&f| f < low_hz);
        let hi = self.frequencies_hz.partition_point(|&f| f <= high_hz);
        lo..hi.max(lo)
    }

    /// Mean density over `[low, high]`.
    pub fn mean_density(&self, low_hz: f64, high_hz: f64) -> Result<f64> {
        let r = self.band(low_hz, high_hz);
        if r.is_empty() {
            return Err(invalid(format!("no spectrum bins between {low_hz} Hz and {high_hz} Hz")));
        }
        Ok(self.density[r.clone()].iter().sum::<f64>() / r.len() as f64)
    }
}

/// Periodogram of the mean-removed trace, scaled as an amplitude density.
///
/// Bin `k` holds `sqrt(2 |X_k|² / (fs N))` (no factor 2 at DC and Nyquist),
/// so white noise of density `d` reads `d` on average.
pub fn amplitude_noise_spectrum(trace: &CurrentTrace) -> Result<NoiseSpectrum> {
    let n = trace.len();
    if n < 16 {
        return Err(invalid(format!("need at least 16 samples for a spectrum, got {n}")));
    }
    let fs = trace.sample_rate_hz();
    let mean = trace.mean();
    let mut buf: Vec<Complex64> = trace.samples().iter().map(|&v| Complex64::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let norm = fs * n as f64;
    let density = (0..=half)
        .map(|k| {
            let one_sided = if k == 0 || (n % 2 == 0 && k == half) { 1.0 } else { 2.0 };
            (one_sided * buf[k].norm_sqr() / norm).sqrt()
        })
        .collect();
    Ok(NoiseSpectrum {
        frequencies_hz: (0..=half).map(|k| k as f64 * fs / n as f64).collect(),
        density,
        resolution_hz: fs / n as f64,
    })
}

/// Mean density over the band times the square root of its width.
pub fn total_rms_noise(spec: &NoiseSpectrum, band_low_hz: f64, band_high_hz: f64) -> Result<f64> {
    if !(band_low_hz.is_finite() && band_high_hz.is_finite() && band_low_hz < band_high_hz) {
        return Err(invalid(format!("band [{band_low_hz}, {band_high_hz}] is empty")));
    }
    let top = spec.frequencies_hz.last().copied().unwrap_or(0.0);
    if band_low_hz < 0.0 || band_high_hz > top {
        return Err(invalid(format!(
            "band [{band_low_hz}, {band_high_hz}] Hz is outside the spectrum [0, {top}] Hz"
        )));
    }
    Ok(spec.mean_density(band_low_hz, band_high_hz)? * (band_high_hz - band_low_hz).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bias::{simulate_trace, BiasChannel, TraceBench};

    #[test]
    fn constant_trace_has_no_noise() {
        let t = CurrentTrace::new(vec![1e-3; 64], 1e3, 1e-9).unwrap();
        let s = amplitude_noise_spectrum(&t).unwrap();
        assert!(s.density.iter().all(|&d| d == 0.0));
        assert_eq!(total_rms_noise(&s, 10.0, 400.0).unwrap(), 0.0);
    }

    #[test]
    fn flat_density_total() {
        let s = NoiseSpectrum {
            frequencies_hz: (0..=100_000).map(|k| k as f64 * 0.1).collect(),
            density: vec![5.45e-8; 100_001],
            resolution_hz: 0.1,
        };
        let rms = total_rms_noise(&s, 0.1, 10e3).unwrap();
        assert!((rms / (5.45e-8 * 9999.9f64.sqrt()) - 1.0).abs() < 1e-12);
        assert!((rms - 5.45e-6).abs() / 5.45e-6 < 1e-4);
    }

    #[test]
    fn bad_bands() {
        let t = CurrentTrace::new((0..64).map(|i| i as f64).collect(), 100.0, 1e-9).unwrap();
        let s = amplitude_noise_spectrum(&t).unwrap();
        assert!(total_rms_noise(&s, 10.0, 10.0).is_err());
        assert!(total_rms_noise(&s, 10.0, 60.0).is_err());
        assert!(total_rms_noise(&s, 10.1, 10.5).is_err());
        assert!(amplitude_noise_spectrum(&CurrentTrace::new(vec![0.0; 15], 1.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn white_trace_reads_its_density() {
        let ch = BiasChannel {
            drift_a_per_rts: 0.0,
            ..BiasChannel::default()
        };
        let bench = TraceBench {
            sample_rate_hz: 20e3,
            duration_s: 10.0,
            resolution_amps: 1e-12,
        };
        let t = simulate_trace(&ch, 0.0, &bench, 11).unwrap();
        let s = amplitude_noise_spectrum(&t).unwrap();
        let pow = s.density[1..].iter().map(|d| d * d).sum::<f64>() / (s.density.len() - 1) as f64;
        assert!((pow.sqrt() / 5.45e-8 - 1.0).abs() < 0.02);
    }
}
