use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{invalid, Result, Waveform};

/// Noise bandwidth used by [`snr`] when the caller has no preference.
pub const DEFAULT_NOISE_BANDWIDTH_HZ: f64 = 100e6;

/// Analysis window applied before the transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Rectangular,
    /// Periodic Hann window, `0.5 (1 - cos(2π n / N))`.
    Hann,
}

impl Window {
    fn coefficient(self, n: usize, len: usize) -> f64 {
        match self {
            Window::Rectangular => 1.0,
            Window::Hann => 0.5 * (1.0 - (2.0 * PI * n as f64 / len as f64).cos()),
        }
    }
}

/// One-sided magnitude spectrum.
///
/// Bins run from DC to the Nyquist frequency (inclusive for even lengths).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    bin_frequencies_hz: Vec<f64>,
    magnitudes: Vec<f64>,
    resolution_hz: f64,
}

impl Spectrum {
    pub fn new(bin_frequencies_hz: Vec<f64>, magnitudes: Vec<f64>, resolution_hz: f64) -> Result<Self> {
        if bin_frequencies_hz.len() != magnitudes.len() {
            return Err(invalid("frequency and magnitude vectors differ in length"));
        }
        if bin_frequencies_hz.is_empty() {
            return Err(invalid("spectrum must have at least one bin"));
        }
        if !bin_frequencies_hz.windows(2).all(|w| w[0] < w[1]) {
            return Err(invalid("bin frequencies must be strictly increasing"));
        }
        if magnitudes.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(invalid("magnitudes must be finite and non-negative"));
        }
        if !(resolution_hz.is_finite() && resolution_hz > 0.0) {
            return Err(invalid("resolution must be positive"));
        }
        Ok(Self {
            bin_frequencies_hz,
            magnitudes,
            resolution_hz,
        })
    }

    pub fn bin_frequencies_hz(&self) -> &[f64] {
        &self.bin_frequencies_hz
    }

    pub fn magnitudes(&self) -> &[f64] {
        &self.magnitudes
    }

    pub fn resolution_hz(&self) -> f64 {
        self.resolution_hz
    }

    pub fn len(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.magnitudes.is_empty()
    }

    /// Index of the bin whose centre is closest to `f_hz`.
    pub fn nearest_bin(&self, f_hz: f64) -> usize {
        let idx = (f_hz / self.resolution_hz).round();
        (idx.max(0.0) as usize).min(self.len() - 1)
    }

    /// Index of the largest magnitude (first one on ties).
    pub fn peak_bin(&self) -> usize {
        let mut best = 0;
        for (i, &m) in self.magnitudes.iter().enumerate() {
            if m > self.magnitudes[best] {
                best = i;
            }
        }
        best
    }

    /// Spectrum with every magnitude multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.bin_frequencies_hz.clone(),
            self.magnitudes.iter().map(|m| m * factor).collect(),
            self.resolution_hz,
        )
    }
}

/// One-sided magnitude spectrum of `w` with no windowing.
///
/// The transform length equals the waveform length. Magnitudes are scaled
/// as `|X_k| / sqrt(N)` for DC (and Nyquist when `N` is even) and
/// `sqrt(2) |X_k| / sqrt(N)` for every other bin, which makes
/// `Σ magnitude² = Σ sample²` exactly (Parseval with the one-sided factor
/// folded in). A tone of amplitude `A` on bin `k` therefore reads
/// `A sqrt(N/2)`.
pub fn spectrum(w: &Waveform) -> Result<Spectrum> {
    spectrum_windowed(w, Window::Rectangular)
}

/// As [`spectrum`], with the window applied to the samples first.
///
/// Parseval then holds for the windowed sequence.
pub fn spectrum_windowed(w: &Waveform, window: Window) -> Result<Spectrum> {
    let n = w.len();
    if n < 2 {
        return Err(invalid("spectrum needs at least two samples"));
    }
    if w.samples().iter().any(|s| !s.is_finite()) {
        return Err(invalid("waveform contains a non-finite sample"));
    }
    let mut buf: Vec<Complex64> = w
        .samples()
        .iter()
        .enumerate()
        .map(|(i, &x)| Complex64::new(x * window.coefficient(i, n), 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let bins = n / 2 + 1;
    let norm = 1.0 / (n as f64).sqrt();
    let resolution = w.sample_rate_hz() / n as f64;
    let mut freqs = Vec::with_capacity(bins);
    let mut mags = Vec::with_capacity(bins);
    for (k, x) in buf.iter().take(bins).enumerate() {
        let unpaired = k == 0 || (n % 2 == 0 && k == n / 2);
        let factor = if unpaired { norm } else { std::f64::consts::SQRT_2 * norm };
        freqs.push(k as f64 * resolution);
        mags.push(x.norm() * factor);
    }
    Spectrum::new(freqs, mags, resolution)
}

/// Signal-to-noise ratio as a linear amplitude ratio.
///
/// The signal is the magnitude of the bin nearest `f_signal_hz`. The noise
/// is the mean magnitude of all bins within `noise_bandwidth_hz` centred on
/// the signal, excluding the signal bin and its two neighbours.
///
/// Returns `+inf` when the noise bins are exactly zero.
pub fn snr(spec: &Spectrum, f_signal_hz: f64, noise_bandwidth_hz: f64) -> Result<f64> {
    let freqs = spec.bin_frequencies_hz();
    let top = *freqs.last().expect("spectrum is non-empty");
    if !(f_signal_hz.is_finite() && (0.0..=top).contains(&f_signal_hz)) {
        return Err(invalid(format!("signal frequency {f_signal_hz} Hz is outside [0, {top}] Hz")));
    }
    if !(noise_bandwidth_hz.is_finite() && noise_bandwidth_hz > 0.0) {
        return Err(invalid("noise bandwidth must be positive"));
    }
    let lo = f_signal_hz - noise_bandwidth_hz / 2.0;
    let hi = f_signal_hz + noise_bandwidth_hz / 2.0;
    if lo < 0.0 || hi > top {
        return Err(invalid(format!(
            "noise window [{lo}, {hi}] Hz does not fit inside [0, {top}] Hz"
        )));
    }
    let centre = spec.nearest_bin(f_signal_hz);
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, (&f, &m)) in freqs.iter().zip(spec.magnitudes()).enumerate() {
        if f < lo || f > hi || i.abs_diff(centre) <= 1 {
            continue;
        }
        sum += m;
        count += 1;
    }
    if count == 0 {
        return Err(invalid("noise window contains no bins outside the signal"));
    }
    let signal = spec.magnitudes()[centre];
    let noise = sum / count as f64;
    if noise == 0.0 {
        if signal == 0.0 {
            return Err(invalid("spectrum is identically zero around the signal"));
        }
        return Ok(f64::INFINITY);
    }
    Ok(signal / noise)
}
