use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::channel::BiasChannel;
use super::{invalid, Result};

/// A digitized current record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurrentTrace {
    samples: Vec<f64>,
    sample_rate_hz: f64,
    resolution_amps: f64,
}

impl CurrentTrace {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64, resolution_amps: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(invalid("a trace needs at least two samples"));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("sample {i} is not finite")));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(invalid("sample rate must be positive"));
        }
        if !(resolution_amps.is_finite() && resolution_amps > 0.0) {
            return Err(invalid("resolution must be positive"));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            resolution_amps,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn resolution_amps(&self) -> f64 {
        self.resolution_amps
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Mean, accumulated relative to the first sample so a constant trace
    /// returns its value exactly.
    pub fn mean(&self) -> f64 {
        let x0 = self.samples[0];
        x0 + self.samples.iter().map(|v| v - x0).sum::<f64>() / self.samples.len() as f64
    }

    /// `time_s,current_a` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_s,current_a\n");
        for (i, v) in self.samples.iter().enumerate() {
            out.push_str(&format!("{:e},{:e}\n", i as f64 / self.sample_rate_hz, v));
        }
        out
    }
}

/// Digitizer settings of a measurement bench.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceBench {
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub resolution_amps: f64,
}

impl TraceBench {
    /// Broadband noise bench: 2 MS/s for 30 s at 390 nA resolution.
    pub fn broadband() -> Self {
        Self {
            sample_rate_hz: 2e6,
            duration_s: 30.0,
            resolution_amps: 390e-9,
        }
    }

    /// Long-term stability bench: 500 S/s for 18 h at 195 nA resolution.
    pub fn long_term() -> Self {
        Self {
            sample_rate_hz: 500.0,
            duration_s: 18.0 * 3600.0,
            resolution_amps: 195e-9,
        }
    }

    /// The same bench recording `n_samples` points over the full duration.
    pub fn decimated(self, n_samples: usize) -> Self {
        Self {
            sample_rate_hz: n_samples as f64 / self.duration_s,
            ..self
        }
    }

    /// The same bench recording for `duration_s` only.
    pub fn shortened(self, duration_s: f64) -> Self {
        Self { duration_s, ..self }
    }

    pub fn n_samples(&self) -> usize {
        (self.sample_rate_hz * self.duration_s).round() as usize
    }
}

/// Records the channel's output at `setpoint_amps` on `bench`.
///
/// Each sample is the setpoint plus white noise of the channel's density
/// (band-limited to the bench's Nyquist frequency) plus a random-walk
/// drift starting at zero, rounded to the bench resolution.
pub fn simulate_trace(ch: &BiasChannel, setpoint_amps: f64, bench: &TraceBench, seed: u64) -> Result<CurrentTrace> {
    ch.check_setpoint(setpoint_amps)?;
    let n = bench.n_samples();
    if n < 2 {
        return Err(invalid(format!("bench records {n} samples, need at least two")));
    }
    let fs = bench.sample_rate_hz;
    let res = bench.resolution_amps;
    if !(res.is_finite() && res > 0.0) {
        return Err(invalid("resolution must be positive"));
    }
    let d = ch.white_noise_density_a_per_rthz;
    let q = ch.drift_a_per_rts;
    if !(d.is_finite() && d >= 0.0 && q.is_finite() && q >= 0.0) {
        return Err(invalid("noise density and drift must be finite and non-negative"));
    }
    let white_sigma = d * (fs / 2.0).sqrt();
    let step_sigma = q * (1.0 / fs).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut drift = 0.0;
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let white: f64 = StandardNormal.sample(&mut rng);
        let step: f64 = StandardNormal.sample(&mut rng);
        let x = setpoint_amps + white_sigma * white + drift;
        samples.push((x / res).round() * res);
        drift += step_sigma * step;
    }
    CurrentTrace::new(samples, fs, res)
}
