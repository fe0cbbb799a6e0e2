use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{invalid, Result};

/// Toy model of a cavity whose resonance is pulled by a flux-tuned qubit.
///
/// The line centre moves as `f0 + shift · cos(2π I / period)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FluxMapParams {
    pub period_ma: f64,
    pub cavity_f0_hz: f64,
    pub shift_amplitude_hz: f64,
    pub linewidth_hz: f64,
}

impl Default for FluxMapParams {
    fn default() -> Self {
        Self {
            period_ma: 4.0 / 3.0,
            cavity_f0_hz: 7.2e9,
            shift_amplitude_hz: 2e6,
            linewidth_hz: 0.5e6,
        }
    }
}

impl FluxMapParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.period_ma.is_finite() && self.period_ma > 0.0) {
            return Err(invalid("flux period must be positive"));
        }
        if !(self.linewidth_hz.is_finite() && self.linewidth_hz > 0.0) {
            return Err(invalid("linewidth must be positive"));
        }
        if !(self.cavity_f0_hz.is_finite() && self.shift_amplitude_hz.is_finite()) {
            return Err(invalid("cavity frequency and shift must be finite"));
        }
        Ok(())
    }

    /// Resonance at bias current `amps`.
    pub fn center_frequency_hz(&self, amps: f64) -> f64 {
        let ma = amps * 1e3;
        self.cavity_f0_hz + self.shift_amplitude_hz * (2.0 * PI * ma / self.period_ma).cos()
    }

    /// Lorentzian transmission magnitude, 1 on resonance.
    pub fn transmission(&self, amps: f64, f_hz: f64) -> f64 {
        let detuning = 2.0 * (f_hz - self.center_frequency_hz(amps)) / self.linewidth_hz;
        1.0 / (1.0 + detuning * detuning).sqrt()
    }
}

/// Transmission magnitude for every bias point (rows) and probe frequency
/// (columns).
pub fn cavity_transmission_map(params: &FluxMapParams, bias_points_a: &[f64], probe_freqs_hz: &[f64]) -> Result<Vec<Vec<f64>>> {
    params.validate()?;
    if bias_points_a.is_empty() || probe_freqs_hz.is_empty() {
        return Err(invalid("bias points and probe frequencies must be non-empty"));
    }
    Ok(bias_points_a
        .iter()
        .map(|&i| probe_freqs_hz.iter().map(|&f| params.transmission(i, f)).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_bias_sits_at_top_of_swing() {
        let p = FluxMapParams::default();
        assert_eq!(p.center_frequency_hz(0.0), p.cavity_f0_hz + p.shift_amplitude_hz);
        assert_eq!(p.transmission(0.0, p.center_frequency_hz(0.0)), 1.0);
    }

    #[test]
    fn periodic_in_bias() {
        let p = FluxMapParams::default();
        for i in [-1.7e-3, -0.2e-3, 0.31e-3, 1.1e-3] {
            let a = p.center_frequency_hz(i);
            let b = p.center_frequency_hz(i + p.period_ma * 1e-3);
            assert!((a - b).abs() <= 1e-9 * a);
        }
    }

    #[test]
    fn map_shape_and_peak() {
        let p = FluxMapParams::default();
        let f = [p.cavity_f0_hz + p.shift_amplitude_hz, p.cavity_f0_hz + 10e6];
        let m = cavity_transmission_map(&p, &[0.0, 1e-3, 2e-3], &f).unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m[0].len(), 2);
        assert_eq!(m[0][0], 1.0);
        assert!(m[0][1] < 0.1);
        assert!(cavity_transmission_map(&p, &[], &f).is_err());
        let bad = FluxMapParams {
            linewidth_hz: 0.0,
            ..p
        };
        assert!(cavity_transmission_map(&bad, &[0.0], &f).is_err());
    }
}
