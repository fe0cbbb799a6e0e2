use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{invalid, Result};

/// Band-pass model of the on-board balun.
///
/// A Butterworth high-pass at `low_cut_hz` in series with a Butterworth
/// low-pass at `high_cut_hz`, both of order `rolloff_order`. Each corner is
/// the -3 dB point of its own section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BalunModel {
    pub low_cut_hz: f64,
    pub high_cut_hz: f64,
    pub rolloff_order: u32,
}

impl Default for BalunModel {
    fn default() -> Self {
        Self {
            low_cut_hz: 10e6,
            high_cut_hz: 8e9,
            rolloff_order: 2,
        }
    }
}

/// One analog filter section in a scaled Laplace variable.
///
/// `Second` is `(b0 s² + b1 s + b2) / (s² + a1 s + a2)`,
/// `First` is `(b0 s + b1) / (s + a1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Section {
    First { b0: f64, b1: f64, a1: f64 },
    Second { b0: f64, b1: f64, b2: f64, a1: f64, a2: f64 },
}

impl Section {
    fn eval(&self, s: Complex64) -> Complex64 {
        match *self {
            Section::First { b0, b1, a1 } => (s * b0 + b1) / (s + a1),
            Section::Second { b0, b1, b2, a1, a2 } => (s * s * b0 + s * b1 + b2) / (s * s + s * a1 + a2),
        }
    }
}

impl BalunModel {
    pub fn new(low_cut_hz: f64, high_cut_hz: f64, rolloff_order: u32) -> Result<Self> {
        let m = Self {
            low_cut_hz,
            high_cut_hz,
            rolloff_order,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.low_cut_hz.is_finite() && self.high_cut_hz.is_finite()) {
            return Err(invalid("balun corners must be finite"));
        }
        if !(0.0 < self.low_cut_hz && self.low_cut_hz < self.high_cut_hz) {
            return Err(invalid(format!(
                "balun corners must satisfy 0 < low ({}) < high ({})",
                self.low_cut_hz, self.high_cut_hz
            )));
        }
        if self.rolloff_order == 0 {
            return Err(invalid("balun roll-off order must be positive"));
        }
        Ok(())
    }

    /// Magnitude response in `[0, 1]`.
    pub fn gain(&self, f_hz: f64) -> Result<f64> {
        if !f_hz.is_finite() || f_hz < 0.0 {
            return Err(invalid(format!("frequency must be finite and non-negative, got {f_hz}")));
        }
        if f_hz == 0.0 {
            return Ok(0.0);
        }
        let n2 = 2 * self.rolloff_order as i32;
        let high_pass = 1.0 / (1.0 + (self.low_cut_hz / f_hz).powi(n2)).sqrt();
        let low_pass = 1.0 / (1.0 + (f_hz / self.high_cut_hz).powi(n2)).sqrt();
        Ok(high_pass * low_pass)
    }

    /// Complex response of the realised filter sections at `f_hz`.
    pub fn response(&self, f_hz: f64) -> Complex64 {
        let s = Complex64::new(0.0, 2.0 * PI * f_hz);
        self.sections(1.0).iter().fold(Complex64::new(1.0, 0.0), |acc, sec| acc * sec.eval(s))
    }

    /// Filter sections with the Laplace variable scaled to `time_unit_s`.
    ///
    /// Low-pass sections first, then high-pass sections.
    pub(crate) fn sections(&self, time_unit_s: f64) -> Vec<Section> {
        let n = self.rolloff_order;
        let wl = 2.0 * PI * self.low_cut_hz * time_unit_s;
        let wh = 2.0 * PI * self.high_cut_hz * time_unit_s;
        let mut out = Vec::new();
        for k in 1..=n / 2 {
            let damping = 2.0 * ((2 * k - 1) as f64 * PI / (2 * n) as f64).sin();
            out.push(Section::Second {
                b0: 0.0,
                b1: 0.0,
                b2: wh * wh,
                a1: damping * wh,
                a2: wh * wh,
            });
        }
        if n % 2 == 1 {
            out.push(Section::First { b0: 0.0, b1: wh, a1: wh });
        }
        for k in 1..=n / 2 {
            let damping = 2.0 * ((2 * k - 1) as f64 * PI / (2 * n) as f64).sin();
            out.push(Section::Second {
                b0: 1.0,
                b1: 0.0,
                b2: 0.0,
                a1: damping * wl,
                a2: wl * wl,
            });
        }
        if n % 2 == 1 {
            out.push(Section::First { b0: 1.0, b1: 0.0, a1: wl });
        }
        out
    }
}
