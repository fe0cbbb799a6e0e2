use std::f64::consts::PI;

use num_complex::Complex64;

use super::{invalid, DecoderMode, Result};

/// `sin(π x)` with exact zeros at every integer `x`.
///
/// The argument is reduced modulo 2 before multiplying by π, so the nulls
/// of the reconstruction responses come out as true zeros instead of
/// `1e-16`-sized residues.
pub fn sin_pi(x: f64) -> f64 {
    if !x.is_finite() {
        return f64::NAN;
    }
    // `%` is exact in IEEE arithmetic; the shifts below are exact by Sterbenz.
    let mut r = x % 2.0;
    if r > 1.0 {
        r -= 2.0;
    } else if r < -1.0 {
        r += 2.0;
    }
    let a = r.abs();
    if a == 0.0 || a == 1.0 {
        return 0.0;
    }
    let a = if a > 0.5 { 1.0 - a } else { a };
    (PI * a).sin().copysign(r)
}

/// Normalised sinc, `sin(π x) / (π x)`, with `sinc_pi(0) = 1`.
pub fn sinc_pi(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        sin_pi(x) / (PI * x)
    }
}

/// Complex frequency response of the DAC reconstruction kernel.
///
/// With `T = 1 / sample_rate` and `ω = 2π f`:
///
/// * NRZ: `T · exp(-iωT/2) · sinc(ωT/2)`, a rectangular hold of one period.
/// * Mix: `(ωT²/4) · exp(-i(ωT - π)/2) · sinc²(ωT/4)`, a hold that inverts
///   halfway through the period.
///
/// `sinc` is the unnormalised `sin(x)/x`. NRZ nulls sit at every multiple of
/// the sample rate, Mix nulls at even multiples (and at DC).
pub fn reconstruction_response(mode: DecoderMode, f_hz: f64, sample_rate_hz: f64) -> Result<Complex64> {
    if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
        return Err(invalid(format!("sample rate must be positive, got {sample_rate_hz}")));
    }
    if !f_hz.is_finite() || f_hz < 0.0 {
        return Err(invalid(format!("frequency must be finite and non-negative, got {f_hz}")));
    }
    let period = 1.0 / sample_rate_hz;
    // ratio = f / fs, so ωT/2 = π·ratio and ωT/4 = π·ratio/2.
    let ratio = f_hz / sample_rate_hz;
    let response = match mode {
        DecoderMode::Nrz => {
            let phase = Complex64::from_polar(1.0, -PI * ratio);
            phase * (period * sinc_pi(ratio))
        }
        DecoderMode::Mix => {
            let s = sinc_pi(ratio / 2.0);
            let phase = Complex64::from_polar(1.0, -(PI * ratio - PI / 2.0));
            phase * (period * PI * ratio / 2.0 * s * s)
        }
    };
    Ok(response)
}
