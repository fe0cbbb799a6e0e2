use serde::{Deserialize, Serialize};

use super::{invalid, reconstruction_response, BalunModel, DecoderMode, Result};

/// NRZ band mean the default calibration reproduces, in dBm.
pub const CALIBRATION_TARGET_DBM: f64 = -24.1;
/// Band over which the default calibration is fitted.
pub const CALIBRATION_BAND_HZ: (f64, f64) = (7e9, 10e9);
/// Grid step used for band averages.
pub const BAND_STEP_HZ: f64 = 1e6;

/// Predicted DAC output power at `f_hz`, in dBm.
///
/// `full_scale_dbm + 20 log10(|R(f)| / T) + 20 log10(balun gain)`, where `R`
/// is the reconstruction response of `mode` and `T` the sample period. Both
/// modes are normalised by `T`, the zero-frequency NRZ gain, so the two
/// modes share one calibration constant.
///
/// At an exact response null (or a zero balun gain) the result is
/// `f64::NEG_INFINITY` rather than an error, so sweeps stay total.
pub fn expected_output_power_dbm(
    f_hz: f64,
    sample_rate_hz: f64,
    mode: DecoderMode,
    balun: &BalunModel,
    full_scale_dbm: f64,
) -> Result<f64> {
    let r = reconstruction_response(mode, f_hz, sample_rate_hz)?;
    let relative = r.norm() * sample_rate_hz;
    let gain = balun.gain(f_hz)?;
    let linear = relative * gain;
    if linear == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(full_scale_dbm + 20.0 * linear.log10())
}

/// Mean of the predicted dBm values on a 1 MHz grid over `[lo, hi]`.
pub fn band_mean_dbm(
    lo_hz: f64,
    hi_hz: f64,
    sample_rate_hz: f64,
    mode: DecoderMode,
    balun: &BalunModel,
    full_scale_dbm: f64,
) -> Result<f64> {
    if !(lo_hz.is_finite() && hi_hz.is_finite() && 0.0 <= lo_hz && lo_hz <= hi_hz) {
        return Err(invalid(format!("bad band [{lo_hz}, {hi_hz}]")));
    }
    let steps = ((hi_hz - lo_hz) / BAND_STEP_HZ).floor() as u64;
    let mut sum = 0.0;
    for i in 0..=steps {
        let f = lo_hz + i as f64 * BAND_STEP_HZ;
        sum += expected_output_power_dbm(f, sample_rate_hz, mode, balun, full_scale_dbm)?;
    }
    Ok(sum / (steps + 1) as f64)
}

/// Power-frequency model of one DAC output: sample rate, balun and the
/// absolute calibration constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerModel {
    pub sample_rate_hz: f64,
    pub balun: BalunModel,
    pub full_scale_dbm: f64,
}

impl PowerModel {
    /// Fits `full_scale_dbm` so the NRZ mean over `band` equals `target_dbm`.
    pub fn calibrated(sample_rate_hz: f64, balun: BalunModel, target_dbm: f64, band: (f64, f64)) -> Result<Self> {
        balun.validate()?;
        let relative = band_mean_dbm(band.0, band.1, sample_rate_hz, DecoderMode::Nrz, &balun, 0.0)?;
        if !relative.is_finite() {
            return Err(invalid("calibration band contains a response null"));
        }
        Ok(Self {
            sample_rate_hz,
            balun,
            full_scale_dbm: target_dbm - relative,
        })
    }

    /// Calibration against the default NRZ 7–10 GHz target.
    pub fn default_for_rate(sample_rate_hz: f64) -> Result<Self> {
        Self::calibrated(
            sample_rate_hz,
            BalunModel::default(),
            CALIBRATION_TARGET_DBM,
            CALIBRATION_BAND_HZ,
        )
    }

    pub fn power_dbm(&self, f_hz: f64, mode: DecoderMode) -> Result<f64> {
        expected_output_power_dbm(f_hz, self.sample_rate_hz, mode, &self.balun, self.full_scale_dbm)
    }

    pub fn band_mean_dbm(&self, lo_hz: f64, hi_hz: f64, mode: DecoderMode) -> Result<f64> {
        band_mean_dbm(lo_hz, hi_hz, self.sample_rate_hz, mode, &self.balun, self.full_scale_dbm)
    }
}
