use serde::{Deserialize, Serialize};

use super::{invalid, BiasError, Result};

/// White current noise of one channel, A/√Hz.
pub const DEFAULT_WHITE_DENSITY: f64 = 5.45e-8;

/// Random-walk drift coefficient, A/√s.
///
/// A 1 mA trace then shows a fractional Allan deviation of about 4×10⁻⁴
/// at 500 s, since a random walk with coefficient `q` has Allan variance
/// `q² τ / 3`.
pub const DEFAULT_DRIFT_COEFF: f64 = 3.1e-8;

/// One output of the bias source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BiasChannel {
    pub v_ref_volts: f64,
    pub r_sense_ohms: f64,
    pub dac_bits: u32,
    pub code: u32,
    pub compliance_volts: f64,
    /// Resistance of the load the current is driven into.
    pub load_ohms: f64,
    pub white_noise_density_a_per_rthz: f64,
    pub drift_a_per_rts: f64,
}

impl Default for BiasChannel {
    fn default() -> Self {
        Self {
            v_ref_volts: 2.048,
            r_sense_ohms: 500.0,
            dac_bits: 16,
            code: 1 << 15,
            compliance_volts: 9.9,
            load_ohms: 0.0,
            white_noise_density_a_per_rthz: DEFAULT_WHITE_DENSITY,
            drift_a_per_rts: DEFAULT_DRIFT_COEFF,
        }
    }
}

impl BiasChannel {
    /// A channel with neither noise nor drift.
    pub fn ideal() -> Self {
        Self {
            white_noise_density_a_per_rthz: 0.0,
            drift_a_per_rts: 0.0,
            ..Self::default()
        }
    }

    /// `v_ref / r_sense`: the output spans `±full_scale_amps`.
    pub fn full_scale_amps(&self) -> f64 {
        self.v_ref_volts / self.r_sense_ohms
    }

    pub fn n_codes(&self) -> u32 {
        1 << self.dac_bits
    }

    /// Current step of one code.
    pub fn lsb_amps(&self) -> f64 {
        2.0 * self.full_scale_amps() / self.n_codes() as f64
    }

    /// Bipolar mapping: code 0 is `-full_scale`, the mid code is zero.
    pub fn current_of_code(&self, code: u32) -> Result<f64> {
        if code >= self.n_codes() {
            return Err(invalid(format!("code {code} out of range 0..{}", self.n_codes())));
        }
        let offset = code as i64 - (self.n_codes() / 2) as i64;
        Ok(offset as f64 * (2.0 * self.v_ref_volts / self.r_sense_ohms) / self.n_codes() as f64)
    }

    /// Current at the channel's own code.
    pub fn current(&self) -> Result<f64> {
        self.current_of_code(self.code)
    }

    /// Nearest code for a target current.
    pub fn code_for_current(&self, amps: f64) -> Result<u32> {
        self.check_setpoint(amps)?;
        let code = (amps / self.lsb_amps()).round() as i64 + (self.n_codes() / 2) as i64;
        Ok(code.clamp(0, self.n_codes() as i64 - 1) as u32)
    }

    /// Sense voltage `I · R_sense` at current `amps`.
    pub fn v_sense(&self, amps: f64) -> f64 {
        amps * self.r_sense_ohms
    }

    /// Checks that `amps` is inside the range and the compliance voltage.
    pub fn check_setpoint(&self, amps: f64) -> Result<()> {
        if !amps.is_finite() {
            return Err(invalid("setpoint must be finite"));
        }
        let fs = self.full_scale_amps();
        if amps.abs() > fs {
            return Err(BiasError::Compliance(format!(
                "setpoint {amps:e} A exceeds the ±{fs:e} A range"
            )));
        }
        let v = amps.abs() * (self.r_sense_ohms + self.load_ohms);
        if v > self.compliance_volts {
            return Err(BiasError::Compliance(format!(
                "setpoint {amps:e} A needs {v:.2} V, above the {} V compliance",
                self.compliance_volts
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn endpoints_are_exact() {
        let ch = BiasChannel::default();
        assert_eq!(ch.current_of_code(0).unwrap(), -4.096e-3);
        assert_eq!(ch.current_of_code(32_768).unwrap(), 0.0);
        assert_eq!(ch.current_of_code(65_535).unwrap(), 4.096e-3 - 125e-9);
        assert!((ch.current_of_code(32_769).unwrap() - 125e-9).abs() < 1e-21);
        assert_eq!(ch.lsb_amps(), 125e-9);
        assert_eq!(ch.current_of_code(65_536).unwrap_err().kind(), "invalid-argument");
    }

    #[test]
    fn code_round_trip() {
        let ch = BiasChannel::default();
        assert_eq!(ch.code_for_current(0.0).unwrap(), 32_768);
        assert_eq!(ch.code_for_current(1e-3).unwrap(), 32_768 + 8000);
        assert_eq!(ch.code_for_current(4.096e-3).unwrap(), 65_535);
        assert!(ch.code_for_current(5e-3).is_err());
    }

    #[test]
    fn compliance_with_load() {
        let ch = BiasChannel {
            load_ohms: 2000.0,
            ..BiasChannel::default()
        };
        assert!(ch.check_setpoint(3e-3).is_ok());
        assert_eq!(ch.check_setpoint(4e-3).unwrap_err().kind(), "compliance");
        assert_eq!(ch.v_sense(1e-3), 0.5);
    }

    proptest! {
        #[test]
        fn strictly_monotone(code in 0u32..65_535) {
            let ch = BiasChannel::default();
            prop_assert!(ch.current_of_code(code + 1).unwrap() > ch.current_of_code(code).unwrap());
        }
    }
}
