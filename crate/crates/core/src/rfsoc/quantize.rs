use serde::{Deserialize, Serialize};

/// Mid-tread, saturating converter quantiser.
///
/// Full scale `±1.0` maps to `±(2^(bits-1) - 1)`; inputs beyond full scale
/// clip, and ties round away from zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quantizer {
    bits: u32,
}

impl Quantizer {
    /// `bits` must be in `2..=16`.
    pub fn new(bits: u32) -> Option<Self> {
        (2..=16).contains(&bits).then_some(Self { bits })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn full_scale_code(&self) -> i16 {
        ((1i32 << (self.bits - 1)) - 1) as i16
    }

    pub fn encode(&self, x: f64) -> i16 {
        let fs = self.full_scale_code() as f64;
        if x.is_nan() {
            return 0;
        }
        // f64::round ties away from zero.
        (x.clamp(-1.0, 1.0) * fs).round() as i16
    }

    pub fn decode(&self, code: i16) -> f64 {
        code as f64 / self.full_scale_code() as f64
    }
}
