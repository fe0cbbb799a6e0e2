use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Result, RfsocError};
use crate::signal::Waveform;
use crate::sync::ClockTime;

/// Magic bytes at the start of the binary capture format.
pub const CAPTURE_MAGIC: [u8; 2] = *b"CQ";

const HEADER_LEN: usize = 8;

/// Codes captured by one ADC trigger, one vector per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Capture {
    pub board: usize,
    pub sample_rate_hz: f64,
    pub start: ClockTime,
    pub start_time_s: f64,
    pub full_scale_code: i16,
    pub channels: Vec<Vec<i16>>,
}

impl Capture {
    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Channel `ch` scaled back to full-scale units.
    pub fn waveform(&self, ch: usize) -> Result<Waveform> {
        let codes = self
            .channels
            .get(ch)
            .ok_or_else(|| RfsocError::InvalidArgument(format!("no captured channel {ch}")))?;
        let fs = self.full_scale_code as f64;
        Ok(Waveform::new(
            codes.iter().map(|&c| c as f64 / fs).collect(),
            self.sample_rate_hz,
        )?)
    }

    /// CSV with a `ch0,ch1,...` header and one row per sample.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * self.n_channels() * 6 + 32);
        let header: Vec<String> = (0..self.n_channels()).map(|c| format!("ch{c}")).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for i in 0..self.len() {
            for (c, ch) in self.channels.iter().enumerate() {
                if c > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", ch[i]);
            }
            out.push('\n');
        }
        out
    }

    /// Compact little-endian format.
    ///
    /// An 8-byte header (`CQ`, `u16` channel count, `u32` samples per
    /// channel) followed by the `i16` codes, channel by channel.
    pub fn to_binary(&self) -> Vec<u8> {
        encode_binary(&self.channels)
    }
}

pub(crate) fn encode_binary(channels: &[Vec<i16>]) -> Vec<u8> {
    let len = channels.first().map_or(0, Vec::len);
    let mut out = Vec::with_capacity(HEADER_LEN + 2 * len * channels.len());
    out.extend_from_slice(&CAPTURE_MAGIC);
    out.extend_from_slice(&(channels.len() as u16).to_le_bytes());
    out.extend_from_slice(&(len as u32).to_le_bytes());
    for ch in channels {
        for &c in ch {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    out
}

/// Parses the binary format back into per-channel codes.
pub fn decode_binary(bytes: &[u8]) -> Result<Vec<Vec<i16>>> {
    let (channels, used) = decode_one(bytes)?;
    if used != bytes.len() {
        return Err(RfsocError::Format(format!(
            "{} trailing bytes after the capture",
            bytes.len() - used
        )));
    }
    Ok(channels)
}

/// Parses back-to-back captures, as produced by
/// [`SequenceResult::to_bytes`](super::SequenceResult::to_bytes).
pub fn decode_binary_stream(mut bytes: &[u8]) -> Result<Vec<Vec<Vec<i16>>>> {
    let mut out = Vec::new();
    while !bytes.is_empty() {
        let (channels, used) = decode_one(bytes)?;
        out.push(channels);
        bytes = &bytes[used..];
    }
    Ok(out)
}

fn decode_one(bytes: &[u8]) -> Result<(Vec<Vec<i16>>, usize)> {
    let fmt = |m: &str| RfsocError::Format(m.to_string());
    if bytes.len() < HEADER_LEN {
        return Err(fmt("capture shorter than its header"));
    }
    if bytes[..2] != CAPTURE_MAGIC {
        return Err(fmt("bad capture magic"));
    }
    let n_ch = u16::from_le_bytes([bytes[2], bytes[3]]) as usize;
    let len = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]) as usize;
    let body = &bytes[HEADER_LEN..];
    if body.len() < 2 * n_ch * len {
        return Err(RfsocError::Format(format!(
            "expected {} payload bytes for {n_ch} x {len} codes, found {}",
            2 * n_ch * len,
            body.len()
        )));
    }
    let channels = (0..n_ch)
        .map(|c| {
            body[2 * c * len..2 * (c + 1) * len]
                .chunks_exact(2)
                .map(|b| i16::from_le_bytes([b[0], b[1]]))
                .collect()
        })
        .collect();
    Ok((channels, HEADER_LEN + 2 * n_ch * len))
}
