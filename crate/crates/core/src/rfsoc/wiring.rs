use serde::{Deserialize, Serialize};

use super::analog::{AnalogSignal, AnalogSource, LinkedSource, Tone};
use super::board::AdcInputs;
use super::{invalid, Result};
use crate::signal::BalunModel;

/// What drives one end of a cable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SourceRef {
    Dac { board: usize, channel: usize },
    Tone(Tone),
}

/// A cable from a source to one ADC input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WireLink {
    pub source: SourceRef,
    pub adc_board: usize,
    pub adc_channel: usize,
    /// `None` (`null`) for a direct, unfiltered connection. Omitted, it is
    /// the default balun.
    #[serde(default = "default_balun")]
    pub balun: Option<BalunModel>,
    #[serde(default = "unit_gain")]
    pub gain: f64,
}

fn default_balun() -> Option<BalunModel> {
    Some(BalunModel::default())
}

fn unit_gain() -> f64 {
    1.0
}

impl WireLink {
    /// A DAC-to-ADC loopback through the default balun at unit gain.
    pub fn loopback(dac_board: usize, dac_channel: usize, adc_board: usize, adc_channel: usize) -> Self {
        Self {
            source: SourceRef::Dac {
                board: dac_board,
                channel: dac_channel,
            },
            adc_board,
            adc_channel,
            balun: Some(BalunModel::default()),
            gain: 1.0,
        }
    }

    pub fn tone(tone: Tone, adc_board: usize, adc_channel: usize) -> Self {
        Self {
            source: SourceRef::Tone(tone),
            adc_board,
            adc_channel,
            balun: Some(BalunModel::default()),
            gain: 1.0,
        }
    }

    pub fn without_balun(self) -> Self {
        Self { balun: None, ..self }
    }

    pub fn with_balun(self, balun: BalunModel) -> Self {
        Self {
            balun: Some(balun),
            ..self
        }
    }

    pub fn with_gain(self, gain: f64) -> Self {
        Self { gain, ..self }
    }
}

/// Cabling between converters; each ADC input has at most one driver.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Wiring {
    links: Vec<WireLink>,
}

impl Wiring {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn links(&self) -> &[WireLink] {
        &self.links
    }

    pub fn connect(&mut self, link: WireLink) -> Result<()> {
        if !link.gain.is_finite() {
            return Err(invalid("link gain must be finite"));
        }
        if let Some(b) = &link.balun {
            b.validate()?;
        }
        if self
            .links
            .iter()
            .any(|l| l.adc_board == link.adc_board && l.adc_channel == link.adc_channel)
        {
            return Err(invalid(format!(
                "ADC input {} on board {} is already driven",
                link.adc_channel, link.adc_board
            )));
        }
        self.links.push(link);
        Ok(())
    }

    /// Inputs seen by `adc_board`, given the signals currently playing.
    ///
    /// DAC links whose channel is silent contribute nothing.
    pub fn resolve(&self, signals: &[AnalogSignal], adc_board: usize) -> AdcInputs {
        let mut inputs = AdcInputs::new();
        for link in self.links.iter().filter(|l| l.adc_board == adc_board) {
            let wrap = |source| LinkedSource {
                source,
                balun: link.balun,
                gain: link.gain,
            };
            let sources: Vec<LinkedSource> = match link.source {
                SourceRef::Tone(t) => vec![wrap(AnalogSource::Tone(t))],
                SourceRef::Dac { board, channel } => signals
                    .iter()
                    .filter(|s| s.board == board && s.channel == channel)
                    .map(|s| wrap(AnalogSource::Playback(s.clone())))
                    .collect(),
            };
            if !sources.is_empty() {
                inputs.entry(link.adc_channel).or_default().extend(sources);
            }
        }
        inputs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn omitted_fields_take_loopback_defaults() {
        let v: WireLink = serde_json::from_str(
            r#"{"source": {"kind": "dac", "board": 0, "channel": 0}, "adc_board": 0, "adc_channel": 0}"#,
        )
        .unwrap();
        assert_eq!(v, WireLink::loopback(0, 0, 0, 0));
        let direct: WireLink = serde_json::from_str(
            r#"{"source": {"kind": "dac", "board": 0, "channel": 0}, "adc_board": 0, "adc_channel": 0, "balun": null}"#,
        )
        .unwrap();
        assert_eq!(direct.balun, None);
    }

    #[test]
    fn one_driver_per_input() {
        let mut w = Wiring::new();
        w.connect(WireLink::loopback(0, 0, 0, 0)).unwrap();
        w.connect(WireLink::loopback(0, 1, 0, 1)).unwrap();
        w.connect(WireLink::loopback(0, 2, 1, 0)).unwrap();
        assert!(w.connect(WireLink::tone(Tone::new(1e9, 0.5), 0, 0)).is_err());
        assert_eq!(w.links().len(), 3);
    }

    #[test]
    fn tone_resolves_without_signals() {
        let mut w = Wiring::new();
        w.connect(WireLink::tone(Tone::new(1e9, 0.5), 0, 3).without_balun()).unwrap();
        let inputs = w.resolve(&[], 0);
        assert_eq!(inputs.len(), 1);
        assert_eq!(inputs[&3][0].balun, None);
        assert!(w.resolve(&[], 1).is_empty());
    }

    #[test]
    fn bad_links_rejected() {
        let mut w = Wiring::new();
        assert!(w.connect(WireLink::loopback(0, 0, 0, 0).with_gain(f64::NAN)).is_err());
        let bad = BalunModel {
            low_cut_hz: 1e9,
            high_cut_hz: 1e6,
            rolloff_order: 2,
        };
        assert!(w.connect(WireLink::loopback(0, 0, 0, 0).with_balun(bad)).is_err());
    }
}
