//! Job payloads and their lifecycle.

use std::f64::consts::PI;

use rfsoc_twin::bias::BiasChannel;
use rfsoc_twin::rfsoc::{BoardConfig, RetriggerClash, Rig, Schedule, ScheduledTrigger, WireLink};
use rfsoc_twin::signal::voss_pink_noise;
use rfsoc_twin::derive_seed;
use serde::{Deserialize, Serialize};

/// Version of the request document accepted by this broker.
pub const SCHEMA_VERSION: u32 = 1;

/// Number of outputs on the bias source addressed by `bias_settings`.
pub const BIAS_CHANNELS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResultFormat {
    #[default]
    Binary,
    Csv,
}

impl ResultFormat {
    pub fn content_type(self) -> &'static str {
        match self {
            ResultFormat::Binary => "application/octet-stream",
            ResultFormat::Csv => "text/csv",
        }
    }
}

/// A DAC buffer, inline or generated from a named primitive.
///
/// Primitive lengths are in DAC samples; times are in samples too, so a
/// waveform reads the same at any sample rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WaveformSpec {
    Samples {
        values: Vec<f64>,
    },
    Rectangle {
        len: usize,
        amplitude: f64,
        #[serde(default)]
        start: usize,
        width: usize,
    },
    Gaussian {
        len: usize,
        amplitude: f64,
        center: f64,
        sigma: f64,
    },
    Sine {
        len: usize,
        frequency_hz: f64,
        amplitude: f64,
        #[serde(default)]
        phase_rad: f64,
    },
    PinkNoise {
        len: usize,
        amplitude: f64,
        #[serde(default = "default_rows")]
        rows: usize,
        /// Defaults to a stream derived from the job seed and the channel.
        #[serde(default)]
        seed: Option<u64>,
    },
}

fn default_rows() -> usize {
    rfsoc_twin::signal::DEFAULT_VOSS_ROWS
}

impl WaveformSpec {
    /// Samples in full-scale units at DAC rate `dac_rate_hz`.
    pub fn render(&self, dac_rate_hz: f64, fallback_seed: u64) -> Result<Vec<f64>, String> {
        match self {
            WaveformSpec::Samples { values } => Ok(values.clone()),
            WaveformSpec::Rectangle {
                len,
                amplitude,
                start,
                width,
            } => Ok((0..*len)
                .map(|i| if i >= *start && i < start + width { *amplitude } else { 0.0 })
                .collect()),
            WaveformSpec::Gaussian {
                len,
                amplitude,
                center,
                sigma,
            } => {
                if !(*sigma > 0.0) {
                    return Err(format!("gaussian sigma must be positive, got {sigma}"));
                }
                Ok((0..*len)
                    .map(|i| {
                        let x = (i as f64 - center) / sigma;
                        amplitude * (-0.5 * x * x).exp()
                    })
                    .collect())
            }
            WaveformSpec::Sine {
                len,
                frequency_hz,
                amplitude,
                phase_rad,
            } => {
                let w = 2.0 * PI * frequency_hz / dac_rate_hz;
                Ok((0..*len).map(|i| amplitude * (w * i as f64 + phase_rad).sin()).collect())
            }
            WaveformSpec::PinkNoise {
                len,
                amplitude,
                rows,
                seed,
            } => {
                let v = voss_pink_noise(*len, *rows, seed.unwrap_or(fallback_seed)).map_err(|e| e.to_string())?;
                Ok(v.into_iter().map(|x| amplitude * x).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelProgram {
    #[serde(default)]
    pub board: usize,
    pub channel: usize,
    pub waveform: WaveformSpec,
}

/// Set-current command for one bias output: channel plus 16-bit code.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasSetting {
    pub channel: usize,
    pub code: u32,
}

fn default_boards() -> usize {
    1
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

/// What a user submits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobRequest {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    #[serde(default)]
    pub idempotency_key: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub repetitions: usize,
    #[serde(default = "default_boards")]
    pub boards: usize,
    #[serde(default)]
    pub board_config: BoardConfig,
    pub trigger_timings: Vec<ScheduledTrigger>,
    #[serde(default)]
    pub pulse_sequence: Vec<ChannelProgram>,
    #[serde(default)]
    pub wiring: Vec<WireLink>,
    #[serde(default)]
    pub bias_settings: Vec<BiasSetting>,
    #[serde(default)]
    pub format: ResultFormat,
}

/// Why a request was refused at submission.
#[derive(Debug, Clone, PartialEq)]
pub enum Rejection {
    /// Malformed document; `path` locates the offending field.
    Schema { path: String, message: String },
    /// Triggers closer than the re-trigger limit.
    Timing { clashes: Vec<RetriggerClash> },
}

impl Rejection {
    fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Rejection::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl JobRequest {
    pub fn parse(body: &[u8]) -> Result<Self, Rejection> {
        let de = &mut serde_json::Deserializer::from_slice(body);
        let req: JobRequest = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Rejection::schema(path, e.into_inner().to_string())
        })?;
        req.validate()?;
        Ok(req)
    }

    pub fn schedule(&self) -> Schedule {
        Schedule::new(self.trigger_timings.clone())
    }

    /// A rig ready for this job: boards built and cabled, no waveforms loaded.
    pub fn rig(&self) -> Result<Rig, rfsoc_twin::rfsoc::RfsocError> {
        let mut rig = Rig::uniform(&self.board_config, self.boards)?;
        for link in &self.wiring {
            rig.connect(*link)?;
        }
        Ok(rig)
    }

    /// Seed used for a pink-noise channel that names none.
    pub fn channel_seed(&self, board: usize, channel: usize) -> u64 {
        derive_seed(self.seed, &[0x70696e6b, board as u64, channel as u64])
    }

    /// Checks everything that does not need the devices to run.
    pub fn validate(&self) -> Result<(), Rejection> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Rejection::schema(
                "schema_version",
                format!("unsupported schema version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if self.repetitions == 0 {
            return Err(Rejection::schema("repetitions", "repetitions must be at least 1"));
        }
        if self.boards == 0 {
            return Err(Rejection::schema("boards", "a job needs at least one board"));
        }
        if self.trigger_timings.is_empty() {
            return Err(Rejection::schema("trigger_timings", "at least one trigger is required"));
        }
        if let Err(e) = self.board_config.validate() {
            return Err(Rejection::schema("board_config", e.to_string()));
        }
        for (i, t) in self.trigger_timings.iter().enumerate() {
            if !t.time_s.is_finite() || t.time_s < 0.0 {
                return Err(Rejection::schema(
                    format!("trigger_timings[{i}].time_s"),
                    "trigger time must be finite and non-negative",
                ));
            }
            if let Some(b) = t.boards.iter().find(|&&b| b >= self.boards) {
                return Err(Rejection::schema(
                    format!("trigger_timings[{i}].boards"),
                    format!("board {b} out of range 0..{}", self.boards),
                ));
            }
        }
        for (i, p) in self.pulse_sequence.iter().enumerate() {
            if p.board >= self.boards {
                return Err(Rejection::schema(
                    format!("pulse_sequence[{i}].board"),
                    format!("board {} out of range 0..{}", p.board, self.boards),
                ));
            }
            if p.channel >= self.board_config.n_dac_channels {
                return Err(Rejection::schema(
                    format!("pulse_sequence[{i}].channel"),
                    format!("channel {} out of range 0..{}", p.channel, self.board_config.n_dac_channels),
                ));
            }
        }
        for (i, b) in self.bias_settings.iter().enumerate() {
            if b.channel >= BIAS_CHANNELS {
                return Err(Rejection::schema(
                    format!("bias_settings[{i}].channel"),
                    format!("bias channel {} out of range 0..{BIAS_CHANNELS}", b.channel),
                ));
            }
            if BiasChannel::default().current_of_code(b.code).is_err() {
                return Err(Rejection::schema(
                    format!("bias_settings[{i}].code"),
                    format!("code {} does not fit 16 bits", b.code),
                ));
            }
        }
        let rig = self.rig().map_err(|e| Rejection::schema("wiring", e.to_string()))?;
        let clashes = rig
            .retrigger_clashes(&self.schedule())
            .map_err(|e| Rejection::schema("trigger_timings", e.to_string()))?;
        if !clashes.is_empty() {
            return Err(Rejection::Timing { clashes });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    pub fn is_finished(self) -> bool {
        matches!(self, JobStatus::Done | JobStatus::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub token: String,
    pub expires_at_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRef {
    pub file: String,
    pub len: u64,
    pub format: ResultFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub reason: String,
    pub message: String,
}

/// A job as held by the broker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    /// Submission order; dispatch is by ascending `seq`.
    pub seq: u64,
    pub request: JobRequest,
    pub status: JobStatus,
    pub submitted_at_ms: u64,
    pub started_at_ms: Option<u64>,
    pub finished_at_ms: Option<u64>,
    pub attempts: u32,
    pub claim: Option<Claim>,
    pub result: Option<ResultRef>,
    pub failure: Option<Failure>,
}

/// The status document returned to users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobView {
    pub id: String,
    pub status: JobStatus,
    pub submitted_at_ms: u64,
    pub started_at_ms: Option<u64>,
    pub finished_at_ms: Option<u64>,
    pub attempts: u32,
    pub format: ResultFormat,
    pub result_bytes: Option<u64>,
    pub failure: Option<Failure>,
}

impl From<&Job> for JobView {
    fn from(j: &Job) -> Self {
        Self {
            id: j.id.clone(),
            status: j.status,
            submitted_at_ms: j.submitted_at_ms,
            started_at_ms: j.started_at_ms,
            finished_at_ms: j.finished_at_ms,
            attempts: j.attempts,
            format: j.request.format,
            result_bytes: j.result.as_ref().map(|r| r.len),
            failure: j.failure.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> serde_json::Value {
        serde_json::json!({
            "repetitions": 2,
            "trigger_timings": [
                {"time_s": 0.0, "target": "adc"},
                {"time_s": 1e-6, "target": "dac"}
            ],
            "pulse_sequence": [
                {"channel": 0, "waveform": {"kind": "sine", "len": 4096, "frequency_hz": 8e8, "amplitude": 0.9}}
            ],
            "wiring": [
                {"source": {"kind": "dac", "board": 0, "channel": 0}, "adc_board": 0, "adc_channel": 0,
                 "balun": null, "gain": 1.0}
            ]
        })
    }

    fn parse(v: &serde_json::Value) -> Result<JobRequest, Rejection> {
        JobRequest::parse(&serde_json::to_vec(v).unwrap())
    }

    #[test]
    fn minimal_request_parses_with_defaults() {
        let r = parse(&minimal()).unwrap();
        assert_eq!(r.schema_version, SCHEMA_VERSION);
        assert_eq!(r.boards, 1);
        assert_eq!(r.format, ResultFormat::Binary);
        assert_eq!(r.board_config, BoardConfig::default());
    }

    #[test]
    fn zero_repetitions_rejected() {
        let mut v = minimal();
        v["repetitions"] = 0.into();
        match parse(&v) {
            Err(Rejection::Schema { path, .. }) => assert_eq!(path, "repetitions"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_field_reports_path() {
        let mut v = minimal();
        v["pulse_sequence"][0]["waveform"]["len"] = "long".into();
        match parse(&v) {
            Err(Rejection::Schema { path, message }) => {
                assert_eq!(path, "pulse_sequence[0].waveform");
                assert!(message.contains("invalid type"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let mut v = minimal();
        v["trigger_timings"][1]["time_s"] = "soon".into();
        match parse(&v) {
            Err(Rejection::Schema { path, .. }) => assert_eq!(path, "trigger_timings[1].time_s"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_field_rejected() {
        let mut v = minimal();
        v["colour"] = "blue".into();
        assert!(matches!(parse(&v), Err(Rejection::Schema { .. })));
    }

    #[test]
    fn close_dac_triggers_rejected_with_indices() {
        let mut v = minimal();
        v["trigger_timings"] = serde_json::json!([
            {"time_s": 0.0, "target": "adc"},
            {"time_s": 0.0, "target": "dac"},
            {"time_s": 10e-6, "target": "dac"}
        ]);
        match parse(&v) {
            Err(Rejection::Timing { clashes }) => {
                assert_eq!(clashes.len(), 1);
                assert_eq!((clashes[0].previous, clashes[0].index), (1, 2));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bias_code_must_fit() {
        let mut v = minimal();
        v["bias_settings"] = serde_json::json!([{"channel": 0, "code": 65536}]);
        match parse(&v) {
            Err(Rejection::Schema { path, .. }) => assert_eq!(path, "bias_settings[0].code"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn primitives_render() {
        let rect = WaveformSpec::Rectangle {
            len: 10,
            amplitude: 0.5,
            start: 2,
            width: 3,
        };
        assert_eq!(rect.render(1e9, 0).unwrap(), vec![0.0, 0.0, 0.5, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0]);

        let g = WaveformSpec::Gaussian {
            len: 9,
            amplitude: 1.0,
            center: 4.0,
            sigma: 1.5,
        }
        .render(1e9, 0)
        .unwrap();
        assert_eq!(g[4], 1.0);
        assert!((g[3] - g[5]).abs() < 1e-15);

        let s = WaveformSpec::Sine {
            len: 4,
            frequency_hz: 250e6,
            amplitude: 1.0,
            phase_rad: 0.0,
        }
        .render(1e9, 0)
        .unwrap();
        assert!((s[1] - 1.0).abs() < 1e-12 && s[2].abs() < 1e-12);

        let p = WaveformSpec::PinkNoise {
            len: 256,
            amplitude: 0.5,
            rows: 8,
            seed: None,
        };
        let a = p.render(1e9, 3).unwrap();
        assert_eq!(a, p.render(1e9, 3).unwrap());
        assert!(a.iter().all(|x| x.abs() <= 0.5));
    }
}
