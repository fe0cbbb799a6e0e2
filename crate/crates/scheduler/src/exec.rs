use std::fmt::Write as _;

use rfsoc_twin::bias::BiasChannel;
use rfsoc_twin::rfsoc::{RfsocError, Rig, SequenceResult};

use crate::job::{Failure, JobRequest, ResultFormat};

/// Bias outputs after a job's set-current commands.
pub fn apply_bias(request: &JobRequest) -> Result<Vec<BiasChannel>, Failure> {
    let mut outputs = vec![BiasChannel::default(); crate::job::BIAS_CHANNELS];
    for b in &request.bias_settings {
        let ch = outputs.get_mut(b.channel).ok_or_else(|| Failure {
            reason: "invalid-argument".into(),
            message: format!("bias channel {} out of range", b.channel),
        })?;
        ch.code = b.code;
        let amps = ch.current().map_err(|e| Failure {
            reason: e.kind().into(),
            message: e.to_string(),
        })?;
        ch.check_setpoint(amps).map_err(|e| Failure {
            reason: e.kind().into(),
            message: e.to_string(),
        })?;
    }
    Ok(outputs)
}

/// Loads every waveform of the job into a freshly built rig.
pub fn prepare_rig(request: &JobRequest) -> Result<Rig, RfsocError> {
    let mut rig = request.rig()?;
    for p in &request.pulse_sequence {
        let board = rig.board_mut(p.board)?;
        let rate = board.config().dac_rate_hz();
        let samples = p
            .waveform
            .render(rate, request.channel_seed(p.board, p.channel))
            .map_err(RfsocError::InvalidArgument)?;
        board.load_waveform(p.channel, &samples)?;
    }
    Ok(rig)
}

fn device_failure(e: RfsocError) -> Failure {
    Failure {
        reason: e.kind().into(),
        message: e.to_string(),
    }
}

/// Runs a job against the device models.
pub fn run(request: &JobRequest) -> Result<SequenceResult, Failure> {
    apply_bias(request)?;
    let mut rig = prepare_rig(request).map_err(device_failure)?;
    rig.run_sequence(&request.schedule(), request.repetitions, request.seed)
        .map_err(device_failure)
}

/// Runs a job and encodes its captures in the requested format.
pub fn execute_job(request: &JobRequest) -> Result<Vec<u8>, Failure> {
    let result = run(request)?;
    Ok(encode(&result, request.format))
}

/// Binary: every capture back to back in the binary capture format.
/// CSV: one block per capture, each introduced by a `#` comment line.
pub fn encode(result: &SequenceResult, format: ResultFormat) -> Vec<u8> {
    match format {
        ResultFormat::Binary => result.to_bytes(),
        ResultFormat::Csv => {
            let mut out = String::new();
            for rep in &result.repetitions {
                for (i, c) in rep.captures.iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "# repetition {} capture {} board {} start_s {:e}",
                        rep.index, i, c.board, c.start_time_s
                    );
                    out.push_str(&c.to_csv());
                }
            }
            out.into_bytes()
        }
    }
}
