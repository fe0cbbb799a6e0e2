use anyhow::bail;
use clap::Args;
use rfsoc_twin::bias::{
    amplitude_noise_spectrum, cavity_transmission_map, log_spaced_taus, overlapping_allan_deviation, simulate_trace,
    total_rms_noise, BiasChannel, TraceBench,
};
use serde::Serialize;
use serde_json::json;

use super::Ctx;
use crate::manifest::{csv, Run};

#[derive(Debug, Clone, Args, Serialize)]
pub struct BiasNoiseArgs {
    #[arg(long, default_value_t = 1.0)]
    pub milliamps: f64,
    #[arg(long, default_value_t = 2e6)]
    pub rate: f64,
    /// Recording length, s.
    #[arg(long, default_value_t = 1.0)]
    pub duration: f64,
    /// Digitizer resolution, A.
    #[arg(long, default_value_t = 390e-9)]
    pub resolution: f64,
    /// Band for the total rms figure, Hz: `low,high`.
    #[arg(long, default_value = "0.1,10e3")]
    pub band: String,
    /// Spectrum points kept per decade in the output.
    #[arg(long, default_value_t = 20)]
    pub points_per_decade: usize,
}

fn parse_band(s: &str) -> anyhow::Result<(f64, f64)> {
    let Some((l, h)) = s.split_once(',') else {
        bail!("band must be `low,high`, got {s:?}");
    };
    Ok((l.trim().parse()?, h.trim().parse()?))
}

pub fn bias_noise(ctx: &Ctx, a: BiasNoiseArgs) -> anyhow::Result<()> {
    let (lo, hi) = parse_band(&a.band)?;
    let bench = TraceBench {
        sample_rate_hz: a.rate,
        duration_s: a.duration,
        resolution_amps: a.resolution,
    };
    let ch = BiasChannel::default();
    let mut run = Run::start(&ctx.global.out, "bias-noise", ctx.global.seed, json!({"args": &a, "channel": &ch}))?;
    let trace = simulate_trace(&ch, a.milliamps * 1e-3, &bench, ctx.global.seed)?;
    let spec = amplitude_noise_spectrum(&trace)?;
    let band_hi = hi.min(a.rate / 2.0);
    let rms = total_rms_noise(&spec, lo.max(spec.resolution_hz), band_hi)?;

    // Keep the output small: average the density over log-spaced bands.
    let per = a.points_per_decade.max(1) as f64;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut band: Option<i64> = None;
    let mut acc = (0.0, 0.0, 0usize);
    let f1 = spec.resolution_hz;
    for (&f, &d) in spec.frequencies_hz.iter().zip(&spec.density).skip(1) {
        let b = ((f / f1).log10() * per).floor() as i64;
        if band.is_some() && band != Some(b) {
            rows.push(vec![acc.0 / acc.2 as f64, (acc.1 / acc.2 as f64).sqrt()]);
            acc = (0.0, 0.0, 0);
        }
        band = Some(b);
        acc.0 += f;
        acc.1 += d * d;
        acc.2 += 1;
    }
    if acc.2 > 0 {
        rows.push(vec![acc.0 / acc.2 as f64, (acc.1 / acc.2 as f64).sqrt()]);
    }
    run.write("bias_noise_spectrum.csv", csv(&["frequency_hz", "density_a_per_rthz"], rows))?;
    println!("total noise {rms:.3e} A rms over {lo}-{band_hi} Hz");
    run.finish(json!({"rms_amps": rms, "band_hz": [lo, band_hi], "mean_amps": trace.mean()}))?;
    Ok(())
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AllanArgs {
    #[arg(long, default_value_t = 18.0)]
    pub hours: f64,
    /// Recording sample rate, S/s.
    #[arg(long, default_value_t = 500.0)]
    pub rate: f64,
    #[arg(long, default_value_t = 1.0)]
    pub milliamps: f64,
    /// Longest trace simulated; longer recordings are decimated to this
    /// many points over the same duration.
    #[arg(long, default_value_t = 1_000_000)]
    pub max_points: usize,
    #[arg(long, default_value_t = 195e-9)]
    pub resolution: f64,
    #[arg(long, default_value_t = 10)]
    pub per_decade: usize,
}

pub fn allan(ctx: &Ctx, a: AllanArgs) -> anyhow::Result<()> {
    let mut bench = TraceBench {
        sample_rate_hz: a.rate,
        duration_s: a.hours * 3600.0,
        resolution_amps: a.resolution,
    };
    if bench.n_samples() > a.max_points {
        bench = bench.decimated(a.max_points);
    }
    let ch = BiasChannel::default();
    let mut run = Run::start(
        &ctx.global.out,
        "allan",
        ctx.global.seed,
        json!({"args": &a, "bench": &bench, "channel": &ch}),
    )?;
    let trace = simulate_trace(&ch, a.milliamps * 1e-3, &bench, ctx.global.seed)?;
    let mut taus = log_spaced_taus(&trace, a.per_decade);
    let m500 = (500.0 * bench.sample_rate_hz).round();
    if m500 >= 1.0 && 2.0 * m500 < trace.len() as f64 {
        taus.push(m500 / bench.sample_rate_hz);
        taus.sort_by(f64::total_cmp);
        taus.dedup();
    }
    let adev = overlapping_allan_deviation(&trace, &taus)?;
    run.write(
        "allan.csv",
        csv(&["tau_s", "adev"], taus.iter().zip(&adev).map(|(&t, &d)| vec![t, d])),
    )?;
    let near = taus
        .iter()
        .zip(&adev)
        .min_by(|x, y| (x.0 - 500.0).abs().total_cmp(&(y.0 - 500.0).abs()))
        .map(|(&t, &d)| (t, d));
    if let Some((t, d)) = near {
        println!("ADEV {d:.3e} at tau {t:.1} s ({} points at {:.3} S/s)", trace.len(), bench.sample_rate_hz);
    }
    run.finish(json!({"points": trace.len(), "sample_rate_hz": bench.sample_rate_hz, "near_500_s": near}))?;
    Ok(())
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FluxMapArgs {
    #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
    pub ma_min: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    pub ma_max: f64,
    #[arg(long, default_value_t = 401)]
    pub points: usize,
    /// Probe span around the bare cavity frequency, Hz.
    #[arg(long, default_value_t = 8e6)]
    pub span: f64,
    #[arg(long, default_value_t = 161)]
    pub probe_points: usize,
}

/// Interior local maxima of a sampled curve.
pub fn count_maxima(y: &[f64]) -> usize {
    y.windows(3).filter(|w| w[1] > w[0] && w[1] >= w[2]).count()
}

pub fn flux_map(ctx: &Ctx, a: FluxMapArgs) -> anyhow::Result<()> {
    if a.points < 2 || a.probe_points < 2 || !(a.ma_max > a.ma_min) {
        bail!("need at least two points on each axis and ma_max > ma_min");
    }
    let params = ctx.config.flux;
    let mut run = Run::start(&ctx.global.out, "flux-map", ctx.global.seed, json!({"args": &a, "flux": &params}))?;
    let amps: Vec<f64> = (0..a.points)
        .map(|k| (a.ma_min + (a.ma_max - a.ma_min) * k as f64 / (a.points - 1) as f64) * 1e-3)
        .collect();
    let probes: Vec<f64> = (0..a.probe_points)
        .map(|k| params.cavity_f0_hz - a.span / 2.0 + a.span * k as f64 / (a.probe_points - 1) as f64)
        .collect();
    let map = cavity_transmission_map(&params, &amps, &probes)?;
    let centres: Vec<f64> = amps.iter().map(|&i| params.center_frequency_hz(i)).collect();
    run.write(
        "flux_center.csv",
        csv(&["current_a", "center_hz"], amps.iter().zip(&centres).map(|(&i, &f)| vec![i, f])),
    )?;
    let mut rows = Vec::with_capacity(amps.len() * probes.len());
    for (i, row) in amps.iter().zip(&map) {
        for (f, t) in probes.iter().zip(row) {
            rows.push(vec![*i, *f, *t]);
        }
    }
    run.write("flux_map.csv", csv(&["current_a", "probe_hz", "transmission"], rows))?;
    let maxima = count_maxima(&centres);
    println!("{maxima} resonance maxima between {} and {} mA", a.ma_min, a.ma_max);
    run.finish(json!({"maxima": maxima}))?;
    Ok(())
}
