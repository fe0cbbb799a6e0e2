use anyhow::{bail, Context};
use clap::Args;
use rfsoc_twin::derive_seed;
use rfsoc_twin::rfsoc::{BoardConfig, LoopbackBench};
use rfsoc_twin::signal::{alias_to_first_zone, nyquist_zone_of, voss_pink_noise, zone_image, DecoderMode, PowerModel};
use serde::Serialize;
use serde_json::json;

use super::Ctx;
use crate::analysis::{log_binned_periodogram, slope_db_per_decade};
use crate::manifest::{csv, Run};

#[derive(Debug, Clone, Args, Serialize)]
pub struct PinkNoiseArgs {
    #[arg(long, default_value_t = 1 << 20)]
    pub samples: usize,
    #[arg(long, default_value_t = rfsoc_twin::signal::DEFAULT_VOSS_ROWS)]
    pub rows: usize,
    /// Frequency bands per decade in the binned periodogram.
    #[arg(long, default_value_t = 10)]
    pub bins_per_decade: usize,
    /// Skip writing the raw samples.
    #[arg(long)]
    pub no_samples: bool,
}

pub fn pink_noise(ctx: &Ctx, a: PinkNoiseArgs) -> anyhow::Result<()> {
    let mut run = Run::start(&ctx.global.out, "pink-noise", ctx.global.seed, &a)?;
    let x = voss_pink_noise(a.samples, a.rows, ctx.global.seed)?;
    let psd = log_binned_periodogram(&x, 1.0, a.bins_per_decade)?;
    let (lo, hi) = central_decades(a.samples);
    let slope = slope_db_per_decade(&psd, lo, hi).context("too few points for a slope fit")?;
    if !a.no_samples {
        run.write("pink_noise.csv", csv(&["value"], x.iter().map(|&v| vec![v])))?;
    }
    run.write(
        "pink_psd.csv",
        csv(&["frequency_cycles_per_sample", "power"], psd.iter().map(|&(f, p)| vec![f, p])),
    )?;
    println!("slope {slope:.2} dB/decade between {lo:.3e} and {hi:.3e} cycles/sample");
    run.finish(json!({"slope_db_per_decade": slope, "fit_low": lo, "fit_high": hi}))?;
    Ok(())
}

/// The two decades centred (geometrically) between the lowest non-zero
/// frequency `1/n` and Nyquist, in cycles per sample.
pub fn central_decades(n: usize) -> (f64, f64) {
    let centre = (0.5 / n as f64).sqrt();
    (centre / 10.0, centre * 10.0)
}

/// Parses `a..b` (exclusive), `a..=b`, a single zone or a comma list.
pub fn parse_zones(s: &str) -> anyhow::Result<Vec<u64>> {
    let zones: Vec<u64> = if let Some((a, b)) = s.split_once("..=") {
        (a.trim().parse()?..=b.trim().parse()?).collect()
    } else if let Some((a, b)) = s.split_once("..") {
        (a.trim().parse()?..b.trim().parse()?).collect()
    } else {
        s.split(',').map(|z| z.trim().parse()).collect::<Result<_, _>>()?
    };
    if zones.is_empty() || zones.contains(&0) {
        bail!("zones must be a non-empty set of positive integers, got {s:?}");
    }
    Ok(zones)
}

/// Sets a converter rate multiplier so the rate matches `rate_hz`.
fn multiplier_for(cfg: &BoardConfig, rate_hz: f64) -> anyhow::Result<u32> {
    let m = rate_hz / cfg.master_clock_hz;
    if !(m >= 1.0 && (m - m.round()).abs() < 1e-9 * m) {
        bail!("{rate_hz} Hz is not a whole multiple of the {} Hz master clock", cfg.master_clock_hz);
    }
    Ok(m.round() as u32)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SnrSweepArgs {
    /// Zones to visit: `1..9`, `1..=8`, `8` or `1,4,8`.
    #[arg(long, default_value = "1..9")]
    pub zones: String,
    /// First-zone tone; zone k uses its k-th image.
    #[arg(long, default_value_t = 800e6)]
    pub f0: f64,
    #[arg(long)]
    pub adc_rate: Option<f64>,
    #[arg(long)]
    pub dac_rate: Option<f64>,
    /// Noise realisations averaged per zone.
    #[arg(long, default_value_t = 1)]
    pub repeats: u64,
    /// Feed the ADC directly instead of through the balun.
    #[arg(long)]
    pub no_balun: bool,
}

pub fn snr_sweep(ctx: &Ctx, a: SnrSweepArgs) -> anyhow::Result<()> {
    let zones = parse_zones(&a.zones)?;
    if a.repeats == 0 {
        bail!("--repeats must be at least 1");
    }
    let mut bench = LoopbackBench {
        config: ctx.config.board.clone(),
        ..LoopbackBench::default()
    };
    if let Some(r) = a.adc_rate {
        bench.config.adc_rate_multiplier = multiplier_for(&bench.config, r)?;
    }
    if let Some(r) = a.dac_rate {
        bench.config.dac_rate_multiplier = multiplier_for(&bench.config, r)?;
    }
    if a.no_balun {
        bench.balun = None;
    }
    bench.config.validate()?;
    let fs = bench.config.adc_rate_hz();
    let mut run = Run::start(
        &ctx.global.out,
        "snr-sweep",
        ctx.global.seed,
        json!({"args": &a, "board": &bench.config}),
    )?;
    let mut rows = Vec::new();
    for &zone in &zones {
        let tone = zone_image(a.f0, fs, zone)?;
        let mut snr_sum = 0.0;
        let mut last = None;
        for r in 0..a.repeats {
            let reading = bench.measure(tone, derive_seed(ctx.global.seed, &[zone, r]))?;
            snr_sum += reading.snr;
            last = Some(reading);
        }
        let reading = last.expect("at least one repeat");
        let snr = snr_sum / a.repeats as f64;
        println!(
            "zone {zone}: tone {:.6} GHz, alias {:.3} MHz, SNR {snr:.1} ({:.1} dB)",
            tone / 1e9,
            reading.alias_hz / 1e6,
            10.0 * snr.log10()
        );
        rows.push(vec![
            zone as f64,
            tone,
            reading.alias_hz,
            reading.peak_hz,
            snr,
            10.0 * snr.log10(),
        ]);
    }
    run.write(
        "snr_sweep.csv",
        csv(&["zone", "tone_hz", "alias_hz", "peak_hz", "snr", "snr_db"], rows.clone()),
    )?;
    let first = rows.first().map(|r| r[4]);
    let last = rows.last().map(|r| r[4]);
    run.finish(json!({"first_zone_snr": first, "last_zone_snr": last}))?;
    Ok(())
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PowerSweepArgs {
    #[arg(long, default_value_t = 10e6)]
    pub f_min: f64,
    #[arg(long, default_value_t = 14e9)]
    pub f_max: f64,
    #[arg(long, default_value_t = 1400)]
    pub points: usize,
    #[arg(long)]
    pub dac_rate: Option<f64>,
    /// Band whose means are reported, in Hz: `low,high`.
    #[arg(long, default_value = "7e9,10e9")]
    pub band: String,
}

pub fn power_sweep(ctx: &Ctx, a: PowerSweepArgs) -> anyhow::Result<()> {
    if a.points < 2 || !(a.f_max > a.f_min) {
        bail!("need at least two points and f_max > f_min");
    }
    let (lo, hi) = a
        .band
        .split_once(',')
        .context("--band must be `low,high`")
        .and_then(|(l, h)| Ok((l.trim().parse::<f64>()?, h.trim().parse::<f64>()?)))?;
    let mut cfg = ctx.config.board.clone();
    if let Some(r) = a.dac_rate {
        cfg.dac_rate_multiplier = multiplier_for(&cfg, r)?;
    }
    let model = PowerModel::default_for_rate(cfg.dac_rate_hz())?;
    let mut run = Run::start(
        &ctx.global.out,
        "power-sweep",
        ctx.global.seed,
        json!({"args": &a, "dac_rate_hz": cfg.dac_rate_hz(), "full_scale_dbm": model.full_scale_dbm}),
    )?;
    let step = (a.f_max - a.f_min) / (a.points - 1) as f64;
    let mut rows = Vec::with_capacity(a.points);
    for k in 0..a.points {
        let f = a.f_min + k as f64 * step;
        rows.push(vec![
            f,
            model.power_dbm(f, DecoderMode::Nrz)?,
            model.power_dbm(f, DecoderMode::Mix)?,
        ]);
    }
    run.write("power_sweep.csv", csv(&["frequency_hz", "nrz_dbm", "mix_dbm"], rows))?;
    let nrz = model.band_mean_dbm(lo, hi, DecoderMode::Nrz)?;
    let mix = model.band_mean_dbm(lo, hi, DecoderMode::Mix)?;
    println!(
        "mean over {:.2}-{:.2} GHz: NRZ {nrz:.2} dBm, Mix {mix:.2} dBm (full scale {:.2} dBm)",
        lo / 1e9,
        hi / 1e9,
        model.full_scale_dbm
    );
    run.finish(json!({"band_hz": [lo, hi], "nrz_mean_dbm": nrz, "mix_mean_dbm": mix}))?;
    Ok(())
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AliasArgs {
    /// Input frequency, Hz.
    #[arg(long)]
    pub f: f64,
    /// Sample rate, Hz.
    #[arg(long)]
    pub fs: f64,
}

pub fn alias(ctx: &Ctx, a: AliasArgs) -> anyhow::Result<()> {
    let alias = alias_to_first_zone(a.f, a.fs)?;
    let zone = nyquist_zone_of(a.f, a.fs)?;
    let mut run = Run::start(&ctx.global.out, "alias", ctx.global.seed, &a)?;
    println!("{:.3} MHz, zone {zone}", alias / 1e6);
    let doc = json!({"frequency_hz": a.f, "sample_rate_hz": a.fs, "alias_hz": alias, "zone": zone});
    run.write("alias.json", serde_json::to_string_pretty(&doc)? + "\n")?;
    run.finish(&doc)?;
    Ok(())
}
