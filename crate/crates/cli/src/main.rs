//! dmi-sim: seeded Monte Carlo SNR sweeps of the blind modulation
//! identification pipeline, reported as CSV.
//!
//! Flags override values from an optional TOML config file (`--config`),
//! which in turn overrides the built-in defaults (a 2x6 system, all six
//! schemes, SNR -5..10 dB in 2.5 dB steps, 2048 symbols/antenna, 500
//! trials/point, denoised feature set).

use anyhow::Context;
use clap::Parser;
use dmi_core::harness::{emit_csv, run_sweep, snr_grid, ScenarioConfig};
use dmi_core::hos::FeatureSet;
use serde::Deserialize;
use std::path::PathBuf;

#[derive(Parser, Debug, Default)]
#[command(name = "dmi-sim", version, about)]
struct Cli {
    /// Transmit antennas.
    #[arg(long)]
    nt: Option<usize>,
    /// Receive antennas.
    #[arg(long)]
    nr: Option<usize>,
    /// Feature set: denoised | raw | hoc.
    #[arg(long, value_parser = parse_feature_set)]
    feature_set: Option<FeatureSet>,
    /// First SNR point, dB.
    #[arg(long, allow_hyphen_values = true)]
    snr_start: Option<f64>,
    /// Last SNR point, dB.
    #[arg(long, allow_hyphen_values = true)]
    snr_stop: Option<f64>,
    /// SNR step, dB.
    #[arg(long)]
    snr_step: Option<f64>,
    /// Symbols per antenna per trial.
    #[arg(long)]
    frames: Option<usize>,
    /// Trials per SNR point.
    #[arg(long)]
    trials: Option<usize>,
    /// Master seed for the whole sweep.
    #[arg(long)]
    seed: Option<u64>,
    /// Std of the noise-power estimation error, as a fraction of the true
    /// noise power at each SNR point.
    #[arg(long)]
    noise_error_std: Option<f64>,
    /// Enable oscillator phase noise.
    #[arg(long)]
    phase_noise: bool,
    /// Phase-noise normalized bandwidth, cycles/sample.
    #[arg(long)]
    pn_bandwidth: Option<f64>,
    /// Phase-noise level, dBc/Hz.
    #[arg(long, allow_hyphen_values = true)]
    pn_level: Option<f64>,
    /// Carrier frequency offset, cycles/sample (providing it enables the
    /// impairment).
    #[arg(long)]
    cfo: Option<f64>,
    /// Use the true noise power and stream count instead of the blind
    /// estimates.
    #[arg(long)]
    noise_oracle: bool,
    /// Output CSV path (default sweep.csv); the confusion table lands next
    /// to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML config file with the same keys as the long flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_feature_set(s: &str) -> Result<FeatureSet, String> {
    match s {
        "denoised" => Ok(FeatureSet::HosDenoised),
        "raw" => Ok(FeatureSet::HosRaw),
        "hoc" => Ok(FeatureSet::HocOnly),
        other => Err(format!(
            "unknown feature set '{other}' (expected denoised, raw or hoc)"
        )),
    }
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    nt: Option<usize>,
    nr: Option<usize>,
    feature_set: Option<String>,
    snr_start: Option<f64>,
    snr_stop: Option<f64>,
    snr_step: Option<f64>,
    frames: Option<usize>,
    trials: Option<usize>,
    seed: Option<u64>,
    noise_error_std: Option<f64>,
    phase_noise: Option<bool>,
    pn_bandwidth: Option<f64>,
    pn_level: Option<f64>,
    cfo: Option<f64>,
    noise_oracle: Option<bool>,
    out: Option<PathBuf>,
}

/// Flags beat the file, the file beats the defaults.
fn resolve(cli: &Cli, file: &FileConfig) -> anyhow::Result<(ScenarioConfig, PathBuf)> {
    let file_feature_set = file
        .feature_set
        .as_deref()
        .map(|s| parse_feature_set(s).map_err(anyhow::Error::msg))
        .transpose()?;

    let mut cfg = ScenarioConfig::new(
        cli.nt.or(file.nt).unwrap_or(2),
        cli.nr.or(file.nr).unwrap_or(6),
    );
    cfg.feature_set = cli
        .feature_set
        .or(file_feature_set)
        .unwrap_or(FeatureSet::HosDenoised);
    let start = cli.snr_start.or(file.snr_start).unwrap_or(-5.0);
    let stop = cli.snr_stop.or(file.snr_stop).unwrap_or(10.0);
    let step = cli.snr_step.or(file.snr_step).unwrap_or(2.5);
    anyhow::ensure!(step > 0.0, "snr-step must be positive");
    anyhow::ensure!(stop >= start, "snr-stop must be >= snr-start");
    cfg.snr_grid_db = snr_grid(start, stop, step);
    cfg.frame_length = cli.frames.or(file.frames).unwrap_or(2048);
    cfg.trials_per_point = cli.trials.or(file.trials).unwrap_or(500);
    cfg.master_seed = cli.seed.or(file.seed).unwrap_or(1);
    cfg.noise_error_std = cli.noise_error_std.or(file.noise_error_std).unwrap_or(0.0);
    cfg.noise_oracle = cli.noise_oracle || file.noise_oracle.unwrap_or(false);

    cfg.impairments.phase_noise_enabled = cli.phase_noise || file.phase_noise.unwrap_or(false);
    if let Some(bw) = cli.pn_bandwidth.or(file.pn_bandwidth) {
        cfg.impairments.pn_bandwidth = bw;
    }
    if let Some(level) = cli.pn_level.or(file.pn_level) {
        cfg.impairments.pn_level_dbc_hz = level;
    }
    if let Some(cfo) = cli.cfo.or(file.cfo) {
        cfg.impairments.cfo_enabled = true;
        cfg.impairments.cfo_normalized = cfo;
    }

    let out = cli
        .out
        .clone()
        .or_else(|| file.out.clone())
        .unwrap_or_else(|| PathBuf::from("sweep.csv"));
    Ok((cfg, out))
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?
        }
        None => FileConfig::default(),
    };
    let (cfg, out) = resolve(&cli, &file)?;

    eprintln!(
        "scenario {} feature-set {} frames {} trials/point {} seed {}",
        cfg.scenario_id(),
        cfg.feature_set.label(),
        cfg.frame_length,
        cfg.trials_per_point,
        cfg.master_seed
    );
    let result = run_sweep(&cfg).context("running sweep")?;
    for row in &result.rows {
        println!("snr {:>7.2} dB  pci {:.4}", row.snr_db, row.pci());
    }
    println!("mean pci {:.4}", result.mean_pci());
    emit_csv(&result, &out).context("writing csv")?;
    println!("wrote {}", out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_set_names_parse() {
        assert_eq!(parse_feature_set("denoised"), Ok(FeatureSet::HosDenoised));
        assert_eq!(parse_feature_set("raw"), Ok(FeatureSet::HosRaw));
        assert_eq!(parse_feature_set("hoc"), Ok(FeatureSet::HocOnly));
        assert!(parse_feature_set("fancy").is_err());
    }

    #[test]
    fn defaults_without_flags_or_file() {
        let (cfg, out) = resolve(&Cli::default(), &FileConfig::default()).unwrap();
        assert_eq!((cfg.n_t, cfg.n_r), (2, 6));
        assert_eq!(cfg.feature_set, FeatureSet::HosDenoised);
        assert_eq!(cfg.snr_grid_db.len(), 7);
        assert_eq!(cfg.frame_length, 2048);
        assert_eq!(cfg.trials_per_point, 500);
        assert!(!cfg.noise_oracle);
        assert!(!cfg.impairments.cfo_enabled);
        assert_eq!(out, PathBuf::from("sweep.csv"));
    }

    #[test]
    fn file_values_apply_and_flags_override() {
        let file: FileConfig = toml::from_str(
            r#"
            nt = 3
            nr = 6
            feature_set = "hoc"
            snr_start = 0.0
            snr_stop = 5.0
            snr_step = 2.5
            trials = 50
            seed = 9
            phase_noise = true
            cfo = 1e-4
            out = "from_file.csv"
            "#,
        )
        .unwrap();

        let (cfg, out) = resolve(&Cli::default(), &file).unwrap();
        assert_eq!((cfg.n_t, cfg.n_r), (3, 6));
        assert_eq!(cfg.feature_set, FeatureSet::HocOnly);
        assert_eq!(cfg.snr_grid_db, vec![0.0, 2.5, 5.0]);
        assert_eq!(cfg.trials_per_point, 50);
        assert_eq!(cfg.master_seed, 9);
        assert!(cfg.impairments.phase_noise_enabled);
        assert!(cfg.impairments.cfo_enabled);
        assert_eq!(cfg.impairments.cfo_normalized, 1e-4);
        assert_eq!(out, PathBuf::from("from_file.csv"));

        let cli = Cli {
            nt: Some(2),
            feature_set: Some(FeatureSet::HosRaw),
            trials: Some(10),
            out: Some(PathBuf::from("cli.csv")),
            ..Default::default()
        };
        let (cfg, out) = resolve(&cli, &file).unwrap();
        assert_eq!(cfg.n_t, 2);
        assert_eq!(cfg.feature_set, FeatureSet::HosRaw);
        assert_eq!(cfg.trials_per_point, 10);
        assert_eq!(out, PathBuf::from("cli.csv"));
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let r: Result<FileConfig, _> = toml::from_str("frames = 128\nbogus = 1\n");
        assert!(r.is_err());
    }

    #[test]
    fn bad_grid_is_rejected() {
        let cli = Cli {
            snr_start: Some(5.0),
            snr_stop: Some(-5.0),
            ..Default::default()
        };
        assert!(resolve(&cli, &FileConfig::default()).is_err());
    }
}
