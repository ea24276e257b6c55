//! Monte Carlo experiment driver: seeded identification trials, SNR sweeps,
//! and CSV reporting.
//!
//! Every trial is a pure function of (master seed, SNR value, trial index):
//! the per-trial rng stream drives the scheme draw, the symbol streams, the
//! channel, the noise, the impairments and any separator restarts, so sweeps
//! are reproducible and trials can run concurrently without changing a single
//! count. A trial evaluates all three feature sets on the same received frame
//! and separation; a sweep for one feature set simply selects its column.

use crate::bss::{
    estimate_noise_and_streams, filtered_noise_power, scma_separate_with, ScmaConfig,
};
use crate::channel::{
    apply_cfo, apply_phase_noise, draw_channel, noise_variance_for_snr, transmit, FrameRole,
    ImpairmentConfig, MimoFrame,
};
use crate::classifier::{classify_branch, fuse_decisions, BranchDecision};
use crate::error::{DmiError, Result};
use crate::hos::{
    cumulants_from_moments, denoise_moments, normalize_features, theoretical_feature_table,
    FeatureSet, FeatureVector, MomentSet,
};
use crate::modem::{generate_symbols, ModulationScheme};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::path::Path;

/// One experiment: antenna configuration, feature set, SNR grid and trial
/// budget, plus the impairment and noise-knowledge knobs.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub n_t: usize,
    pub n_r: usize,
    /// Candidate schemes; the true scheme is drawn uniformly from this pool.
    pub schemes: Vec<ModulationScheme>,
    pub feature_set: FeatureSet,
    pub snr_grid_db: Vec<f64>,
    /// Symbols per antenna per trial.
    pub frame_length: usize,
    pub trials_per_point: usize,
    /// Std of the noise-power perturbation epsilon, as a fraction of the true
    /// channel noise power at each SNR point.
    pub noise_error_std: f64,
    pub impairments: ImpairmentConfig,
    /// Use the true channel noise power and stream count instead of the
    /// eigenvalue-based estimates.
    pub noise_oracle: bool,
    pub master_seed: u64,
    pub scma: ScmaConfig,
}

impl ScenarioConfig {
    pub fn new(n_t: usize, n_r: usize) -> ScenarioConfig {
        ScenarioConfig {
            n_t,
            n_r,
            schemes: ModulationScheme::ALL.to_vec(),
            feature_set: FeatureSet::HosDenoised,
            snr_grid_db: snr_grid(-5.0, 10.0, 2.5),
            frame_length: 2048,
            trials_per_point: 500,
            noise_error_std: 0.0,
            impairments: ImpairmentConfig::default(),
            noise_oracle: false,
            master_seed: 1,
            scma: ScmaConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_t == 0 || self.n_t >= self.n_r {
            return Err(DmiError::InvalidArgument(format!(
                "need 1 <= n_t < n_r, got {}x{}",
                self.n_t, self.n_r
            )));
        }
        if self.schemes.is_empty() {
            return Err(DmiError::InvalidArgument("empty scheme pool".into()));
        }
        if self.snr_grid_db.is_empty() {
            return Err(DmiError::InvalidArgument("empty SNR grid".into()));
        }
        if self.trials_per_point == 0 {
            return Err(DmiError::InvalidArgument(
                "trials_per_point must be >= 1".into(),
            ));
        }
        if self.frame_length < self.n_r {
            return Err(DmiError::InvalidArgument(format!(
                "frame_length {} shorter than n_r {}",
                self.frame_length, self.n_r
            )));
        }
        if self.noise_error_std < 0.0 {
            return Err(DmiError::InvalidArgument(
                "noise_error_std must be >= 0".into(),
            ));
        }
        self.impairments.validate()
    }

    /// Identifier for the CSV `scenario` column (the feature set has its own
    /// column and is not repeated here).
    pub fn scenario_id(&self) -> String {
        let mut id = format!("{}x{}", self.n_t, self.n_r);
        if self.noise_oracle {
            id.push_str("-oracle");
        }
        if self.noise_error_std > 0.0 {
            id.push_str(&format!("-eps{}", self.noise_error_std));
        }
        if self.impairments.phase_noise_enabled {
            id.push_str("-pn");
        }
        if self.impairments.cfo_enabled {
            id.push_str(&format!("-cfo{}", self.impairments.cfo_normalized));
        }
        id
    }
}

/// Inclusive grid start..=stop in steps of `step`.
pub fn snr_grid(start_db: f64, stop_db: f64, step_db: f64) -> Vec<f64> {
    assert!(step_db > 0.0, "snr step must be positive");
    let count = ((stop_db - start_db) / step_db + 1e-9).floor() as usize + 1;
    (0..count).map(|k| start_db + k as f64 * step_db).collect()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-trial seed: a pure function of the master seed, the SNR value and the
/// trial index, so no two trials of a sweep share an rng stream.
pub fn trial_seed(master_seed: u64, snr_db: f64, trial_index: u64) -> u64 {
    let mut h = splitmix64(master_seed);
    h = splitmix64(h ^ snr_db.to_bits());
    h = splitmix64(h ^ trial_index);
    h
}

#[derive(Debug, Clone, Copy)]
struct TrialOutcome {
    true_scheme: ModulationScheme,
    /// Fused decision per feature set (FeatureSet::ALL order); None marks a
    /// convergence failure or an all-degenerate trial.
    decided: [Option<ModulationScheme>; 3],
}

/// Runs one trial under `cfg.feature_set` and returns (true, decided).
/// A `None` decision records separator non-convergence or a trial whose
/// branches were all degenerate; the sweep counts it as incorrect.
pub fn run_trial(
    cfg: &ScenarioConfig,
    snr_db: f64,
    trial_index: u64,
) -> (ModulationScheme, Option<ModulationScheme>) {
    let outcome = run_trial_all_sets(cfg, snr_db, trial_index);
    (
        outcome.true_scheme,
        outcome.decided[cfg.feature_set.index()],
    )
}

fn run_trial_all_sets(cfg: &ScenarioConfig, snr_db: f64, trial_index: u64) -> TrialOutcome {
    let mut rng = ChaCha12Rng::seed_from_u64(trial_seed(cfg.master_seed, snr_db, trial_index));
    let true_scheme = cfg.schemes[rng.random_range(0..cfg.schemes.len())];
    let decided = trial_pipeline(cfg, snr_db, true_scheme, &mut rng).unwrap_or([None, None, None]);
    TrialOutcome {
        true_scheme,
        decided,
    }
}

fn trial_pipeline(
    cfg: &ScenarioConfig,
    snr_db: f64,
    scheme: ModulationScheme,
    rng: &mut impl Rng,
) -> Result<[Option<ModulationScheme>; 3]> {
    // Every transmit antenna carries the same scheme within a trial.
    let rows = (0..cfg.n_t)
        .map(|_| Ok(generate_symbols(scheme, cfg.frame_length, rng)?.samples))
        .collect::<Result<Vec<_>>>()?;
    let x = MimoFrame::new(FrameRole::Transmitted, rows)?;
    let h = draw_channel(cfg.n_t, cfg.n_r, rng)?;
    let sigma_w2 = noise_variance_for_snr(snr_db, cfg.n_t);
    let mut y = transmit(&x, &h, sigma_w2, rng)?;
    if cfg.impairments.phase_noise_enabled {
        y = apply_phase_noise(&y, &cfg.impairments, rng);
    }
    if cfg.impairments.cfo_enabled {
        y = apply_cfo(&y, cfg.impairments.cfo_normalized);
    }

    let (mut sigma_hat, n_t_hat) = if cfg.noise_oracle {
        (sigma_w2, cfg.n_t)
    } else {
        let est = estimate_noise_and_streams(&y)?;
        (est.sigma_w2_hat, est.n_t_hat)
    };
    if cfg.noise_error_std > 0.0 {
        let eps = cfg.noise_error_std * sigma_w2 * rng.sample::<f64, _>(StandardNormal);
        sigma_hat = (sigma_hat + eps).max(0.0);
    }

    let (recovered, sep) = scma_separate_with(&y, n_t_hat, sigma_hat, &cfg.scma, rng)?;
    let branch_noise = filtered_noise_power(&sep.g, sigma_hat);
    decide_all_sets(&recovered, &branch_noise)
}

/// Classifies each recovered branch under all three feature sets and fuses
/// per set. Branches whose denoised signal power is non-positive are excluded
/// from the denoised fusion (and analogously for the raw sets).
fn decide_all_sets(
    recovered: &MimoFrame,
    branch_noise: &[f64],
) -> Result<[Option<ModulationScheme>; 3]> {
    let tables: [Vec<(ModulationScheme, FeatureVector)>; 3] = [
        theoretical_feature_table(FeatureSet::HosDenoised),
        theoretical_feature_table(FeatureSet::HosRaw),
        theoretical_feature_table(FeatureSet::HocOnly),
    ];
    let mut decisions: [Vec<BranchDecision>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (j, &noise) in branch_noise.iter().enumerate().take(recovered.n_antennas()) {
        let m = MomentSet::estimate(recovered.row(j))?;
        let k = cumulants_from_moments(&m);
        let denoised = denoise_moments(&m, noise);

        let candidates = [
            (FeatureSet::HosDenoised, &denoised, denoised.mu21.re),
            (FeatureSet::HosRaw, &m, m.mu21.re),
            (FeatureSet::HocOnly, &m, m.mu21.re),
        ];
        for (set, moments, mu21) in candidates {
            match normalize_features(moments, &k, mu21, set) {
                Ok(fv) => {
                    let d = classify_branch(j, &fv, &tables[set.index()])?;
                    decisions[set.index()].push(d);
                }
                Err(DmiError::DegenerateBranch { .. }) => {} // branch discarded
                Err(e) => return Err(e),
            }
        }
    }
    let mut decided = [None, None, None];
    for set in FeatureSet::ALL {
        decided[set.index()] = fuse_decisions(&decisions[set.index()]).ok();
    }
    Ok(decided)
}

/// Identification accuracy at one SNR point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub trials: u64,
    pub correct: u64,
}

impl SweepRow {
    pub fn pci(&self) -> f64 {
        self.correct as f64 / self.trials as f64
    }
}

/// Outcome of one sweep: accuracy per SNR point plus confusion counts
/// aggregated over the grid. `confusion[t][d]` counts trials with true scheme
/// index t decided as scheme index d; column 6 counts undecided trials.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub scenario: String,
    pub feature_set: FeatureSet,
    pub n_t: usize,
    pub n_r: usize,
    pub rows: Vec<SweepRow>,
    pub confusion: [[u64; 7]; 6],
}

impl SweepResult {
    /// Mean probability of correct identification over the SNR grid.
    pub fn mean_pci(&self) -> f64 {
        self.rows.iter().map(|r| r.pci()).sum::<f64>() / self.rows.len() as f64
    }

    /// Mean Pci restricted to grid points with snr <= limit.
    pub fn mean_pci_up_to(&self, snr_limit_db: f64) -> f64 {
        let rows: Vec<&SweepRow> = self
            .rows
            .iter()
            .filter(|r| r.snr_db <= snr_limit_db + 1e-9)
            .collect();
        rows.iter().map(|r| r.pci()).sum::<f64>() / rows.len() as f64
    }

    pub const CSV_HEADER: &'static str = "scenario,feature_set,nt,nr,snr_db,trials,correct,pci";

    /// The main CSV: header plus one row per SNR point, pci with six decimal
    /// digits.
    pub fn csv_body(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(Self::CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{:.6}\n",
                self.scenario,
                self.feature_set.label(),
                self.n_t,
                self.n_r,
                row.snr_db,
                row.trials,
                row.correct,
                row.pci()
            ));
        }
        out
    }

    /// Confusion counts: rows are the true scheme, columns the decided scheme
    /// plus a final column for trials with no decision.
    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("true");
        for s in ModulationScheme::ALL {
            out.push(',');
            out.push_str(s.label());
        }
        out.push_str(",failed\n");
        for t in ModulationScheme::ALL {
            out.push_str(t.label());
            for d in 0..7 {
                out.push_str(&format!(",{}", self.confusion[t.index()][d]));
            }
            out.push('\n');
        }
        out
    }
}

fn sweep_outcomes(cfg: &ScenarioConfig, parallel: bool) -> Vec<Vec<TrialOutcome>> {
    cfg.snr_grid_db
        .iter()
        .map(|&snr| {
            if parallel {
                (0..cfg.trials_per_point as u64)
                    .into_par_iter()
                    .map(|t| run_trial_all_sets(cfg, snr, t))
                    .collect()
            } else {
                (0..cfg.trials_per_point as u64)
                    .map(|t| run_trial_all_sets(cfg, snr, t))
                    .collect()
            }
        })
        .collect()
}

fn aggregate(cfg: &ScenarioConfig, set: FeatureSet, outcomes: &[Vec<TrialOutcome>]) -> SweepResult {
    let mut rows = Vec::with_capacity(outcomes.len());
    let mut confusion = [[0u64; 7]; 6];
    for (snr, trials) in cfg.snr_grid_db.iter().zip(outcomes) {
        let mut correct = 0u64;
        for o in trials {
            let decided = o.decided[set.index()];
            if decided == Some(o.true_scheme) {
                correct += 1;
            }
            let col = decided.map_or(6, |s| s.index());
            confusion[o.true_scheme.index()][col] += 1;
        }
        rows.push(SweepRow {
            snr_db: *snr,
            trials: trials.len() as u64,
            correct,
        });
    }
    SweepResult {
        scenario: cfg.scenario_id(),
        feature_set: set,
        n_t: cfg.n_t,
        n_r: cfg.n_r,
        rows,
        confusion,
    }
}

/// Runs the sweep for `cfg.feature_set`, trials in parallel.
pub fn run_sweep(cfg: &ScenarioConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let outcomes = sweep_outcomes(cfg, true);
    Ok(aggregate(cfg, cfg.feature_set, &outcomes))
}

/// Sequential twin of [`run_sweep`]; produces identical results.
pub fn run_sweep_serial(cfg: &ScenarioConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let outcomes = sweep_outcomes(cfg, false);
    Ok(aggregate(cfg, cfg.feature_set, &outcomes))
}

/// Runs the shared trial pipeline once and reports all three feature sets,
/// in [`FeatureSet::ALL`] order. Equivalent to three [`run_sweep`] calls that
/// differ only in `feature_set`, at a third of the cost.
pub fn run_sweep_all(cfg: &ScenarioConfig) -> Result<[SweepResult; 3]> {
    cfg.validate()?;
    let outcomes = sweep_outcomes(cfg, true);
    Ok(FeatureSet::ALL.map(|set| aggregate(cfg, set, &outcomes)))
}

/// Writes the sweep CSV to `path` and the confusion table to the sibling
/// `<stem>.confusion.csv`.
pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let write = |p: &Path, body: &str| {
        std::fs::write(p, body).map_err(|source| DmiError::Io {
            path: p.to_path_buf(),
            source,
        })
    };
    write(path, &result.csv_body())?;
    write(
        &path.with_extension("confusion.csv"),
        &result.confusion_csv(),
    )
}

/// One parsed row of the sweep CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub scenario: String,
    pub feature_set: String,
    pub n_t: usize,
    pub n_r: usize,
    pub snr_db: f64,
    pub trials: u64,
    pub correct: u64,
    pub pci: f64,
}

/// Parses a CSV body produced by [`SweepResult::csv_body`].
pub fn parse_csv_body(body: &str) -> Result<Vec<CsvRow>> {
    let mut lines = body.lines();
    match lines.next() {
        Some(h) if h == SweepResult::CSV_HEADER => {}
        other => {
            return Err(DmiError::MalformedCsv(format!(
                "bad header: {:?}",
                other.unwrap_or("")
            )))
        }
    }
    let mut rows = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(DmiError::MalformedCsv(format!(
                "expected 8 fields, got {}: {line}",
                f.len()
            )));
        }
        let parse_err = |what: &str| DmiError::MalformedCsv(format!("bad {what}: {line}"));
        rows.push(CsvRow {
            scenario: f[0].to_string(),
            feature_set: f[1].to_string(),
            n_t: f[2].parse().map_err(|_| parse_err("nt"))?,
            n_r: f[3].parse().map_err(|_| parse_err("nr"))?,
            snr_db: f[4].parse().map_err(|_| parse_err("snr_db"))?,
            trials: f[5].parse().map_err(|_| parse_err("trials"))?,
            correct: f[6].parse().map_err(|_| parse_err("correct"))?,
            pci: f[7].parse().map_err(|_| parse_err("pci"))?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;
    use std::collections::HashSet;

    #[test]
    fn snr_grid_spans_inclusive_range() {
        let g = snr_grid(-5.0, 10.0, 2.5);
        assert_eq!(g.len(), 7);
        assert_eq!(g[0], -5.0);
        assert_eq!(g[3], 2.5);
        assert_eq!(g[6], 10.0);
        assert_eq!(snr_grid(0.0, 0.0, 1.0), vec![0.0]);
    }

    #[test]
    fn trial_seeds_do_not_collide() {
        let mut seen = HashSet::new();
        for snr_idx in 0..7 {
            let snr = -5.0 + 2.5 * snr_idx as f64;
            for trial in 0..500u64 {
                assert!(seen.insert(trial_seed(42, snr, trial)));
            }
        }
        assert_eq!(trial_seed(7, 2.5, 3), trial_seed(7, 2.5, 3));
        assert_ne!(trial_seed(7, 2.5, 3), trial_seed(8, 2.5, 3));
    }

    #[test]
    fn config_validation_catches_bad_setups() {
        let mut cfg = ScenarioConfig::new(2, 6);
        assert!(cfg.validate().is_ok());
        cfg.n_t = 6;
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::new(2, 6);
        cfg.frame_length = 3;
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::new(2, 6);
        cfg.trials_per_point = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::new(2, 6);
        cfg.snr_grid_db.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn scenario_id_encodes_knobs() {
        let mut cfg = ScenarioConfig::new(2, 6);
        assert_eq!(cfg.scenario_id(), "2x6");
        cfg.noise_oracle = true;
        cfg.noise_error_std = 0.3;
        cfg.impairments.phase_noise_enabled = true;
        cfg.impairments.cfo_enabled = true;
        cfg.impairments.cfo_normalized = 1e-4;
        assert_eq!(cfg.scenario_id(), "2x6-oracle-eps0.3-pn-cfo0.0001");
    }

    #[test]
    fn csv_formatting_matches_contract() {
        let result = SweepResult {
            scenario: "2x6".into(),
            feature_set: FeatureSet::HosDenoised,
            n_t: 2,
            n_r: 6,
            rows: vec![SweepRow {
                snr_db: -2.5,
                trials: 500,
                correct: 320,
            }],
            confusion: [[0; 7]; 6],
        };
        let body = result.csv_body();
        let mut lines = body.lines();
        assert_eq!(lines.next().unwrap(), SweepResult::CSV_HEADER);
        assert_eq!(
            lines.next().unwrap(),
            "2x6,denoised,2,6,-2.5,500,320,0.640000"
        );
        assert_eq!(lines.next(), None);

        let empty = SweepResult {
            rows: vec![],
            ..result
        };
        assert_eq!(empty.csv_body(), format!("{}\n", SweepResult::CSV_HEADER));
    }

    #[test]
    fn csv_round_trip_recovers_rows() {
        let result = SweepResult {
            scenario: "3x6-oracle".into(),
            feature_set: FeatureSet::HocOnly,
            n_t: 3,
            n_r: 6,
            rows: vec![
                SweepRow {
                    snr_db: -5.0,
                    trials: 40,
                    correct: 13,
                },
                SweepRow {
                    snr_db: -2.5,
                    trials: 40,
                    correct: 29,
                },
            ],
            confusion: [[0; 7]; 6],
        };
        let parsed = parse_csv_body(&result.csv_body()).unwrap();
        assert_eq!(parsed.len(), 2);
        for (row, want) in parsed.iter().zip(&result.rows) {
            assert_eq!(row.scenario, "3x6-oracle");
            assert_eq!(row.feature_set, "hoc");
            assert_eq!((row.n_t, row.n_r), (3, 6));
            assert_eq!(row.snr_db, want.snr_db);
            assert_eq!(row.trials, want.trials);
            assert_eq!(row.correct, want.correct);
            assert!((row.pci - want.pci()).abs() < 5e-7);
        }
        assert!(parse_csv_body("nonsense\n1,2").is_err());
    }

    #[test]
    fn confusion_csv_shape() {
        let mut confusion = [[0u64; 7]; 6];
        confusion[0][0] = 9;
        confusion[0][6] = 1;
        let result = SweepResult {
            scenario: "2x6".into(),
            feature_set: FeatureSet::HosRaw,
            n_t: 2,
            n_r: 6,
            rows: vec![],
            confusion,
        };
        let csv = result.confusion_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[0], "true,BPSK,QPSK,8PSK,4ASK,8ASK,16QAM,failed");
        assert_eq!(lines[1], "BPSK,9,0,0,0,0,0,1");
    }

    /// A branch whose filtered noise power exceeds its total power is
    /// excluded from the denoised fusion; the remaining branch still decides.
    #[test]
    fn degenerate_branch_is_excluded_not_fatal() {
        use rand::SeedableRng;
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let good = generate_symbols(ModulationScheme::Qpsk, 4096, &mut rng)
            .unwrap()
            .samples;
        let bad: Vec<C64> = generate_symbols(ModulationScheme::Qpsk, 4096, &mut rng)
            .unwrap()
            .samples;
        let recovered = MimoFrame::new(FrameRole::Recovered, vec![good, bad]).unwrap();

        // Branch 1's claimed noise power exceeds its unit signal power.
        let decided = decide_all_sets(&recovered, &[0.05, 3.0]).unwrap();
        assert_eq!(
            decided[FeatureSet::HosDenoised.index()],
            Some(ModulationScheme::Qpsk)
        );

        // Both branches degenerate: the denoised chain reports no decision,
        // while the raw chains still decide.
        let decided = decide_all_sets(&recovered, &[3.0, 3.0]).unwrap();
        assert_eq!(decided[FeatureSet::HosDenoised.index()], None);
        assert_eq!(
            decided[FeatureSet::HosRaw.index()],
            Some(ModulationScheme::Qpsk)
        );
        assert_eq!(
            decided[FeatureSet::HocOnly.index()],
            Some(ModulationScheme::Qpsk)
        );
    }
}
