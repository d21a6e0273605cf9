//! Monte-Carlo experiments: BER and complexity sweeps, single-instance
//! traces and a built-in self-test.
//!
//! Trials are independent and run in parallel. Trial `t` always draws its
//! instance from substream `t` of the master seed, and every detector of the
//! trial sees that same instance. Per-trial results are merged in trial
//! order, so the output does not depend on the number of worker threads.

mod config;
mod csv;
mod selftest;
mod trace;

use std::time::Instant;

use rayon::prelude::*;

pub use config::ExperimentConfig;
pub use csv::{write_complexity_csv, write_result_csv, COMPLEXITY_HEADER, RESULT_HEADER};
pub use selftest::{selftest, CheckReport, SelftestOptions, SelftestReport};
pub use trace::{run_trace, DetectorTrace, TraceReport};

use crate::complexity::{measured_reduction, OpLedger};
use crate::detector::DetectorKind;
use crate::error::Result;
use crate::model::{bit_errors, draw_instance, to_real, trial_rng, RealSystem};

/// Aggregate of one detector at one SNR point.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub detector: DetectorKind,
    pub nt: usize,
    pub nr: usize,
    pub modulation: &'static str,
    pub snr_db: f64,
    pub trials: usize,
    pub bit_errors: u64,
    pub ber: f64,
    pub iterations: usize,
    pub tabu: usize,
    pub mults: u64,
    pub adds: u64,
    pub ops_total: u64,
    pub mean_k: Option<f64>,
    pub mean_l: Option<f64>,
    pub mean_dstar: Option<f64>,
    pub wall_seconds: f64,
    pub ledger: OpLedger,
}

/// A [`ResultRow`] with its operation reduction against the first detector.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityRow {
    pub row: ResultRow,
    pub reduction_pct: Option<f64>,
}

/// What one detector produced on one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub bit_errors: u64,
    pub metric: f64,
    pub ledger: OpLedger,
    pub seconds: f64,
}

/// Draws the instance of trial `trial`.
pub fn trial_instance(cfg: &ExperimentConfig, snr_db: f64, trial: u64) -> Result<RealSystem> {
    let mut rng = trial_rng(cfg.seed, trial);
    to_real(&draw_instance(
        cfg.nt,
        cfg.nr,
        cfg.constellation,
        snr_db,
        &mut rng,
    )?)
}

/// Runs every effective detector on every trial at one SNR.
///
/// The outer vector is indexed by trial, the inner one follows
/// [`ExperimentConfig::effective_detectors`].
pub fn run_trials(cfg: &ExperimentConfig, snr_db: f64) -> Result<Vec<Vec<TrialResult>>> {
    cfg.validate()?;
    let detectors = cfg.effective_detectors();
    let params = cfg.params();
    (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let sys = trial_instance(cfg, snr_db, t)?;
            detectors
                .iter()
                .map(|d| {
                    let start = Instant::now();
                    let out = d.run(&sys, params)?;
                    let seconds = start.elapsed().as_secs_f64();
                    Ok(TrialResult {
                        bit_errors: bit_errors(&out.solution, &sys.s, sys.constellation)?,
                        metric: out.metric,
                        ledger: out.ledger,
                        seconds,
                    })
                })
                .collect()
        })
        .collect()
}

fn aggregate(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let detectors = cfg.effective_detectors();
    let bits_per_trial = 2 * cfg.nt * cfg.constellation.bits_per_dimension();
    let mut rows = Vec::with_capacity(detectors.len() * cfg.snr_db.len());
    let mut per_snr = Vec::with_capacity(cfg.snr_db.len());
    for &snr in &cfg.snr_db {
        per_snr.push(run_trials(cfg, snr)?);
    }
    for (di, &detector) in detectors.iter().enumerate() {
        for (&snr, trials) in cfg.snr_db.iter().zip(&per_snr) {
            let mut ledger = OpLedger::new();
            let mut errors = 0;
            let mut seconds = 0.0;
            for trial in trials {
                let r = &trial[di];
                ledger.merge(&r.ledger);
                errors += r.bit_errors;
                seconds += r.seconds;
            }
            rows.push(ResultRow {
                detector,
                nt: cfg.nt,
                nr: cfg.nr,
                modulation: cfg.constellation.name(),
                snr_db: snr,
                trials: cfg.trials,
                bit_errors: errors,
                ber: errors as f64 / (cfg.trials * bits_per_trial) as f64,
                iterations: cfg.iterations,
                tabu: cfg.tabu_capacity(),
                mults: ledger.mults(),
                adds: ledger.adds(),
                ops_total: ledger.total(),
                mean_k: ledger.mean_groups(),
                mean_l: ledger.mean_neighbors(),
                mean_dstar: ledger.mean_dstar(),
                wall_seconds: seconds,
                ledger,
            });
        }
    }
    Ok(rows)
}

/// BER sweep; writes a CSV to `cfg.out` when set.
pub fn run_ber(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let rows = aggregate(cfg)?;
    if let Some(path) = &cfg.out {
        write_result_csv(path, &rows)?;
    }
    Ok(rows)
}

/// Complexity sweep with reductions against the first listed detector.
pub fn run_complexity(cfg: &ExperimentConfig) -> Result<Vec<ComplexityRow>> {
    let rows = aggregate(cfg)?;
    let baseline = cfg.effective_detectors()[0];
    let out: Vec<ComplexityRow> = rows
        .iter()
        .map(|row| {
            let base = rows
                .iter()
                .find(|r| r.detector == baseline && r.snr_db == row.snr_db);
            let reduction_pct = base.and_then(|b| measured_reduction(&b.ledger, &row.ledger).ok());
            ComplexityRow {
                row: row.clone(),
                reduction_pct,
            }
        })
        .collect();
    if let Some(path) = &cfg.out {
        write_complexity_csv(path, &out)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Constellation;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            nt: 2,
            nr: 2,
            constellation: Constellation::Qam16,
            detectors: vec![
                DetectorKind::Conventional,
                DetectorKind::QrTs,
                DetectorKind::Ngts,
                DetectorKind::Ml,
            ],
            snr_db: vec![0.0, 10.0],
            trials: 60,
            iterations: 20,
            ..Default::default()
        }
    }

    #[test]
    fn tabu_variants_have_identical_errors() {
        let rows = run_ber(&small()).unwrap();
        assert_eq!(rows.len(), 8);
        for snr in [0.0, 10.0] {
            let errs: Vec<u64> = rows
                .iter()
                .filter(|r| r.snr_db == snr && r.detector.is_tabu())
                .map(|r| r.bit_errors)
                .collect();
            assert!(errs.windows(2).all(|w| w[0] == w[1]), "{errs:?}");
        }
        // 60 trials of 8 bits
        let r = &rows[0];
        assert_eq!(r.ber, r.bit_errors as f64 / 480.0);
        assert_eq!(r.ops_total, r.mults + r.adds);
    }

    #[test]
    fn ml_never_loses_on_metric() {
        let cfg = small();
        let trials = run_trials(&cfg, 0.0).unwrap();
        for t in &trials {
            for r in &t[..3] {
                assert!(t[3].metric <= r.metric + 1e-9);
            }
        }
    }

    #[test]
    fn noiseless_sweep_has_no_errors() {
        let cfg = ExperimentConfig {
            snr_db: vec![f64::INFINITY],
            ..small()
        };
        assert!(run_ber(&cfg)
            .unwrap()
            .iter()
            .all(|r| r.bit_errors == 0 && r.ber == 0.0));
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let cfg = small();
        let strip = |rows: Vec<ResultRow>| -> Vec<ResultRow> {
            rows.into_iter()
                .map(|r| ResultRow {
                    wall_seconds: 0.0,
                    ..r
                })
                .collect()
        };
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let a = strip(single.install(|| run_ber(&cfg).unwrap()));
        let b = strip(run_ber(&cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn reductions_are_relative_to_the_first_detector() {
        let cfg = ExperimentConfig {
            nt: 4,
            nr: 4,
            constellation: Constellation::Qam64,
            detectors: vec![DetectorKind::Conventional, DetectorKind::Ngts],
            snr_db: vec![16.0],
            trials: 5,
            iterations: 200,
            ..Default::default()
        };
        let rows = run_complexity(&cfg).unwrap();
        assert_eq!(rows[0].reduction_pct, Some(0.0));
        let ngts = rows[1].reduction_pct.unwrap();
        assert!(ngts > 30.0 && ngts < 100.0, "{ngts}");
        assert!(rows[1].row.mean_k.is_some() && rows[0].row.mean_k.is_none());
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = ExperimentConfig {
            trials: 0,
            ..small()
        };
        assert!(run_ber(&cfg).is_err());
    }
}
