use std::fmt;

use num_complex::Complex64;

use crate::complexity::{expected_epsilon, OpCount, OpLedger};
use crate::error::Result;
use crate::linalg::qr_householder;
use crate::model::{draw_instance, quantize, to_real, trial_rng, Constellation, RealSystem};
use crate::ngts::{ngts_detect, ngts_init};
use crate::oracle::{brute_force_ml, se_sphere_decode};
use crate::tabu::{conventional_ts, qr_ts, TabuParams};

const SEED: u64 = 0x5e1f_7e57;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SelftestOptions {
    /// Corrupts the NG-TS γ cache midway through the integrity suite.
    pub inject_gamma_fault: bool,
}

/// Outcome of one property check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub checked: usize,
    pub minimum: usize,
    pub failures: usize,
    pub first_failure: Option<String>,
}

impl CheckReport {
    fn new(name: &'static str, minimum: usize) -> Self {
        Self {
            name,
            checked: 0,
            minimum,
            failures: 0,
            first_failure: None,
        }
    }

    fn record(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(detail());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.checked >= self.minimum
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestReport {
    pub checks: Vec<CheckReport>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckReport::passed)
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &CheckReport> {
        self.checks.iter().filter(|c| !c.passed())
    }
}

impl fmt::Display for SelftestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let status = if c.passed() { "pass" } else { "FAIL" };
            write!(
                f,
                "{status} {:<24} checked {:>5} (min {:>5})",
                c.name, c.checked, c.minimum
            )?;
            if c.failures > 0 {
                write!(f, ", {} failures", c.failures)?;
            }
            if let Some(d) = &c.first_failure {
                write!(f, ": {d}")?;
            }
            writeln!(f)?;
        }
        write!(
            f,
            "{}",
            if self.passed() {
                "selftest passed"
            } else {
                "selftest FAILED"
            }
        )
    }
}

fn instance(nt: usize, c: Constellation, snr: f64, trial: u64) -> Result<RealSystem> {
    to_real(&draw_instance(nt, nt, c, snr, &mut trial_rng(SEED, trial))?)
}

fn cases() -> impl Iterator<Item = (usize, Constellation)> {
    [2usize, 4]
        .into_iter()
        .flat_map(|nt| [Constellation::Qpsk, Constellation::Qam16].map(move |c| (nt, c)))
}

/// Runs the invariant suites at small sizes.
pub fn selftest(options: SelftestOptions) -> Result<SelftestReport> {
    let mut checks = Vec::new();

    let mut model = CheckReport::new("real-model-metric", 200);
    let mut quant = CheckReport::new("quantize-idempotent", 200);
    for (nt, c) in cases() {
        for t in 0..50 {
            let cs = draw_instance(nt, nt, c, 5.0, &mut trial_rng(SEED, t))?;
            let rs = to_real(&cs)?;
            let x: Vec<Complex64> = (0..nt)
                .map(|k| Complex64::new(rs.s[k].into(), rs.s[k + nt].into()))
                .collect();
            let (a, b) = (cs.metric(&x), rs.metric(&rs.s));
            model.record((a - b).abs() <= 1e-10 * a.max(1e-300), || {
                format!("{a} vs {b}")
            });
            let v: Vec<f64> = rs.s.iter().map(|&s| f64::from(s)).collect();
            quant.record(quantize(&v, c) == rs.s, || format!("{:?}", rs.s));
        }
    }
    checks.push(model);
    checks.push(quant);

    let mut equiv = CheckReport::new("trajectory-equivalence", 200);
    let mut tabu = CheckReport::new("tabu-contract", 200);
    let params = TabuParams::new(30, 15);
    for (nt, c) in cases() {
        for t in 0..50 {
            let sys = instance(nt, c, 6.0, 1000 + t)?;
            let a = conventional_ts(&sys, params)?;
            let b = qr_ts(&sys, params, false)?;
            let n = ngts_detect(&sys, params, false)?;
            let same = a.trace.candidates() == b.trace.candidates()
                && a.trace.candidates() == n.trace.candidates()
                && a.solution == n.solution;
            equiv.record(same, || format!("{nt}x{nt} {c} trial {t}"));
            let cands = n.trace.candidates();
            let fresh = (1..cands.len()).all(|i| {
                let lo = i.saturating_sub(params.tabu_capacity);
                !cands[lo..i].contains(&cands[i])
            });
            tabu.record(fresh, || {
                format!("{nt}x{nt} {c} trial {t} revisits a tabu candidate")
            });
        }
    }
    checks.push(equiv);
    checks.push(tabu);

    let mut integrity = CheckReport::new("incremental-integrity", 500);
    for t in 0..20u64 {
        let sys = instance(4, Constellation::Qam16, 12.0, 2000 + t)?;
        let (mut state, _) = ngts_init(&sys, TabuParams::new(50, 25), false)?;
        let mut ledger = OpLedger::new();
        for it in 0..50 {
            if options.inject_gamma_fault && it == 10 {
                state.engine_mut().inject_gamma_fault();
            }
            if !state.step(&mut ledger) {
                break;
            }
            let a = state.audit();
            let ok =
                a.phi_rel_drift <= 1e-6 && a.z_max_abs_err <= 1e-9 && a.gamma_max_rel_err <= 1e-9;
            integrity.record(ok, || format!("trial {t} iteration {}: {a:?}", it + 1));
        }
    }
    checks.push(integrity);

    let mut ordering = CheckReport::new("ordering-correctness", 100);
    for t in 0..100u64 {
        let sys = instance(4, Constellation::Qam16, 10.0, 3000 + t)?;
        let d = ngts_detect(&sys, TabuParams::new(30, 15), true)?;
        let direct = sys.metric(&d.solution);
        ordering.record((direct - d.metric).abs() <= 1e-9 * direct.max(1.0), || {
            format!("trial {t}: {direct} vs {}", d.metric)
        });
    }
    checks.push(ordering);

    let mut oracle = CheckReport::new("sphere-decoder-vs-ml", 150);
    for (nt, c) in cases() {
        let trials = if nt == 4 && c == Constellation::Qam16 {
            5
        } else {
            50
        };
        for t in 0..trials {
            let sys = instance(nt, c, 4.0, 4000 + t)?;
            let qr = qr_householder(&sys.h, &mut OpCount::default())?;
            let sd = se_sphere_decode(&sys, &qr)?;
            let ml = brute_force_ml(&sys)?;
            oracle.record(sd.s_ml == ml.s_ml, || format!("{nt}x{nt} {c} trial {t}"));
        }
    }
    checks.push(oracle);

    let mut eps = CheckReport::new("epsilon-expectation", 32);
    for n in 1..=32usize {
        let mut sum = 0usize;
        for u in 1..=n {
            for v in 1..=n {
                sum += u.min(v);
            }
        }
        let brute = sum as f64 / (n * n) as f64;
        eps.record((brute - expected_epsilon(n)).abs() <= 1e-12, || {
            format!("n = {n}")
        });
    }
    checks.push(eps);

    Ok(SelftestReport { checks })
}
