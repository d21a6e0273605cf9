//! Operation accounting and analytic complexity models.
//!
//! Only real multiplications and real additions that appear in the detection
//! formulas are counted (divisions count as multiplications, subtractions as
//! additions). Index arithmetic, comparisons, square roots and memory traffic
//! are free. Every counted site increments an [`OpCount`] explicitly, so a
//! ledger is exact and deterministic for a given instance.

use std::ops::AddAssign;

use crate::error::{Error, Result};

/// Counter of real multiplications and additions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct OpCount {
    pub mults: u64,
    pub adds: u64,
}

impl OpCount {
    pub const fn new(mults: u64, adds: u64) -> Self {
        Self { mults, adds }
    }

    #[inline]
    pub fn mul(&mut self, n: usize) {
        self.mults += n as u64;
    }

    #[inline]
    pub fn add(&mut self, n: usize) {
        self.adds += n as u64;
    }

    #[inline]
    pub fn charge(&mut self, mults: usize, adds: usize) {
        self.mults += mults as u64;
        self.adds += adds as u64;
    }

    pub fn total(&self) -> u64 {
        self.mults + self.adds
    }
}

impl AddAssign for OpCount {
    fn add_assign(&mut self, rhs: Self) {
        self.mults += rhs.mults;
        self.adds += rhs.adds;
    }
}

/// Algorithm phase an operation is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Initialization,
    IterativeSearch,
}

/// Measured arithmetic of one or more detector runs.
///
/// Besides the per-phase counters the ledger keeps exact integer sums of the
/// per-iteration neighborhood size `L`, group count `K` and accepted
/// difference position `d*` (1-based), so the means are exact.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OpLedger {
    pub init: OpCount,
    pub search: OpCount,
    /// Completed search iterations.
    pub iterations: u64,
    pub neighbor_sum: u64,
    pub group_sum: u64,
    pub group_samples: u64,
    pub dstar_sum: u64,
    /// Detector runs merged into this ledger.
    pub runs: u64,
    /// Gamma evaluations whose cache was staler than the last accepted move.
    pub stale_gamma: u64,
}

impl OpLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn phase_mut(&mut self, phase: Phase) -> &mut OpCount {
        match phase {
            Phase::Initialization => &mut self.init,
            Phase::IterativeSearch => &mut self.search,
        }
    }

    pub fn mults(&self) -> u64 {
        self.init.mults + self.search.mults
    }

    pub fn adds(&self) -> u64 {
        self.init.adds + self.search.adds
    }

    pub fn total(&self) -> u64 {
        self.init.total() + self.search.total()
    }

    /// Records the bookkeeping of one completed iteration.
    pub fn record_iteration(&mut self, neighbors: usize, groups: Option<usize>, dstar: usize) {
        self.iterations += 1;
        self.neighbor_sum += neighbors as u64;
        if let Some(k) = groups {
            self.group_sum += k as u64;
            self.group_samples += 1;
        }
        self.dstar_sum += dstar as u64;
    }

    pub fn mean_neighbors(&self) -> Option<f64> {
        (self.iterations > 0).then(|| self.neighbor_sum as f64 / self.iterations as f64)
    }

    pub fn mean_groups(&self) -> Option<f64> {
        (self.group_samples > 0).then(|| self.group_sum as f64 / self.group_samples as f64)
    }

    pub fn mean_dstar(&self) -> Option<f64> {
        (self.iterations > 0).then(|| self.dstar_sum as f64 / self.iterations as f64)
    }

    /// Average iterative-search operations per iteration.
    pub fn search_ops_per_iteration(&self) -> Option<f64> {
        (self.iterations > 0).then(|| self.search.total() as f64 / self.iterations as f64)
    }

    /// Elementwise sum.
    pub fn merge(&mut self, other: &OpLedger) {
        self.init += other.init;
        self.search += other.search;
        self.iterations += other.iterations;
        self.neighbor_sum += other.neighbor_sum;
        self.group_sum += other.group_sum;
        self.group_samples += other.group_samples;
        self.dstar_sum += other.dstar_sum;
        self.runs += other.runs;
        self.stale_gamma += other.stale_gamma;
    }
}

/// Initialization term of the conventional TS model: `2N³/3 + 3N² + N/3`.
pub fn conventional_init_ops(n: usize) -> f64 {
    let n = n as f64;
    2.0 * n.powi(3) / 3.0 + 3.0 * n * n + n / 3.0
}

/// Per-iteration term of the conventional TS model: `4L̄N − 2`.
pub fn conventional_iteration_ops(n: usize, mean_neighbors: f64) -> f64 {
    4.0 * mean_neighbors * n as f64 - 2.0
}

/// Predicted total operations of conventional TS.
pub fn predict_conventional(n: usize, mean_neighbors: f64, iters: usize) -> f64 {
    conventional_init_ops(n) + iters as f64 * conventional_iteration_ops(n, mean_neighbors)
}

/// Initialization term of the NG-TS model: `4N³/3 + 9N²/2 + 3N/2`.
pub fn ngts_init_ops(n: usize) -> f64 {
    let n = n as f64;
    4.0 * n.powi(3) / 3.0 + 4.5 * n * n + 1.5 * n
}

/// Per-iteration term of the NG-TS model: `3K̄ + 2L̄ + 2L̄N/3 + L̄/(3N)`.
pub fn ngts_iteration_ops(n: usize, mean_neighbors: f64, mean_groups: f64) -> f64 {
    let n = n as f64;
    let l = mean_neighbors;
    3.0 * mean_groups + 2.0 * l + 2.0 * l * n / 3.0 + l / (3.0 * n)
}

/// Predicted total operations of NG-TS.
pub fn predict_ngts(n: usize, mean_neighbors: f64, mean_groups: f64, iters: usize) -> f64 {
    if mean_neighbors == 0.0 && mean_groups == 0.0 {
        return ngts_init_ops(n);
    }
    ngts_init_ops(n) + iters as f64 * ngts_iteration_ops(n, mean_neighbors, mean_groups)
}

/// CDF of `ε = min(d_l, d*)` for independent uniform positions on `1..=n`:
/// `F[i] = i(2n − i)/n²`.
pub fn epsilon_cdf(i: usize, n: usize) -> Result<f64> {
    if n == 0 || i > n {
        return Err(Error::OutOfRange(format!(
            "epsilon_cdf needs 0 <= i <= n, n >= 1 (i = {i}, n = {n})"
        )));
    }
    let (i, n) = (i as f64, n as f64);
    Ok(i * (2.0 * n - i) / (n * n))
}

/// Expected value of `ε`: `n/3 + 1/2 + 1/(6n)`.
pub fn expected_epsilon(n: usize) -> f64 {
    let n = n.max(1) as f64;
    n / 3.0 + 0.5 + 1.0 / (6.0 * n)
}

/// Percentage reduction of `b`'s total operations relative to `a`.
pub fn measured_reduction(a: &OpLedger, b: &OpLedger) -> Result<f64> {
    let base = a.total();
    if base == 0 {
        return Err(Error::OutOfRange(
            "reference ledger has zero operations".into(),
        ));
    }
    Ok(100.0 * (1.0 - b.total() as f64 / base as f64))
}

/// Predicted `(mults, adds)` for the initialization steps of the NG-TS
/// pipeline with a square `n × n` real model.
pub mod table {
    fn n(n: usize) -> f64 {
        n as f64
    }

    /// Householder QR.
    pub fn qr(size: usize) -> (f64, f64) {
        let c = 2.0 * n(size).powi(3) / 3.0;
        (c, c)
    }

    /// `f_m = |δ|²‖r_m‖²`.
    pub fn norms(size: usize) -> (f64, f64) {
        let s = n(size);
        (s * s / 4.0 + 1.0, s * s / 4.0 - s / 2.0)
    }

    /// Back-substitution for the ZF point.
    pub fn zero_forcing(size: usize) -> (f64, f64) {
        let s = n(size);
        (s * s / 2.0 + s / 2.0, s * s / 2.0 - s / 2.0)
    }

    /// Residual `z = Qᵀy − Rc`.
    pub fn residual(size: usize) -> (f64, f64) {
        let s = n(size);
        (1.5 * s * s + s / 2.0, 1.5 * s * s - s / 2.0)
    }

    /// Initial metric `‖z‖²`.
    pub fn initial_metric(size: usize) -> (f64, f64) {
        let s = n(size);
        (s, s - 1.0)
    }
}
