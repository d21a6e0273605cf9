//! Tabu-list machinery, neighbor enumeration, the generic search driver and
//! the two baseline detectors (conventional TS and QR-TS).
//!
//! A move changes one coordinate of the current candidate `c` by one alphabet
//! step. [`Move::step`] is `x_d − c_d`; the metric formulas use the opposite
//! sign, `δ_d = c_d − x_d` ([`Move::delta`]), so that the neighbor residual is
//! `u + h_d δ_d`.

use std::collections::{HashMap, VecDeque};

use crate::complexity::{OpCount, OpLedger};
use crate::error::{Error, Result};
use crate::linalg::{
    counted_dot, ordered_qr, paired_column_norms, qr_householder, zf_solve, Matrix, QrFactors,
};
use crate::model::{Constellation, RealSystem, Symbol};

/// Single-coordinate move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Move {
    /// 0-based difference position.
    pub pos: usize,
    /// New symbol minus old symbol at `pos`.
    pub step: Symbol,
}

impl Move {
    /// `δ = c_d − x_d`.
    #[inline]
    pub fn delta(self) -> f64 {
        -f64::from(self.step)
    }

    pub fn apply(self, c: &mut [Symbol]) {
        c[self.pos] += self.step;
    }
}

/// FIFO tabu list of whole candidate vectors with O(1) membership.
#[derive(Debug, Clone)]
pub struct TabuList {
    capacity: usize,
    queue: VecDeque<Vec<Symbol>>,
    members: HashMap<Vec<Symbol>, u32>,
}

impl TabuList {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::OutOfRange(
                "tabu list capacity must be at least 1".into(),
            ));
        }
        Ok(Self {
            capacity,
            queue: VecDeque::with_capacity(capacity.min(1 << 16)),
            members: HashMap::with_capacity(capacity.min(1 << 16)),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.queue.len() == self.capacity
    }

    pub fn contains(&self, v: &[Symbol]) -> bool {
        self.members.contains_key(v)
    }

    /// Pushes `v`, releasing the oldest entry first if the list is full.
    /// Returns the evicted entry.
    pub fn push(&mut self, v: Vec<Symbol>) -> Option<Vec<Symbol>> {
        let evicted = if self.is_full() {
            self.queue.pop_front()
        } else {
            None
        };
        if let Some(old) = &evicted {
            if let Some(count) = self.members.get_mut(old) {
                *count -= 1;
                if *count == 0 {
                    self.members.remove(old);
                }
            }
        }
        *self.members.entry(v.clone()).or_insert(0) += 1;
        self.queue.push_back(v);
        evicted
    }

    pub fn iter(&self) -> impl Iterator<Item = &[Symbol]> {
        self.queue.iter().map(Vec::as_slice)
    }
}

/// Non-tabu single-step neighbors of a candidate, ordered by position and
/// then `+delta` before `−delta`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Neighborhood {
    pub moves: Vec<Move>,
}

impl Neighborhood {
    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    pub fn neighbor(&self, c: &[Symbol], index: usize) -> Vec<Symbol> {
        let mut x = c.to_vec();
        self.moves[index].apply(&mut x);
        x
    }
}

pub fn enumerate_neighbors(
    c: &[Symbol],
    constellation: Constellation,
    tabu: &TabuList,
) -> Neighborhood {
    let mut moves = Vec::new();
    let mut scratch = c.to_vec();
    enumerate_into(c, constellation, tabu, &mut scratch, &mut moves);
    Neighborhood { moves }
}

fn enumerate_into(
    c: &[Symbol],
    constellation: Constellation,
    tabu: &TabuList,
    scratch: &mut [Symbol],
    out: &mut Vec<Move>,
) {
    out.clear();
    let delta = constellation.delta();
    for (pos, &value) in c.iter().enumerate() {
        for step in [delta, -delta] {
            let next = value + step;
            if !constellation.contains(next) {
                continue;
            }
            scratch[pos] = next;
            if !tabu.contains(scratch) {
                out.push(Move { pos, step });
            }
            scratch[pos] = value;
        }
    }
}

/// Result of examining one neighborhood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    /// Index of the chosen move in the neighborhood.
    pub index: usize,
    /// Search-domain metric of the chosen neighbor.
    pub metric: f64,
    /// Number of neighbor groups examined, for grouped detectors.
    pub groups: Option<usize>,
}

/// Metric evaluation strategy plugged into [`TabuSearch`].
pub trait SearchEngine {
    /// Search-domain metric of the current candidate.
    fn metric(&self) -> f64;

    /// Picks the minimum-metric move, charging the arithmetic to `ops`.
    fn select(&mut self, candidate: &[Symbol], moves: &[Move], ops: &mut OpCount) -> Selection;

    /// Updates residual state after `moves[selection.index]` is accepted.
    fn commit(&mut self, mv: Move, selection: &Selection, ops: &mut OpCount);

    /// Flushes engine-side bookkeeping into the ledger at the end of a run.
    fn finish(&mut self, _ledger: &mut OpLedger) {}
}

/// One accepted move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStep {
    pub pos: usize,
    pub step: Symbol,
    /// ML metric of the new candidate.
    pub metric: f64,
    /// Ledger total after this iteration.
    pub cumulative_ops: u64,
}

/// Visited candidates of one search, in the search (possibly permuted) domain.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchTrace {
    pub initial: Vec<Symbol>,
    pub initial_metric: f64,
    pub init_ops: u64,
    pub steps: Vec<TraceStep>,
    /// Iteration at which the returned solution was first visited (0 = start point).
    pub best_iteration: usize,
    /// Set when the search stopped because the neighborhood became empty.
    pub terminated_early: bool,
    /// `perm[k]` is the original column of search position `k`.
    pub perm: Vec<usize>,
}

impl SearchTrace {
    /// Visited candidates including the start point, in search order.
    pub fn candidates(&self) -> Vec<Vec<Symbol>> {
        let mut c = self.initial.clone();
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        out.push(c.clone());
        for s in &self.steps {
            c[s.pos] += s.step;
            out.push(c.clone());
        }
        out
    }

    /// Visited candidates mapped back to the original antenna order.
    pub fn candidates_original(&self) -> Vec<Vec<Symbol>> {
        self.candidates()
            .into_iter()
            .map(|c| unpermute(&c, &self.perm))
            .collect()
    }

    pub fn metrics(&self) -> Vec<f64> {
        std::iter::once(self.initial_metric)
            .chain(self.steps.iter().map(|s| s.metric))
            .collect()
    }
}

pub(crate) fn unpermute(x: &[Symbol], perm: &[usize]) -> Vec<Symbol> {
    let mut out = vec![0; x.len()];
    for (k, &p) in perm.iter().enumerate() {
        out[p] = x[k];
    }
    out
}

/// Iteration and tabu-list sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TabuParams {
    pub iterations: usize,
    pub tabu_capacity: usize,
}

impl TabuParams {
    pub fn new(iterations: usize, tabu_capacity: usize) -> Self {
        Self {
            iterations,
            tabu_capacity,
        }
    }

    /// `P = I/2` (at least 1).
    pub fn with_default_tabu(iterations: usize) -> Self {
        Self {
            iterations,
            tabu_capacity: (iterations / 2).max(1),
        }
    }
}

/// Output of a detector run.
#[derive(Debug, Clone)]
pub struct Detection {
    /// Detected real symbols in original antenna order.
    pub solution: Vec<Symbol>,
    /// ML metric of `solution` as maintained by the detector.
    pub metric: f64,
    pub trace: SearchTrace,
    pub ledger: OpLedger,
}

/// Tabu search driver shared by all detectors.
#[derive(Debug)]
pub struct TabuSearch<E> {
    engine: E,
    constellation: Constellation,
    candidate: Vec<Symbol>,
    tabu: TabuList,
    best: Vec<Symbol>,
    best_metric: f64,
    offset: f64,
    trace: SearchTrace,
    moves: Vec<Move>,
    scratch: Vec<Symbol>,
    finished: bool,
}

impl<E: SearchEngine> TabuSearch<E> {
    /// Starts at `start` and pushes it to the tabu list. `offset` converts
    /// search-domain metrics to ML metrics.
    pub fn new(
        engine: E,
        start: Vec<Symbol>,
        constellation: Constellation,
        tabu_capacity: usize,
        offset: f64,
        perm: Vec<usize>,
        ledger: &OpLedger,
    ) -> Result<Self> {
        let mut tabu = TabuList::new(tabu_capacity)?;
        tabu.push(start.clone());
        let metric = engine.metric();
        let trace = SearchTrace {
            initial: start.clone(),
            initial_metric: metric + offset,
            init_ops: ledger.total(),
            steps: Vec::new(),
            best_iteration: 0,
            terminated_early: false,
            perm,
        };
        Ok(Self {
            engine,
            constellation,
            scratch: start.clone(),
            best: start.clone(),
            candidate: start,
            tabu,
            best_metric: metric,
            offset,
            trace,
            moves: Vec::new(),
            finished: false,
        })
    }

    pub fn engine(&self) -> &E {
        &self.engine
    }

    pub fn engine_mut(&mut self) -> &mut E {
        &mut self.engine
    }

    pub fn candidate(&self) -> &[Symbol] {
        &self.candidate
    }

    pub fn tabu(&self) -> &TabuList {
        &self.tabu
    }

    pub fn best(&self) -> (&[Symbol], f64) {
        (&self.best, self.best_metric + self.offset)
    }

    pub fn trace(&self) -> &SearchTrace {
        &self.trace
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Runs one iteration. Returns `false` once the neighborhood is empty.
    pub fn step(&mut self, ledger: &mut OpLedger) -> bool {
        if self.finished {
            return false;
        }
        enumerate_into(
            &self.candidate,
            self.constellation,
            &self.tabu,
            &mut self.scratch,
            &mut self.moves,
        );
        if self.moves.is_empty() {
            self.finished = true;
            self.trace.terminated_early = true;
            return false;
        }
        let selection = self
            .engine
            .select(&self.candidate, &self.moves, &mut ledger.search);
        let mv = self.moves[selection.index];
        self.engine.commit(mv, &selection, &mut ledger.search);
        mv.apply(&mut self.candidate);
        self.scratch[mv.pos] = self.candidate[mv.pos];
        ledger.record_iteration(self.moves.len(), selection.groups, mv.pos + 1);

        let metric = self.engine.metric();
        if metric < self.best_metric {
            self.best_metric = metric;
            self.best.copy_from_slice(&self.candidate);
            self.trace.best_iteration = self.trace.steps.len() + 1;
        }
        self.tabu.push(self.candidate.clone());
        self.trace.steps.push(TraceStep {
            pos: mv.pos,
            step: mv.step,
            metric: metric + self.offset,
            cumulative_ops: ledger.total(),
        });
        true
    }

    /// Runs up to `iterations` steps and returns the best candidate visited,
    /// mapped to original order.
    pub fn run(mut self, iterations: usize, mut ledger: OpLedger) -> Detection {
        for _ in 0..iterations {
            if !self.step(&mut ledger) {
                break;
            }
        }
        self.engine.finish(&mut ledger);
        ledger.runs += 1;
        Detection {
            solution: unpermute(&self.best, &self.trace.perm),
            metric: self.best_metric + self.offset,
            trace: self.trace,
            ledger,
        }
    }
}

/// Common QR front end: optional ordering, factorization, `Qᵀy` and the ZF point.
pub(crate) struct Front {
    pub qr: QrFactors,
    pub qty: Vec<f64>,
    pub x_zf: Vec<Symbol>,
    pub norms_sq: Option<Vec<f64>>,
}

pub(crate) fn qr_front(
    sys: &RealSystem,
    ordering: bool,
    want_norms: bool,
    ops: &mut OpCount,
) -> Result<Front> {
    let norms_sq = (ordering || want_norms).then(|| paired_column_norms(&sys.h, sys.nt, ops));
    let qr = match &norms_sq {
        Some(norms) => ordered_qr(&sys.h, norms, ordering, ops)?,
        None => qr_householder(&sys.h, ops)?,
    };
    let qty = qr.qt_mul(&sys.y, ops)?;
    let x_zf = zf_solve(&qr, &qty, sys.constellation, ops)?.x;
    let norms_sq = norms_sq.map(|n| qr.perm().iter().map(|&p| n[p]).collect());
    Ok(Front {
        qr,
        qty,
        x_zf,
        norms_sq,
    })
}

/// `z = Qᵀy − Rc`, counted.
pub(crate) fn initial_residual(front: &Front, c: &[Symbol], ops: &mut OpCount) -> Vec<f64> {
    let cf: Vec<f64> = c.iter().map(|&v| f64::from(v)).collect();
    let rc = front.qr.r_mul(&cf, ops);
    ops.add(rc.len());
    front.qty.iter().zip(&rc).map(|(a, b)| a - b).collect()
}

pub(crate) fn check_params(sys: &RealSystem, params: TabuParams) -> Result<()> {
    if params.tabu_capacity == 0 {
        return Err(Error::OutOfRange(
            "tabu list capacity must be at least 1".into(),
        ));
    }
    if sys.y.len() != sys.n() || sys.m() != 2 * sys.nt || sys.n() != 2 * sys.nr {
        return Err(Error::Dimension("inconsistent real system".into()));
    }
    Ok(())
}

/// Full-metric evaluation `φ(x) = ‖u + h_d δ_d‖²` with `u = y − Hc`.
#[derive(Debug, Clone)]
pub struct ConventionalEngine<'a> {
    h: &'a Matrix,
    u: Vec<f64>,
    phi: f64,
    work: Vec<f64>,
    best_work: Vec<f64>,
}

impl<'a> ConventionalEngine<'a> {
    pub fn new(h: &'a Matrix, y: &[f64], c: &[Symbol], ops: &mut OpCount) -> Self {
        let (n, m) = (h.rows(), h.cols());
        let mut u = y.to_vec();
        for (j, &cj) in c.iter().enumerate() {
            let cj = f64::from(cj);
            for (ui, hij) in u.iter_mut().zip(h.col(j)) {
                *ui -= hij * cj;
            }
        }
        ops.charge(n * m, n * m);
        let phi = counted_dot(&u, &u, ops);
        Self {
            h,
            u,
            phi,
            work: vec![0.0; n],
            best_work: vec![0.0; n],
        }
    }

    pub fn residual(&self) -> &[f64] {
        &self.u
    }
}

impl SearchEngine for ConventionalEngine<'_> {
    fn metric(&self) -> f64 {
        self.phi
    }

    fn select(&mut self, _candidate: &[Symbol], moves: &[Move], ops: &mut OpCount) -> Selection {
        let n = self.u.len();
        let mut best = Selection {
            index: 0,
            metric: f64::INFINITY,
            groups: None,
        };
        for (index, mv) in moves.iter().enumerate() {
            let delta = mv.delta();
            for ((w, u), h) in self.work.iter_mut().zip(&self.u).zip(self.h.col(mv.pos)) {
                *w = u + h * delta;
            }
            ops.charge(n, n);
            let metric = counted_dot(&self.work, &self.work, ops);
            if metric < best.metric || index == 0 {
                best = Selection {
                    index,
                    metric,
                    groups: None,
                };
                std::mem::swap(&mut self.work, &mut self.best_work);
            }
        }
        best
    }

    fn commit(&mut self, _mv: Move, selection: &Selection, _ops: &mut OpCount) {
        std::mem::swap(&mut self.u, &mut self.best_work);
        self.phi = selection.metric;
    }
}

/// Conventional TS: every neighbor's metric is evaluated in full.
pub fn conventional_ts(sys: &RealSystem, params: TabuParams) -> Result<Detection> {
    check_params(sys, params)?;
    let mut ledger = OpLedger::new();
    let front = qr_front(sys, false, false, &mut ledger.init)?;
    let engine = ConventionalEngine::new(&sys.h, &sys.y, &front.x_zf, &mut ledger.init);
    let m = sys.m();
    let search = TabuSearch::new(
        engine,
        front.x_zf,
        sys.constellation,
        params.tabu_capacity,
        0.0,
        (0..m).collect(),
        &ledger,
    )?;
    Ok(search.run(params.iterations, ledger))
}

/// QR-reduced evaluation `φ(x) = Σ_{n≤d}(z_n + r_{n,d}δ)² + Σ_{n>d} z_n²`.
#[derive(Debug, Clone)]
pub struct QrEngine<'a> {
    r: &'a Matrix,
    z: Vec<f64>,
    /// `tail_sq[k] = Σ_{n≥k} z_n²`, with `tail_sq[M] = 0`.
    tail_sq: Vec<f64>,
    phi: f64,
    work: Vec<f64>,
    best_work: Vec<f64>,
}

impl<'a> QrEngine<'a> {
    pub fn new(r: &'a Matrix, z: Vec<f64>, ops: &mut OpCount) -> Self {
        let m = z.len();
        let mut tail_sq = vec![0.0; m + 1];
        for k in (0..m).rev() {
            tail_sq[k] = z[k] * z[k] + tail_sq[k + 1];
        }
        ops.charge(m, m.saturating_sub(1));
        Self {
            r,
            phi: tail_sq[0],
            z,
            tail_sq,
            work: vec![0.0; m],
            best_work: vec![0.0; m],
        }
    }

    pub fn residual(&self) -> &[f64] {
        &self.z
    }
}

impl SearchEngine for QrEngine<'_> {
    fn metric(&self) -> f64 {
        self.phi
    }

    fn select(&mut self, _candidate: &[Symbol], moves: &[Move], ops: &mut OpCount) -> Selection {
        let mut best = Selection {
            index: 0,
            metric: f64::INFINITY,
            groups: None,
        };
        for (index, mv) in moves.iter().enumerate() {
            let d = mv.pos;
            let delta = mv.delta();
            let col = &self.r.col(d)[..=d];
            let mut acc = 0.0;
            for ((w, z), r) in self.work[..=d].iter_mut().zip(&self.z[..=d]).zip(col) {
                *w = z + r * delta;
                acc += *w * *w;
            }
            let metric = acc + self.tail_sq[d + 1];
            // (d+1) products + (d+1) squares; (d+1) sums + d accumulations + 1 tail.
            ops.charge(2 * (d + 1), 2 * (d + 1));
            if metric < best.metric || index == 0 {
                best = Selection {
                    index,
                    metric,
                    groups: None,
                };
                std::mem::swap(&mut self.work, &mut self.best_work);
            }
        }
        best
    }

    fn commit(&mut self, mv: Move, selection: &Selection, ops: &mut OpCount) {
        let d = mv.pos;
        self.z[..=d].copy_from_slice(&self.best_work[..=d]);
        for k in (0..=d).rev() {
            self.tail_sq[k] = self.z[k] * self.z[k] + self.tail_sq[k + 1];
        }
        ops.charge(d + 1, d + 1);
        self.phi = selection.metric;
    }
}

/// QR-TS: same decisions as [`conventional_ts`], metrics through `z = Qᵀy − Rc`.
pub fn qr_ts(sys: &RealSystem, params: TabuParams, ordering: bool) -> Result<Detection> {
    check_params(sys, params)?;
    let mut ledger = OpLedger::new();
    let front = qr_front(sys, ordering, false, &mut ledger.init)?;
    let z = initial_residual(&front, &front.x_zf, &mut ledger.init);
    let offset = front.qr.residual_offset(&sys.y, &front.qty);
    let engine = QrEngine::new(front.qr.r(), z, &mut ledger.init);
    let perm = front.qr.perm().to_vec();
    let search = TabuSearch::new(
        engine,
        front.x_zf.clone(),
        sys.constellation,
        params.tabu_capacity,
        offset,
        perm,
        &ledger,
    )?;
    Ok(search.run(params.iterations, ledger))
}
