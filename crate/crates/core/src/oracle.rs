//! Exact maximum-likelihood references.

use crate::complexity::OpCount;
use crate::error::{Error, Result};
use crate::linalg::{zf_solve, QrFactors, RANK_TOLERANCE};
use crate::model::{RealSystem, Symbol};
use crate::tabu::unpermute;

/// Largest search space [`brute_force_ml`] will enumerate.
pub const BRUTE_FORCE_LIMIT: f64 = 1e6;

/// Exact ML solution.
#[derive(Debug, Clone, PartialEq)]
pub struct MlResult {
    pub s_ml: Vec<Symbol>,
    /// `‖y − H s_ml‖²`.
    pub metric: f64,
    /// Candidates (brute force) or tree nodes (sphere decoder) visited.
    pub nodes: u64,
}

/// Exhaustive search over `𝒜^M`; ties go to the lexicographically smallest vector.
pub fn brute_force_ml(sys: &RealSystem) -> Result<MlResult> {
    let m = sys.m();
    let alphabet = sys.constellation.alphabet();
    let q = alphabet.len();
    let size = (q as f64).powi(m as i32);
    if size > BRUTE_FORCE_LIMIT {
        return Err(Error::SizeGuard {
            size,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let mut digits = vec![0usize; m];
    let mut x: Vec<Symbol> = vec![alphabet[0]; m];
    // Residual y − Hx maintained as digits roll over.
    let mut res = sys.y.clone();
    for (j, &xj) in x.iter().enumerate() {
        for (ri, hij) in res.iter_mut().zip(sys.h.col(j)) {
            *ri -= hij * f64::from(xj);
        }
    }
    let mut best = x.clone();
    let mut best_metric = f64::INFINITY;
    let mut nodes = 0u64;
    loop {
        nodes += 1;
        let metric: f64 = res.iter().map(|v| v * v).sum();
        if metric < best_metric {
            best_metric = metric;
            best.copy_from_slice(&x);
        }
        // Odometer: last coordinate varies fastest, digits ascend.
        let mut k = m;
        loop {
            if k == 0 {
                let metric = sys.metric(&best);
                return Ok(MlResult {
                    s_ml: best,
                    metric,
                    nodes,
                });
            }
            k -= 1;
            let old = x[k];
            digits[k] = (digits[k] + 1) % q;
            x[k] = alphabet[digits[k]];
            let change = f64::from(x[k]) - f64::from(old);
            for (ri, hij) in res.iter_mut().zip(sys.h.col(k)) {
                *ri -= hij * change;
            }
            if digits[k] != 0 {
                break;
            }
        }
    }
}

/// Schnorr–Euchner sphere decoding on the triangular system `Qᵀy ≈ R x`.
///
/// Children are visited nearest-first around each level's center, and the
/// radius starts at the zero-forcing point's metric and shrinks with every
/// leaf found. `qr` may carry a column permutation; the result is in the
/// original order.
pub fn se_sphere_decode(sys: &RealSystem, qr: &QrFactors) -> Result<MlResult> {
    let m = qr.cols();
    if m != sys.m() || qr.rows() != sys.n() {
        return Err(Error::Dimension(
            "factorization does not match the system".into(),
        ));
    }
    let r = qr.r();
    let tol = RANK_TOLERANCE * qr.scale();
    for k in 0..m {
        if r[(k, k)].abs() <= tol {
            return Err(Error::Singular {
                index: k + 1,
                pivot: r[(k, k)],
            });
        }
    }
    let mut scratch = OpCount::default();
    let zt = qr.qt_mul(&sys.y, &mut scratch)?;
    let zf = zf_solve(qr, &zt, sys.constellation, &mut scratch)?;
    let reduced = |x: &[Symbol]| -> f64 {
        (0..m)
            .map(|i| {
                let rx: f64 = (i..m).map(|j| r[(i, j)] * f64::from(x[j])).sum();
                (zt[i] - rx).powi(2)
            })
            .sum()
    };
    let mut best = zf.x.clone();
    let mut radius = reduced(&best);

    let alphabet = sys.constellation.alphabet();
    let mut x: Vec<Symbol> = vec![0; m];
    let mut partial = vec![0.0; m + 1];
    let mut children: Vec<Vec<Symbol>> = vec![Vec::with_capacity(alphabet.len()); m];
    let mut targets = vec![0.0; m];
    let mut cursor = vec![0usize; m];
    let mut nodes = 0u64;

    let expand = |k: usize, x: &[Symbol], children: &mut Vec<Vec<Symbol>>, targets: &mut [f64]| {
        let b: f64 = zt[k] - (k + 1..m).map(|j| r[(k, j)] * f64::from(x[j])).sum::<f64>();
        targets[k] = b;
        let center = b / r[(k, k)];
        let list = &mut children[k];
        list.clear();
        list.extend_from_slice(alphabet);
        list.sort_by(|a, c| {
            (f64::from(*a) - center)
                .abs()
                .total_cmp(&(f64::from(*c) - center).abs())
        });
    };

    let mut k = m - 1;
    expand(k, &x, &mut children, &mut targets);
    cursor[k] = 0;
    loop {
        if cursor[k] < children[k].len() {
            let v = children[k][cursor[k]];
            cursor[k] += 1;
            nodes += 1;
            let e = targets[k] - r[(k, k)] * f64::from(v);
            let d = partial[k + 1] + e * e;
            if d >= radius {
                // Siblings are farther from the center.
                cursor[k] = children[k].len();
                continue;
            }
            x[k] = v;
            if k == 0 {
                radius = d;
                best.copy_from_slice(&x);
            } else {
                partial[k] = d;
                k -= 1;
                expand(k, &x, &mut children, &mut targets);
                cursor[k] = 0;
            }
        } else {
            k += 1;
            if k == m {
                break;
            }
        }
    }
    let s_ml = unpermute(&best, qr.perm());
    let metric = sys.metric(&s_ml);
    Ok(MlResult {
        s_ml,
        metric,
        nodes,
    })
}
