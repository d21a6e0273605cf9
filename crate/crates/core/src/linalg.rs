//! Dense real matrices, Householder QR, back-substitution, column ordering
//! and the zero-forcing starting point.

use std::ops::{Index, IndexMut};

use crate::complexity::OpCount;
use crate::error::{Error, Result};
use crate::model::{quantize, Constellation, Symbol};

/// Relative pivot threshold (against `‖H‖_F`) below which a factorization is singular.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Column-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row slices.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        for (j, &xj) in x.iter().enumerate().take(self.cols) {
            for (o, a) in out.iter_mut().zip(self.col(j)) {
                *o += a * xj;
            }
        }
        out
    }

    pub fn transpose_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.cols).map(|j| dot(self.col(j), x)).collect()
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let col = self.mul_vec(other.col(j));
            out.col_mut(j).copy_from_slice(&col);
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Matrix whose column `k` is column `perm[k]` of `self`.
    pub fn permute_columns(&self, perm: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(self.rows, perm.len());
        for (k, &src) in perm.iter().enumerate() {
            out.col_mut(k).copy_from_slice(self.col(src));
        }
        out
    }

    /// Squared column norms, uncounted.
    pub fn column_norms_sq(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|j| dot(self.col(j), self.col(j)))
            .collect()
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[j * self.rows + i]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[j * self.rows + i]
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Counted dot product: `n` mults, `n − 1` adds.
#[inline]
pub(crate) fn counted_dot(a: &[f64], b: &[f64], ops: &mut OpCount) -> f64 {
    let n = a.len().min(b.len());
    ops.charge(n, n.saturating_sub(1));
    dot(a, b)
}

/// Householder QR factors `H_perm = Q R`.
///
/// `Q` is held in factored form (one reflector per column); detectors only
/// need `Qᵀy`, which [`QrFactors::qt_mul`] applies directly. [`QrFactors::q`]
/// materializes the thin `N × M` matrix on demand.
#[derive(Debug, Clone)]
pub struct QrFactors {
    r: Matrix,
    reflectors: Vec<Vec<f64>>,
    taus: Vec<f64>,
    /// `±1` per column so that `diag(R) ≥ 0`.
    signs: Vec<f64>,
    perm: Vec<usize>,
    rows: usize,
    scale: f64,
}

impl QrFactors {
    /// Upper-triangular `M × M` factor.
    pub fn r(&self) -> &Matrix {
        &self.r
    }

    /// `perm[k]` is the original column index of factored column `k`.
    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn is_identity_perm(&self) -> bool {
        self.perm.iter().enumerate().all(|(k, &p)| k == p)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.r.cols()
    }

    /// Frobenius norm of the factored matrix.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `‖r_m‖²` for every column, uncounted.
    pub fn column_norms_sq(&self) -> Vec<f64> {
        (0..self.cols())
            .map(|m| dot(&self.r.col(m)[..=m], &self.r.col(m)[..=m]))
            .collect()
    }

    /// First `M` entries of `Qᵀy`, applied reflector by reflector.
    pub fn qt_mul(&self, y: &[f64], ops: &mut OpCount) -> Result<Vec<f64>> {
        if y.len() != self.rows {
            return Err(Error::Dimension(format!(
                "y has {} entries, expected {}",
                y.len(),
                self.rows
            )));
        }
        let mut w = y.to_vec();
        for (k, (v, &tau)) in self.reflectors.iter().zip(&self.taus).enumerate() {
            apply_reflector(v, tau, &mut w[k..], ops);
        }
        w.truncate(self.cols());
        for (wi, s) in w.iter_mut().zip(&self.signs) {
            *wi *= s;
        }
        Ok(w)
    }

    /// Thin orthonormal factor (`N × M`), uncounted.
    pub fn q(&self) -> Matrix {
        let (n, m) = (self.rows, self.cols());
        let mut q = Matrix::zeros(n, m);
        let mut scratch = OpCount::default();
        for j in 0..m {
            let col = q.col_mut(j);
            col[j] = 1.0;
            for k in (0..m).rev() {
                apply_reflector(
                    &self.reflectors[k],
                    self.taus[k],
                    &mut col[k..],
                    &mut scratch,
                );
            }
            for v in col.iter_mut() {
                *v *= self.signs[j];
            }
        }
        q
    }

    /// `‖y‖² − ‖Qᵀy‖²`: the part of the ML metric no candidate can change.
    pub fn residual_offset(&self, y: &[f64], qty: &[f64]) -> f64 {
        if self.rows == self.cols() {
            return 0.0;
        }
        (dot(y, y) - dot(qty, qty)).max(0.0)
    }

    /// `R x`, counted as an upper-triangular product.
    pub fn r_mul(&self, x: &[f64], ops: &mut OpCount) -> Vec<f64> {
        let m = self.cols();
        let mut out = vec![0.0; m];
        for (j, &xj) in x.iter().enumerate().take(m) {
            let col = &self.r.col(j)[..=j];
            for (o, &rij) in out.iter_mut().zip(col) {
                *o += rij * xj;
            }
        }
        // m(m+1)/2 mults, m(m−1)/2 adds.
        ops.charge(m * (m + 1) / 2, m * m.saturating_sub(1) / 2);
        out
    }
}

fn apply_reflector(v: &[f64], tau: f64, w: &mut [f64], ops: &mut OpCount) {
    let t = tau * counted_dot(v, w, ops);
    ops.mul(1);
    for (wi, vi) in w.iter_mut().zip(v) {
        *wi -= t * vi;
    }
    ops.charge(v.len(), v.len());
}

/// Householder QR of an `N × M` matrix with `N ≥ M`; `diag(R) ≥ 0`.
pub fn qr_householder(h: &Matrix, ops: &mut OpCount) -> Result<QrFactors> {
    let (n, m) = (h.rows(), h.cols());
    if m == 0 || n < m {
        return Err(Error::Dimension(format!(
            "QR needs N >= M >= 1, got {n}x{m}"
        )));
    }
    let scale = h.frobenius_norm();
    let threshold = RANK_TOLERANCE * scale;
    let mut a = h.clone();
    let mut reflectors = Vec::with_capacity(m);
    let mut taus = Vec::with_capacity(m);
    for k in 0..m {
        let x = &a.col(k)[k..];
        let len = x.len();
        let norm_sq = counted_dot(x, x, ops);
        let norm = norm_sq.sqrt();
        if norm <= threshold || norm == 0.0 {
            return Err(Error::Singular {
                index: k + 1,
                pivot: norm,
            });
        }
        let x0 = x[0];
        let sign = if x0 >= 0.0 { 1.0 } else { -1.0 };
        let mut v = x.to_vec();
        v[0] = x0 + sign * norm;
        // vᵀv = 2‖x‖(‖x‖ + |x0|), τ = 2 / vᵀv.
        let vtv = 2.0 * norm * (norm + x0.abs());
        let tau = 2.0 / vtv;
        ops.charge(1 + 2 + 1, 1 + 1);
        let col = a.col_mut(k);
        col[k] = -sign * norm;
        col[k + 1..].iter_mut().for_each(|e| *e = 0.0);
        for j in k + 1..m {
            apply_reflector(&v, tau, &mut a.col_mut(j)[k..], ops);
        }
        debug_assert_eq!(v.len(), len);
        reflectors.push(v);
        taus.push(tau);
    }
    let mut r = Matrix::zeros(m, m);
    let mut signs = vec![1.0; m];
    for k in 0..m {
        if a[(k, k)] < 0.0 {
            signs[k] = -1.0;
        }
    }
    for j in 0..m {
        for i in 0..=j {
            r[(i, j)] = signs[i] * a[(i, j)];
        }
    }
    Ok(QrFactors {
        r,
        reflectors,
        taus,
        signs,
        perm: (0..m).collect(),
        rows: n,
        scale,
    })
}

/// Permutation sorting columns by ascending squared norm; ties keep index order.
pub fn permutation_by_norms(norms_sq: &[f64]) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..norms_sq.len()).collect();
    perm.sort_by(|&a, &b| norms_sq[a].total_cmp(&norms_sq[b]).then(a.cmp(&b)));
    perm
}

/// Reorders the columns of `h` by ascending norm when `ascending` is set.
pub fn order_columns(h: &Matrix, ascending: bool) -> (Matrix, Vec<usize>) {
    let perm = if ascending {
        permutation_by_norms(&h.column_norms_sq())
    } else {
        (0..h.cols()).collect()
    };
    (h.permute_columns(&perm), perm)
}

/// QR of `h` after optional norm ordering, using precomputed squared column norms.
pub fn ordered_qr(
    h: &Matrix,
    norms_sq: &[f64],
    ascending: bool,
    ops: &mut OpCount,
) -> Result<QrFactors> {
    if !ascending {
        return qr_householder(h, ops);
    }
    let perm = permutation_by_norms(norms_sq);
    let mut qr = qr_householder(&h.permute_columns(&perm), ops)?;
    qr.perm = perm;
    Ok(qr)
}

/// Solves `R x = b` for upper-triangular `R`.
pub fn back_substitute(
    r: &Matrix,
    b: &[f64],
    tolerance: f64,
    ops: &mut OpCount,
) -> Result<Vec<f64>> {
    let m = r.cols();
    if r.rows() != m || b.len() != m {
        return Err(Error::Dimension(format!(
            "back-substitution with {}x{} and {}",
            r.rows(),
            m,
            b.len()
        )));
    }
    let mut x = vec![0.0; m];
    for i in (0..m).rev() {
        let pivot = r[(i, i)];
        if pivot.abs() <= tolerance || pivot == 0.0 {
            return Err(Error::Singular {
                index: i + 1,
                pivot,
            });
        }
        let mut acc = b[i];
        for j in i + 1..m {
            acc -= r[(i, j)] * x[j];
        }
        x[i] = acc / pivot;
        let tail = m - 1 - i;
        ops.charge(tail + 1, tail);
    }
    Ok(x)
}

/// Zero-forcing point: the unconstrained least-squares solution and its quantization.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroForcing {
    pub unquantized: Vec<f64>,
    pub x: Vec<Symbol>,
}

/// `x_ZF = ⌈R⁻¹Qᵀy⌋` in the factored (possibly permuted) column order.
pub fn zf_solve(
    qr: &QrFactors,
    qty: &[f64],
    constellation: Constellation,
    ops: &mut OpCount,
) -> Result<ZeroForcing> {
    let unquantized = back_substitute(qr.r(), qty, RANK_TOLERANCE * qr.scale(), ops)?;
    let x = quantize(&unquantized, constellation);
    Ok(ZeroForcing { unquantized, x })
}

/// Squared column norms of a real-model channel, computed once per
/// `[Re −Im; Im Re]` column pair; `N` mults and `N − 1` adds per pair.
pub fn paired_column_norms(h: &Matrix, nt: usize, ops: &mut OpCount) -> Vec<f64> {
    let m = h.cols();
    if m != 2 * nt {
        return (0..m)
            .map(|j| counted_dot(h.col(j), h.col(j), ops))
            .collect();
    }
    let mut norms = vec![0.0; m];
    for j in 0..nt {
        let v = counted_dot(h.col(j), h.col(j), ops);
        norms[j] = v;
        norms[j + nt] = v;
    }
    norms
}
