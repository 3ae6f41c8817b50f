//! Dense linear algebra for the small projected problems.
//!
//! Everything here operates on matrices of dimension at most a few hundred: the coarse matrix
//! `Z^T A Z`, the Ritz pencils `(U^T A U, U^T B U)`, the 6x6 mixing normal equations and the
//! per-pixel preconditioner blocks. Symmetric eigenproblems are solved with cyclic Jacobi
//! sweeps, generalized ones by reduction through a column-dropping Cholesky factorization.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::{Error, Result};

/// Relative pivot threshold below which a Cholesky column is treated as dependent.
pub const PIVOT_RTOL: f64 = 1e-12;

const JACOBI_MAX_SWEEPS: usize = 100;

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl DenseMatrix {
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

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows. Panics on ragged input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n * m);
        for r in rows {
            assert_eq!(r.as_ref().len(), m, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Self {
            rows: n,
            cols: m,
            data,
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Gram-type matrix `M[i][j] = f(i, j)` for a symmetric `f`, evaluated on the upper triangle.
    pub fn symmetric_from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, o) in dst.iter_mut().zip(orow) {
                    *d += a * o;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| alpha * v).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Symmetric within `1e-12 * max|m|`.
    pub fn is_symmetric(&self) -> bool {
        if !self.is_square() {
            return false;
        }
        let tol = 1e-12 * self.max_abs();
        (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    /// Replaces the matrix by `(M + M^T) / 2`.
    pub fn symmetrize(&mut self) {
        assert!(self.is_square());
        for i in 0..self.rows {
            for j in 0..i {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }

    /// Principal submatrix on the given (sorted) index set.
    pub fn principal_submatrix(&self, idx: &[usize]) -> Self {
        let mut m = Self::zeros(idx.len(), idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                m[(a, b)] = self[(i, j)];
            }
        }
        m
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigenvalues in ascending order with their eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    /// `vectors[i]` belongs to `values[i]`.
    pub vectors: Vec<Vec<f64>>,
}

impl EigenPairs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Keeps the `k` smallest pairs.
    pub fn truncate(&mut self, k: usize) {
        self.values.truncate(k);
        self.vectors.truncate(k);
    }
}

/// Lower-triangular factor of a symmetric positive semidefinite matrix.
///
/// Columns are processed in their original order; a column whose pivot falls below
/// `PIVOT_RTOL * trace / n` is dropped (its column of `L` is left at zero) and recorded.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DenseMatrix,
    kept: Vec<usize>,
    dropped: Vec<usize>,
}

impl Cholesky {
    pub fn l(&self) -> &DenseMatrix {
        &self.l
    }

    pub fn rank(&self) -> usize {
        self.kept.len()
    }

    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    pub fn dropped(&self) -> &[usize] {
        &self.dropped
    }

    pub fn is_full_rank(&self) -> bool {
        self.dropped.is_empty()
    }

    /// Factor restricted to the kept columns: `F_KK = L_KK L_KK^T`.
    pub fn reduced_factor(&self) -> DenseMatrix {
        self.l.principal_submatrix(&self.kept)
    }

    /// Solves `F x = b` on the kept columns; entries of dropped columns are zero.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.rows();
        assert_eq!(b.len(), n);
        let mut y = vec![0.0; n];
        for &i in &self.kept {
            let mut s = b[i];
            for &k in self.kept.iter().take_while(|&&k| k < i) {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        for &i in self.kept.iter().rev() {
            let mut s = y[i];
            for &k in self.kept.iter().rev().take_while(|&&k| k > i) {
                s -= self.l[(k, i)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    /// Solves `F X = B` column by column.
    pub fn solve_matrix(&self, b: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let x = self.solve(&b.column(j));
            for (i, v) in x.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }
}

/// Cholesky factorization `F = L L^T` with dependent-column dropping.
pub fn cholesky(f: &DenseMatrix) -> Result<Cholesky> {
    if !f.is_square() {
        return Err(Error::DimensionMismatch {
            expected: f.rows(),
            found: f.cols(),
        });
    }
    let n = f.rows();
    let mut l = DenseMatrix::zeros(n, n);
    let mut kept = Vec::with_capacity(n);
    let mut dropped = Vec::new();
    if n == 0 {
        return Ok(Cholesky { l, kept, dropped });
    }
    let trace = f.trace();
    if !(trace > 0.0) {
        return Err(Error::NotPositiveDefinite {
            column: 0,
            pivot: trace,
        });
    }
    let threshold = PIVOT_RTOL * trace / n as f64;

    for j in 0..n {
        let mut pivot = f[(j, j)];
        for &k in &kept {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if pivot < -threshold {
            return Err(Error::NotPositiveDefinite { column: j, pivot });
        }
        if pivot < threshold {
            dropped.push(j);
            continue;
        }
        let d = pivot.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = f[(i, j)];
            for &k in &kept {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
        kept.push(j);
    }
    Ok(Cholesky { l, kept, dropped })
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Values ascend; equal values keep the order of their original diagonal position.
pub fn symmetric_eigen(a: &DenseMatrix) -> Result<EigenPairs> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            found: a.cols(),
        });
    }
    let n = a.rows();
    let mut m = a.clone();
    m.symmetrize();
    let mut v = DenseMatrix::identity(n);
    let scale = m.frobenius_norm();

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .map(|i| (0..i).map(|j| m[(i, j)] * m[(i, j)]).sum::<f64>())
            .sum();
        if off.sqrt() <= f64::EPSILON * 1e-2 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                if apq.abs() < f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
                    m[(p, q)] = 0.0;
                    m[(q, p)] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = order
        .iter()
        .map(|&i| {
            let mut col = v.column(i);
            fix_sign(&mut col);
            col
        })
        .collect();
    Ok(EigenPairs { values, vectors })
}

/// Makes the entry of largest magnitude positive (first one on ties).
fn fix_sign(x: &mut [f64]) {
    let mut best = 0.0_f64;
    let mut sign = 1.0;
    for &v in x.iter() {
        if v.abs() > best {
            best = v.abs();
            sign = v.signum();
        }
    }
    if sign < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
}

fn forward_substitute(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[(i, k)] * y[k]).sum();
        y[i] = (b[i] - s) / l[(i, i)];
    }
    y
}

fn backward_substitute_transposed(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[(k, i)] * x[k]).sum();
        x[i] = (b[i] - s) / l[(i, i)];
    }
    x
}

/// All eigenpairs of `G y = λ F y` that live on the numerically independent columns of `F`.
///
/// The returned count equals the effective rank of `F`. Eigenvectors are `F`-orthonormal and
/// vanish on dropped columns.
pub fn generalized_symmetric_eig_all(g: &DenseMatrix, f: &DenseMatrix) -> Result<EigenPairs> {
    if g.rows() != f.rows() || !g.is_square() || !f.is_square() {
        return Err(Error::DimensionMismatch {
            expected: f.rows(),
            found: g.rows(),
        });
    }
    let n = f.rows();
    let chol = cholesky(f)?;
    let kept = chol.kept().to_vec();
    let l = chol.reduced_factor();
    let g_kk = g.principal_submatrix(&kept);
    let r = kept.len();

    // C = L^{-1} G L^{-T}
    let mut x = DenseMatrix::zeros(r, r);
    for j in 0..r {
        let col = forward_substitute(&l, &g_kk.column(j));
        for i in 0..r {
            x[(i, j)] = col[i];
        }
    }
    let xt = x.transpose();
    let mut c = DenseMatrix::zeros(r, r);
    for j in 0..r {
        let col = forward_substitute(&l, &xt.column(j));
        for i in 0..r {
            c[(i, j)] = col[i];
        }
    }
    c.symmetrize();

    let inner = symmetric_eigen(&c)?;
    let vectors = inner
        .vectors
        .iter()
        .map(|q| {
            let y = backward_substitute_transposed(&l, q);
            let mut full = vec![0.0; n];
            for (&i, v) in kept.iter().zip(y) {
                full[i] = v;
            }
            fix_sign(&mut full);
            full
        })
        .collect();
    Ok(EigenPairs {
        values: inner.values,
        vectors,
    })
}

/// The `k` smallest eigenpairs of the symmetric-definite pencil `G y = λ F y`.
pub fn solve_generalized_symmetric_eig(
    g: &DenseMatrix,
    f: &DenseMatrix,
    k: usize,
) -> Result<EigenPairs> {
    let mut pairs = generalized_symmetric_eig_all(g, f)?;
    if pairs.len() < k {
        return Err(Error::RankDeficient {
            rank: pairs.len(),
            required: k,
        });
    }
    pairs.truncate(k);
    Ok(pairs)
}

/// `(K_next^T K_next)^{-1} K_next^T K_prev`, the coefficient map of the least-squares
/// re-expression of `K_prev` in the columns of `K_next`.
pub fn pseudo_inverse_product(k_next: &DenseMatrix, k_prev: &DenseMatrix) -> Result<DenseMatrix> {
    if k_next.rows() != k_prev.rows() || k_next.cols() != k_prev.cols() {
        return Err(Error::DimensionMismatch {
            expected: k_next.rows() * k_next.cols(),
            found: k_prev.rows() * k_prev.cols(),
        });
    }
    let kt = k_next.transpose();
    let normal = kt.matmul(k_next);
    let chol = cholesky(&normal).map_err(|_| Error::RankDeficient {
        rank: 0,
        required: k_next.cols(),
    })?;
    if !chol.is_full_rank() {
        return Err(Error::RankDeficient {
            rank: chol.rank(),
            required: k_next.cols(),
        });
    }
    Ok(chol.solve_matrix(&kt.matmul(k_prev)))
}
