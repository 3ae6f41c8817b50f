//! Preconditioned conjugate gradients, plain and deflated.
//!
//! The deflated solver follows the DEF1 two-level scheme: with `E = Z^T A Z`,
//! `Q = Z E^{-1} Z^T` and `P = I - A Q`, the iteration runs on the projected residual
//! `P (b - A x)` and applies the correction `x = Q b + (I - Q A) x` at exit. The A-DEF2 mode
//! instead starts from `Q b + (I - Q A) x0` and preconditions with `(I - Q A) B^{-1} + Q`.
//!
//! Matvec accounting separates the operator products charged to the iteration (one per
//! iteration), the products `A Z` charged to deflation at setup, and bookkeeping products
//! (initial residual of a nonzero guess, final true residual) reported as overhead.

use std::time::Instant;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::linalg::{axpy, dot, norm, LinearOperator, Preconditioner};
use crate::smalldense::{cholesky, Cholesky, DenseMatrix};
use crate::{Error, Result};

/// How the coarse space enters the iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeflationVariant {
    #[default]
    Def1,
    Adef2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub tol: f64,
    pub maxit: usize,
    /// Number of projected search directions kept for recycling.
    pub dim_p: usize,
    pub variant: DeflationVariant,
    /// Project computed residuals onto the complement of `span(Z)` every iteration.
    pub reorthogonalize: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            maxit: 500,
            dim_p: 100,
            variant: DeflationVariant::Def1,
            reorthogonalize: false,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::invalid("tol", format!("must be positive, got {}", self.tol)));
        }
        if self.maxit == 0 {
            return Err(Error::invalid("maxit", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    /// `b = 0`: the solution is zero and no iteration was performed.
    ZeroRhs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveLog {
    /// `||r_j|| / ||b||`; entry 0 is the initial residual, entry `j` follows iteration `j`.
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    pub matvecs_iteration: usize,
    pub matvecs_deflation: usize,
    /// Products outside the Krylov recurrence: initial residual of a nonzero guess and the
    /// final true-residual check.
    pub matvecs_overhead: usize,
    /// `||b - A x|| / ||b||` recomputed at exit.
    pub true_residual: f64,
    pub wall_time: f64,
    pub status: SolveStatus,
}

impl SolveLog {
    fn zero_rhs(matvecs_deflation: usize, wall_time: f64) -> Self {
        Self {
            residual_history: Vec::new(),
            iterations: 0,
            matvecs_iteration: 0,
            matvecs_deflation,
            matvecs_overhead: 0,
            true_residual: 0.0,
            wall_time,
            status: SolveStatus::ZeroRhs,
        }
    }

    /// Iteration plus deflation products, the cost measure reported in comparisons.
    pub fn matvecs_total(&self) -> usize {
        self.matvecs_iteration + self.matvecs_deflation
    }

    pub fn converged(&self) -> bool {
        matches!(self.status, SolveStatus::Converged | SolveStatus::ZeroRhs)
    }

    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(0.0)
    }
}

/// Projected search directions collected during a deflated solve, with their operator
/// products.
#[derive(Debug, Clone, Default)]
pub struct RecycleHarvest {
    pub directions: Vec<Vec<f64>>,
    pub a_directions: Vec<Vec<f64>>,
}

impl RecycleHarvest {
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }
}

/// Relative size below which a deflation vector counts as dependent on the ones before it.
pub const DEPENDENCE_RTOL: f64 = 1e-8;

/// Deflation vectors `Z` with cached `A Z` and the factorized coarse matrix `Z^T A Z`.
///
/// `Z` is stored orthonormalized (the same combinations are applied to `A Z`), so the coarse
/// matrix is no worse conditioned than `A` even when the input vectors are nearly dependent.
#[derive(Debug, Clone)]
pub struct DeflationSpace {
    dim: usize,
    z: Vec<Vec<f64>>,
    az: Vec<Vec<f64>>,
    coarse: Option<Cholesky>,
    /// Products `A z` spent building the space.
    charged: usize,
}

impl DeflationSpace {
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            z: Vec::new(),
            az: Vec::new(),
            coarse: None,
            charged: 0,
        }
    }

    /// Applies `a` to every vector of `z` (one matvec each) and factorizes the coarse matrix.
    pub fn new(a: &dyn LinearOperator, z: Vec<Vec<f64>>) -> Result<Self> {
        let az = z.iter().map(|v| a.apply_vec(v)).collect();
        Self::from_products(a.dim(), z, az)
    }

    /// Builds the space from precomputed products `az[i] = A z[i]`.
    pub fn from_products(dim: usize, z: Vec<Vec<f64>>, az: Vec<Vec<f64>>) -> Result<Self> {
        if z.len() != az.len() {
            return Err(Error::DimensionMismatch {
                expected: z.len(),
                found: az.len(),
            });
        }
        if let Some(bad) = z.iter().chain(&az).find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        if z.is_empty() {
            return Ok(Self::empty(dim));
        }
        let charged = z.len();
        let (z, az) = orthonormalize(z, az);
        if z.is_empty() {
            return Err(Error::CoarseSingular("deflation vectors are all zero".into()));
        }
        let mut e = DenseMatrix::symmetric_from_fn(z.len(), |i, j| {
            0.5 * (dot(&z[i], &az[j]) + dot(&z[j], &az[i]))
        });
        e.symmetrize();
        let coarse = cholesky(&e).map_err(|err| Error::CoarseSingular(err.to_string()))?;
        if coarse.rank() == 0 {
            return Err(Error::CoarseSingular("all coarse pivots vanished".into()));
        }
        if !coarse.is_full_rank() {
            debug!(
                "coarse matrix: dropped {} of {} deflation vectors",
                coarse.dropped().len(),
                z.len()
            );
        }
        Ok(Self {
            dim,
            z,
            az,
            coarse: Some(coarse),
            charged,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Independent deflation vectors kept.
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Operator products charged to deflation: one per input vector, kept or not.
    pub fn matvecs(&self) -> usize {
        self.charged
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.z
    }

    pub fn products(&self) -> &[Vec<f64>] {
        &self.az
    }

    /// Effective rank of `Z^T A Z` after pivot dropping.
    pub fn rank(&self) -> usize {
        self.coarse.as_ref().map_or(0, Cholesky::rank)
    }

    pub fn into_parts(self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        (self.z, self.az)
    }

    /// `E^{-1} (left^T v)` for `left` either `Z` or `A Z`.
    fn coarse_coefficients(&self, left: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
        let rhs: Vec<f64> = left.iter().map(|u| dot(u, v)).collect();
        self.coarse.as_ref().expect("nonempty space").solve(&rhs)
    }

    fn combine_into(vectors: &[Vec<f64>], coeffs: &[f64], out: &mut [f64], sign: f64) {
        for (v, &c) in vectors.iter().zip(coeffs) {
            if c != 0.0 {
                axpy(sign * c, v, out);
            }
        }
    }

    /// `Q v = Z E^{-1} Z^T v`.
    pub fn apply_q(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        if !self.is_empty() {
            let c = self.coarse_coefficients(&self.z, v);
            Self::combine_into(&self.z, &c, &mut out, 1.0);
        }
        out
    }

    /// `v <- (I - A Q) v`.
    pub fn project_residual(&self, v: &mut [f64]) {
        if !self.is_empty() {
            let c = self.coarse_coefficients(&self.z, v);
            Self::combine_into(&self.az, &c, v, -1.0);
        }
    }

    /// `v <- (I - Q A) v`.
    pub fn project_solution(&self, v: &mut [f64]) {
        if !self.is_empty() {
            let c = self.coarse_coefficients(&self.az, v);
            Self::combine_into(&self.z, &c, v, -1.0);
        }
    }

    /// `v <- (I - Z Z^T) v`.
    pub fn reorthogonalize(&self, v: &mut [f64]) {
        for u in &self.z {
            let c = dot(u, v);
            axpy(-c, u, v);
        }
    }
}

/// Two-pass Gram-Schmidt on `z`, carrying the products along; drops vectors whose new
/// component is below `DEPENDENCE_RTOL` of their norm.
fn orthonormalize(z: Vec<Vec<f64>>, az: Vec<Vec<f64>>) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(z.len());
    let mut aq: Vec<Vec<f64>> = Vec::with_capacity(z.len());
    for (mut v, mut av) in z.into_iter().zip(az) {
        let original = norm(&v);
        for _ in 0..2 {
            for (u, au) in q.iter().zip(&aq) {
                let c = dot(u, &v);
                axpy(-c, u, &mut v);
                axpy(-c, au, &mut av);
            }
        }
        let rest = norm(&v);
        if rest > DEPENDENCE_RTOL * original && rest > 0.0 {
            v.iter_mut().for_each(|x| *x /= rest);
            av.iter_mut().for_each(|x| *x /= rest);
            q.push(v);
            aq.push(av);
        } else {
            debug!("dropping dependent deflation vector (relative component {:.1e})", rest / original.max(f64::MIN_POSITIVE));
        }
    }
    (q, aq)
}

/// Output of a deflated solve.
#[derive(Debug, Clone)]
pub struct DeflatedSolve {
    pub solution: Vec<f64>,
    pub harvest: RecycleHarvest,
    pub log: SolveLog,
}

/// `(I - Q A) B^{-1} r + Q r`.
pub fn adef2_apply(b: &dyn Preconditioner, z: &DeflationSpace, r: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; r.len()];
    b.apply_inverse(r, &mut out);
    if !z.is_empty() {
        z.project_solution(&mut out);
        let q = z.apply_q(r);
        axpy(1.0, &q, &mut out);
    }
    out
}

/// `(I - Z Z^T) r` with the stored orthonormal `Z`.
pub fn reorthogonalize_residual(z: &DeflationSpace, r: &[f64]) -> Vec<f64> {
    let mut out = r.to_vec();
    z.reorthogonalize(&mut out);
    out
}

fn check_dims(a: &dyn LinearOperator, b: &dyn Preconditioner, rhs: &[f64], x0: &[f64]) -> Result<()> {
    for found in [b.dim(), rhs.len(), x0.len()] {
        if found != a.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                found,
            });
        }
    }
    Ok(())
}

fn true_residual(a: &dyn LinearOperator, rhs: &[f64], x: &[f64], bnorm: f64) -> f64 {
    let ax = a.apply_vec(x);
    let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, y)| b - y).collect();
    norm(&r) / bnorm
}

/// Preconditioned conjugate gradients with the relative-residual stopping rule.
pub fn pcg(
    a: &dyn LinearOperator,
    b: &dyn Preconditioner,
    rhs: &[f64],
    x0: &[f64],
    tol: f64,
    maxit: usize,
) -> Result<(Vec<f64>, SolveLog)> {
    SolverSettings {
        tol,
        maxit,
        ..SolverSettings::default()
    }
    .validate()?;
    check_dims(a, b, rhs, x0)?;
    let start = Instant::now();
    let n = a.dim();
    let bnorm = norm(rhs);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], SolveLog::zero_rhs(0, start.elapsed().as_secs_f64())));
    }

    let mut overhead = 0;
    let mut x = x0.to_vec();
    let mut r = rhs.to_vec();
    if x.iter().any(|&v| v != 0.0) {
        let ax = a.apply_vec(&x);
        axpy(-1.0, &ax, &mut r);
        overhead += 1;
    }
    let mut history = vec![norm(&r) / bnorm];
    let mut z = vec![0.0; n];
    b.apply_inverse(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut w = vec![0.0; n];
    let mut iterations = 0;
    let mut matvecs = 0;
    let mut status = SolveStatus::MaxIterations;

    while iterations < maxit {
        iterations += 1;
        if rz == 0.0 {
            history.push(0.0);
            status = SolveStatus::Converged;
            break;
        }
        a.apply(&p, &mut w);
        matvecs += 1;
        let pw = dot(&p, &w);
        if !(pw > 0.0) {
            return Err(Error::IndefiniteBreakdown {
                iteration: iterations,
                curvature: pw,
            });
        }
        let gamma = rz / pw;
        axpy(gamma, &p, &mut x);
        axpy(-gamma, &w, &mut r);
        let rel = norm(&r) / bnorm;
        history.push(rel);
        if rel < tol {
            status = SolveStatus::Converged;
            break;
        }
        b.apply_inverse(&r, &mut z);
        let rz_new = dot(&r, &z);
        let delta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + delta * *pi;
        }
    }

    let true_res = true_residual(a, rhs, &x, bnorm);
    overhead += 1;
    let log = SolveLog {
        residual_history: history,
        iterations,
        matvecs_iteration: matvecs,
        matvecs_deflation: 0,
        matvecs_overhead: overhead,
        true_residual: true_res,
        wall_time: start.elapsed().as_secs_f64(),
        status,
    };
    debug!(
        "pcg: {} iterations, residual {:.3e}, {:?}",
        log.iterations,
        log.final_residual(),
        log.status
    );
    Ok((x, log))
}

/// Deflated PCG. `z` must have been built with the operator `a`: its cached `A Z` products are
/// used as is, and `z.len()` products are charged to deflation.
pub fn deflated_pcg(
    a: &dyn LinearOperator,
    b: &dyn Preconditioner,
    rhs: &[f64],
    x0: &[f64],
    z: &DeflationSpace,
    settings: &SolverSettings,
) -> Result<DeflatedSolve> {
    settings.validate()?;
    check_dims(a, b, rhs, x0)?;
    if z.dim() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: z.dim(),
        });
    }
    match settings.variant {
        DeflationVariant::Def1 => def1(a, b, rhs, x0, z, settings),
        DeflationVariant::Adef2 => adef2(a, b, rhs, x0, z, settings),
    }
}

fn def1(
    a: &dyn LinearOperator,
    b: &dyn Preconditioner,
    rhs: &[f64],
    x0: &[f64],
    zs: &DeflationSpace,
    settings: &SolverSettings,
) -> Result<DeflatedSolve> {
    let start = Instant::now();
    let n = a.dim();
    let deflation = zs.matvecs();
    let bnorm = norm(rhs);
    if bnorm == 0.0 {
        return Ok(DeflatedSolve {
            solution: vec![0.0; n],
            harvest: RecycleHarvest::default(),
            log: SolveLog::zero_rhs(deflation, start.elapsed().as_secs_f64()),
        });
    }

    let mut overhead = 0;
    let mut x = x0.to_vec();
    let mut r = rhs.to_vec();
    if x.iter().any(|&v| v != 0.0) {
        let ax = a.apply_vec(&x);
        axpy(-1.0, &ax, &mut r);
        overhead += 1;
    }
    zs.project_residual(&mut r);
    if settings.reorthogonalize {
        zs.reorthogonalize(&mut r);
    }
    let mut history = vec![norm(&r) / bnorm];
    let mut z = vec![0.0; n];
    b.apply_inverse(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut w = vec![0.0; n];
    let mut harvest = RecycleHarvest::default();
    let mut iterations = 0;
    let mut matvecs = 0;
    let mut status = SolveStatus::MaxIterations;

    while iterations < settings.maxit {
        iterations += 1;
        if rz == 0.0 {
            history.push(0.0);
            status = SolveStatus::Converged;
            break;
        }
        a.apply(&p, &mut w);
        matvecs += 1;
        zs.project_residual(&mut w);
        let pw = dot(&p, &w);
        if !(pw > 0.0) {
            return Err(Error::IndefiniteBreakdown {
                iteration: iterations,
                curvature: pw,
            });
        }
        if harvest.len() < settings.dim_p {
            let mut d = p.clone();
            zs.project_solution(&mut d);
            harvest.directions.push(d);
            harvest.a_directions.push(w.clone());
        }
        let gamma = rz / pw;
        axpy(gamma, &p, &mut x);
        axpy(-gamma, &w, &mut r);
        if settings.reorthogonalize {
            zs.reorthogonalize(&mut r);
        }
        let rel = norm(&r) / bnorm;
        history.push(rel);
        if rel < settings.tol {
            status = SolveStatus::Converged;
            break;
        }
        b.apply_inverse(&r, &mut z);
        let rz_new = dot(&r, &z);
        let delta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + delta * *pi;
        }
    }

    zs.project_solution(&mut x);
    let qb = zs.apply_q(rhs);
    axpy(1.0, &qb, &mut x);

    let true_res = true_residual(a, rhs, &x, bnorm);
    overhead += 1;
    let log = SolveLog {
        residual_history: history,
        iterations,
        matvecs_iteration: matvecs,
        matvecs_deflation: deflation,
        matvecs_overhead: overhead,
        true_residual: true_res,
        wall_time: start.elapsed().as_secs_f64(),
        status,
    };
    debug!(
        "def1 (|Z| = {}): {} iterations, residual {:.3e}, {:?}",
        deflation,
        log.iterations,
        log.final_residual(),
        log.status
    );
    Ok(DeflatedSolve {
        solution: x,
        harvest,
        log,
    })
}

fn adef2(
    a: &dyn LinearOperator,
    b: &dyn Preconditioner,
    rhs: &[f64],
    x0: &[f64],
    zs: &DeflationSpace,
    settings: &SolverSettings,
) -> Result<DeflatedSolve> {
    let start = Instant::now();
    let n = a.dim();
    let deflation = zs.matvecs();
    let bnorm = norm(rhs);
    if bnorm == 0.0 {
        return Ok(DeflatedSolve {
            solution: vec![0.0; n],
            harvest: RecycleHarvest::default(),
            log: SolveLog::zero_rhs(deflation, start.elapsed().as_secs_f64()),
        });
    }

    // x = Q b + (I - Q A) x0, and A x = A Q b + (I - A Q) A x0 uses only cached products.
    let mut overhead = 0;
    let mut x = x0.to_vec();
    let mut ax = vec![0.0; n];
    if x.iter().any(|&v| v != 0.0) {
        a.apply(&x, &mut ax);
        overhead += 1;
    }
    if !zs.is_empty() {
        zs.project_solution(&mut x);
        zs.project_residual(&mut ax);
        let coeffs = zs.coarse_coefficients(zs.vectors(), rhs);
        DeflationSpace::combine_into(zs.vectors(), &coeffs, &mut x, 1.0);
        DeflationSpace::combine_into(zs.products(), &coeffs, &mut ax, 1.0);
    }
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, y)| b - y).collect();
    if settings.reorthogonalize {
        zs.reorthogonalize(&mut r);
    }
    let mut history = vec![norm(&r) / bnorm];
    let mut z = adef2_apply(b, zs, &r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut w = vec![0.0; n];
    let mut harvest = RecycleHarvest::default();
    let mut iterations = 0;
    let mut matvecs = 0;
    let mut status = SolveStatus::MaxIterations;

    while iterations < settings.maxit {
        iterations += 1;
        if rz == 0.0 {
            history.push(0.0);
            status = SolveStatus::Converged;
            break;
        }
        a.apply(&p, &mut w);
        matvecs += 1;
        let pw = dot(&p, &w);
        if !(pw > 0.0) {
            return Err(Error::IndefiniteBreakdown {
                iteration: iterations,
                curvature: pw,
            });
        }
        if harvest.len() < settings.dim_p {
            harvest.directions.push(p.clone());
            harvest.a_directions.push(w.clone());
        }
        let gamma = rz / pw;
        axpy(gamma, &p, &mut x);
        axpy(-gamma, &w, &mut r);
        if settings.reorthogonalize {
            zs.reorthogonalize(&mut r);
        }
        let rel = norm(&r) / bnorm;
        history.push(rel);
        if rel < settings.tol {
            status = SolveStatus::Converged;
            break;
        }
        z = adef2_apply(b, zs, &r);
        let rz_new = dot(&r, &z);
        let delta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + delta * *pi;
        }
    }

    let true_res = true_residual(a, rhs, &x, bnorm);
    overhead += 1;
    let log = SolveLog {
        residual_history: history,
        iterations,
        matvecs_iteration: matvecs,
        matvecs_deflation: deflation,
        matvecs_overhead: overhead,
        true_residual: true_res,
        wall_time: start.elapsed().as_secs_f64(),
        status,
    };
    debug!(
        "a-def2 (|Z| = {}): {} iterations, residual {:.3e}, {:?}",
        deflation,
        log.iterations,
        log.final_residual(),
        log.status
    );
    Ok(DeflatedSolve {
        solution: x,
        harvest,
        log,
    })
}
