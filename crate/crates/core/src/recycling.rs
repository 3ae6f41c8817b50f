//! Deflation spaces built from previous solves.
//!
//! A [`RecyclePool`] gathers the previous deflation vectors and the search directions
//! harvested by the last deflated solve, together with their products by the previous
//! operator `A` and preconditioner `B`. Projection onto the pool then yields approximate
//! eigenvectors of `B^{-1} A` belonging to its smallest eigenvalues.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::linalg::{axpy, dot, norm, LinearOperator, Preconditioner};
use crate::operators::{apply_rotation, SystemCore, BLOCK};
use crate::smalldense::{generalized_symmetric_eig_all, DenseMatrix, EigenPairs};
use crate::solvers::{DeflationSpace, RecycleHarvest};
use crate::{Error, Result};

/// Relative size below which a rotated vector is considered already contained in the space.
pub const ROTATION_DEPENDENCE_TOL: f64 = 1e-8;

/// Which projection builds the next deflation space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecycleMethod {
    #[default]
    Off,
    Ritz,
    Harmonic,
}

/// `U = [Z, Z~]` with cached `A U` and `B U` from the operator that produced them.
#[derive(Debug, Clone, Default)]
pub struct RecyclePool {
    u: Vec<Vec<f64>>,
    au: Vec<Vec<f64>>,
    bu: Vec<Vec<f64>>,
}

impl RecyclePool {
    pub fn new(
        u: Vec<Vec<f64>>,
        au: Vec<Vec<f64>>,
        b: &dyn Preconditioner,
    ) -> Result<Self> {
        if u.len() != au.len() {
            return Err(Error::DimensionMismatch {
                expected: u.len(),
                found: au.len(),
            });
        }
        let bu = u
            .iter()
            .map(|v| {
                let mut out = vec![0.0; v.len()];
                b.apply_forward(v, &mut out);
                out
            })
            .collect();
        Ok(Self { u, au, bu })
    }

    /// Pool of the deflation space used in a solve followed by the directions it harvested.
    pub fn from_solve(
        z: &DeflationSpace,
        harvest: RecycleHarvest,
        b: &dyn Preconditioner,
    ) -> Result<Self> {
        let mut u = z.vectors().to_vec();
        let mut au = z.products().to_vec();
        u.extend(harvest.directions);
        au.extend(harvest.a_directions);
        Self::new(u, au, b)
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.u
    }

    fn combine(vectors: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; vectors[0].len()];
        for (v, &c) in vectors.iter().zip(y) {
            if c != 0.0 {
                axpy(c, v, &mut out);
            }
        }
        out
    }

    fn select(&self, pairs: EigenPairs, k: usize, label: &str) -> Result<RecycledSpace> {
        let mut pairs = pairs;
        if pairs.len() < k {
            warn!(
                "{label}: effective pool rank {} below requested k = {k}",
                pairs.len()
            );
        }
        pairs.truncate(k);
        let vectors: Vec<Vec<f64>> = pairs.vectors.iter().map(|y| Self::combine(&self.u, y)).collect();
        let products: Vec<Vec<f64>> = pairs.vectors.iter().map(|y| Self::combine(&self.au, y)).collect();
        Ok(RecycledSpace {
            values: pairs.values,
            vectors,
            products,
        })
    }
}

/// Approximate eigenpairs of `B^{-1} A` extracted from a pool. `products` are the `A`
/// products under the operator that filled the pool.
#[derive(Debug, Clone)]
pub struct RecycledSpace {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub products: Vec<Vec<f64>>,
}

impl RecycledSpace {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Deflation space for the operator the pool came from, reusing its cached products.
    pub fn into_deflation_space(self, dim: usize) -> Result<DeflationSpace> {
        DeflationSpace::from_products(dim, self.vectors, self.products)
    }
}

fn check_pool(pool: &RecyclePool, k: usize) -> Result<()> {
    if pool.is_empty() {
        return Err(Error::RankDeficient { rank: 0, required: k });
    }
    Ok(())
}

/// Ritz projection: `G Y = F Y diag(lambda)` with `F = U^T B U`, `G = U^T A U`; keeps the `k`
/// smallest values. Fewer than `k` pairs are returned when the pool is numerically rank
/// deficient.
pub fn ritz_recycle(pool: &RecyclePool, k: usize) -> Result<RecycledSpace> {
    check_pool(pool, k)?;
    let m = pool.len();
    let f = DenseMatrix::symmetric_from_fn(m, |i, j| {
        0.5 * (dot(&pool.u[i], &pool.bu[j]) + dot(&pool.u[j], &pool.bu[i]))
    });
    let g = DenseMatrix::symmetric_from_fn(m, |i, j| {
        0.5 * (dot(&pool.u[i], &pool.au[j]) + dot(&pool.u[j], &pool.au[i]))
    });
    let pairs = generalized_symmetric_eig_all(&g, &f)?;
    pool.select(pairs, k, "ritz")
}

/// Harmonic Ritz projection: `(A U)^T B^{-1} (A U) w = theta (U^T A U) w`; keeps the `k`
/// smallest `theta`.
pub fn harmonic_ritz_recycle(
    pool: &RecyclePool,
    b: &dyn Preconditioner,
    k: usize,
) -> Result<RecycledSpace> {
    check_pool(pool, k)?;
    let m = pool.len();
    let binv_au: Vec<Vec<f64>> = pool
        .au
        .iter()
        .map(|v| {
            let mut out = vec![0.0; v.len()];
            b.apply_inverse(v, &mut out);
            out
        })
        .collect();
    let left = DenseMatrix::symmetric_from_fn(m, |i, j| {
        0.5 * (dot(&pool.au[i], &binv_au[j]) + dot(&pool.au[j], &binv_au[i]))
    });
    let right = DenseMatrix::symmetric_from_fn(m, |i, j| {
        0.5 * (dot(&pool.u[i], &pool.au[j]) + dot(&pool.u[j], &pool.au[i]))
    });
    let pairs = generalized_symmetric_eig_all(&left, &right)?;
    pool.select(pairs, k, "harmonic ritz")
}

/// Appends the spin-2 rotation of every vector whose rotated copy is not already in the
/// span of the current set. Input vectors are kept unchanged and in order.
pub fn augment_with_rotation(z: &[Vec<f64>], npix: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(2 * z.len());
    for v in z {
        if let Some(q) = orthonormal_residual(&basis, v) {
            basis.push(q);
        }
    }
    let mut out = z.to_vec();
    for v in z {
        let rv = apply_rotation(v, npix);
        let nv = norm(v);
        if let Some((q, rest)) = orthonormal_residual_with_norm(&basis, &rv) {
            if rest > ROTATION_DEPENDENCE_TOL * nv {
                basis.push(q);
                out.push(rv);
            }
        }
    }
    out
}

/// Component of `v` orthogonal to an orthonormal `basis` (two Gram-Schmidt passes), with its
/// norm before normalization.
fn orthonormal_residual_with_norm(basis: &[Vec<f64>], v: &[f64]) -> Option<(Vec<f64>, f64)> {
    let mut r = v.to_vec();
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, &r);
            axpy(-c, q, &mut r);
        }
    }
    let nr = norm(&r);
    if nr == 0.0 || !nr.is_finite() {
        return None;
    }
    r.iter_mut().for_each(|x| *x /= nr);
    Some((r, nr))
}

fn orthonormal_residual(basis: &[Vec<f64>], v: &[f64]) -> Option<Vec<f64>> {
    let nv = norm(v);
    orthonormal_residual_with_norm(basis, v)
        .filter(|(_, n)| *n > ROTATION_DEPENDENCE_TOL * nv)
        .map(|(q, _)| q)
}

/// Generalized eigenpairs of the map-making pencil `(P^T N^{-1} P, P^T diag(N^{-1}) P)` of
/// channel `f`, from dense assembly. Intended for small patches.
pub fn map_making_eigenpairs(core: &SystemCore, f: usize) -> Result<EigenPairs> {
    let n = 2 * core.npix();
    let a = core.map_making(f);
    let b = core.map_making_preconditioner(f)?;
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    let mut ad = DenseMatrix::zeros(n, n);
    let mut bd = DenseMatrix::zeros(n, n);
    for j in 0..n {
        e[j] = 1.0;
        a.apply(&e, &mut col);
        for i in 0..n {
            ad[(i, j)] = col[i];
        }
        b.apply_forward(&e, &mut col);
        for i in 0..n {
            bd[(i, j)] = col[i];
        }
        e[j] = 0.0;
    }
    ad.symmetrize();
    bd.symmetrize();
    generalized_symmetric_eig_all(&ad, &bd)
}

/// Checks that every channel shares the scan and the noise shape (noise levels may differ),
/// the setting in which the system spectrum factorizes into map-making triplets.
pub fn check_shared_observation(core: &SystemCore) -> Result<()> {
    let scan0 = &core.scans()[0];
    let noise0 = core.filters()[0].model();
    for (scan, filter) in core.scans().iter().zip(core.filters()).skip(1) {
        if scan != scan0 {
            return Err(Error::InvalidConfiguration(
                "channels observe with different scans".into(),
            ));
        }
        let m = filter.model();
        if m.f_knee != noise0.f_knee
            || m.f_apo != noise0.f_apo
            || m.sample_rate != noise0.sample_rate
            || m.block_length != noise0.block_length
        {
            return Err(Error::InvalidConfiguration(
                "channels have different noise spectra".into(),
            ));
        }
    }
    Ok(())
}

/// Lifts each map-making eigenpair `(lambda, v)` to the three system eigenvectors
/// `[v, 0, 0]`, `[0, v, 0]`, `[0, 0, v]` (component-wise layout), all with eigenvalue `lambda`.
pub fn construct_multiplicity_triplets(
    core: &SystemCore,
    map_eigpairs: &EigenPairs,
) -> Result<EigenPairs> {
    check_shared_observation(core)?;
    let npix = core.npix();
    let mut values = Vec::with_capacity(3 * map_eigpairs.len());
    let mut vectors = Vec::with_capacity(3 * map_eigpairs.len());
    for (&lambda, v) in map_eigpairs.values.iter().zip(&map_eigpairs.vectors) {
        if v.len() != 2 * npix {
            return Err(Error::DimensionMismatch {
                expected: 2 * npix,
                found: v.len(),
            });
        }
        for c in 0..BLOCK / 2 {
            let mut x = vec![0.0; BLOCK * npix];
            x[2 * c * npix..(2 * c + 2) * npix].copy_from_slice(v);
            values.push(lambda);
            vectors.push(x);
        }
    }
    Ok(EigenPairs { values, vectors })
}
