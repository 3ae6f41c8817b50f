//! The component-separation system `A = M^T P^T N^{-1} P M`, its right-hand side and the
//! block-diagonal preconditioner `B = M^T P^T diag(N^{-1}) P M`.
//!
//! Component vectors are stored component-wise: entry `(2c + s) * npix + p` holds Stokes
//! parameter `s` (0 = Q, 1 = U) of component `c` at pixel `p`. Frequency maps are `[Q; U]`.

use std::sync::atomic::{AtomicUsize, Ordering};

use super::mixing::{MixingCoefficients, BLOCK, N_COMPONENTS};
use super::noise::{NoiseFilter, NoiseModel};
use super::pointing::ScanPattern;
use crate::linalg::{LinearOperator, Preconditioner};
use crate::smalldense::{cholesky, DenseMatrix};
use crate::{Error, Result};

/// The β-independent part of the system: scans, noise filters, weighted hit matrices and the
/// cached `P_f^T N_f^{-1} d_f`.
#[derive(Debug, Clone)]
pub struct SystemCore {
    scans: Vec<ScanPattern>,
    filters: Vec<NoiseFilter>,
    hits: Vec<Vec<[f64; 3]>>,
    rhs_core: Option<Vec<Vec<f64>>>,
    npix: usize,
}

impl SystemCore {
    pub fn new(scans: Vec<ScanPattern>, noise: Vec<NoiseModel>) -> Result<Self> {
        if scans.is_empty() {
            return Err(Error::InvalidConfiguration("no frequency channels".into()));
        }
        if scans.len() != noise.len() {
            return Err(Error::DimensionMismatch {
                expected: scans.len(),
                found: noise.len(),
            });
        }
        let npix = scans[0].npix();
        let mut filters = Vec::with_capacity(noise.len());
        for (scan, model) in scans.iter().zip(noise) {
            if scan.npix() != npix {
                return Err(Error::InvalidConfiguration(
                    "all channels must observe the same patch".into(),
                ));
            }
            let filter = model.filter()?;
            if scan.n_samples() % filter.block_length() != 0 {
                return Err(Error::invalid(
                    "block_length",
                    format!(
                        "{} samples are not a multiple of block_length {}",
                        scan.n_samples(),
                        filter.block_length()
                    ),
                ));
            }
            filters.push(filter);
        }
        let hits = scans
            .iter()
            .zip(&filters)
            .map(|(scan, filter)| {
                let w = filter.inverse_diagonal();
                scan.hit_matrices()
                    .into_iter()
                    .map(|h| [w * h[0], w * h[1], w * h[2]])
                    .collect()
            })
            .collect();
        Ok(Self {
            scans,
            filters,
            hits,
            rhs_core: None,
            npix,
        })
    }

    /// Caches `P_f^T N_f^{-1} d_f` for every channel.
    pub fn with_data(mut self, data: &[Vec<f64>]) -> Result<Self> {
        self.rhs_core = Some(self.rhs_core_of(data)?);
        Ok(self)
    }

    /// `P_f^T N_f^{-1} d_f` per channel, without caching.
    pub fn rhs_core_of(&self, data: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if data.len() != self.n_freq() {
            return Err(Error::DimensionMismatch {
                expected: self.n_freq(),
                found: data.len(),
            });
        }
        let mut out = Vec::with_capacity(data.len());
        for (f, d) in data.iter().enumerate() {
            if d.len() != self.scans[f].n_samples() {
                return Err(Error::DimensionMismatch {
                    expected: self.scans[f].n_samples(),
                    found: d.len(),
                });
            }
            let mut t = d.clone();
            self.filters[f].apply_inverse(&mut t);
            let mut m = vec![0.0; 2 * self.npix];
            self.scans[f].apply_pointing_transpose(&t, &mut m);
            out.push(m);
        }
        Ok(out)
    }

    pub fn n_freq(&self) -> usize {
        self.scans.len()
    }

    pub fn npix(&self) -> usize {
        self.npix
    }

    /// Length of a component vector, `6 npix`.
    pub fn dim(&self) -> usize {
        BLOCK * self.npix
    }

    pub fn scans(&self) -> &[ScanPattern] {
        &self.scans
    }

    pub fn filters(&self) -> &[NoiseFilter] {
        &self.filters
    }

    pub fn cached_rhs_core(&self) -> Option<&[Vec<f64>]> {
        self.rhs_core.as_deref()
    }

    /// `out = P_f^T N_f^{-1} P_f m` for a frequency map `m = [Q; U]`.
    pub fn map_making_apply(&self, f: usize, m: &[f64], out: &mut [f64]) {
        let mut t = vec![0.0; self.scans[f].n_samples()];
        self.scans[f].apply_pointing(m, &mut t);
        self.filters[f].apply_inverse(&mut t);
        self.scans[f].apply_pointing_transpose(&t, out);
    }

    /// The operator for spectral parameters `mixing`.
    pub fn operator(&self, mixing: MixingCoefficients) -> Result<SystemOperator<'_>> {
        if mixing.n_freq() != self.n_freq() {
            return Err(Error::DimensionMismatch {
                expected: self.n_freq(),
                found: mixing.n_freq(),
            });
        }
        Ok(SystemOperator {
            core: self,
            mixing,
            matvecs: AtomicUsize::new(0),
        })
    }

    /// Map-making operator `P_f^T N_f^{-1} P_f` of one channel.
    pub fn map_making(&self, f: usize) -> MapMakingOperator<'_> {
        assert!(f < self.n_freq());
        MapMakingOperator { core: self, f }
    }

    /// Map-making preconditioner `P_f^T diag(N_f^{-1}) P_f` of one channel (2x2 blocks).
    pub fn map_making_preconditioner(&self, f: usize) -> Result<BlockDiagPreconditioner> {
        let hits = &self.hits[f];
        BlockDiagPreconditioner::from_fn(2, self.npix, |p, i, j| match (i, j) {
            (0, 0) => hits[p][0],
            (1, 1) => hits[p][2],
            _ => hits[p][1],
        })
    }
}

/// Matrix-free `A = M^T (sum_f P_f^T N_f^{-1} P_f) M` for one set of spectral parameters.
#[derive(Debug)]
pub struct SystemOperator<'a> {
    core: &'a SystemCore,
    mixing: MixingCoefficients,
    matvecs: AtomicUsize,
}

impl<'a> SystemOperator<'a> {
    pub fn core(&self) -> &'a SystemCore {
        self.core
    }

    pub fn mixing(&self) -> &MixingCoefficients {
        &self.mixing
    }

    pub fn npix(&self) -> usize {
        self.core.npix
    }

    /// Number of applications so far.
    pub fn matvecs(&self) -> usize {
        self.matvecs.load(Ordering::Relaxed)
    }

    pub fn reset_matvecs(&self) {
        self.matvecs.store(0, Ordering::Relaxed);
    }

    /// Frequency map `K_f s`.
    pub fn mix(&self, f: usize, s: &[f64], m: &mut [f64]) {
        let npix = self.npix();
        let a = &self.mixing.alpha[f];
        for st in 0..2 {
            let dst = &mut m[st * npix..(st + 1) * npix];
            dst.fill(0.0);
            for (c, &ac) in a.iter().enumerate() {
                let src = &s[(2 * c + st) * npix..(2 * c + st + 1) * npix];
                for (d, v) in dst.iter_mut().zip(src) {
                    *d += ac * v;
                }
            }
        }
    }

    /// `s += K_f^T m`.
    pub fn mix_transpose_add(&self, f: usize, m: &[f64], s: &mut [f64]) {
        let npix = self.npix();
        let a = &self.mixing.alpha[f];
        for st in 0..2 {
            let src = &m[st * npix..(st + 1) * npix];
            for (c, &ac) in a.iter().enumerate() {
                let dst = &mut s[(2 * c + st) * npix..(2 * c + st + 1) * npix];
                for (d, v) in dst.iter_mut().zip(src) {
                    *d += ac * v;
                }
            }
        }
    }

    /// `b = M^T (P^T N^{-1} d)` from the cached β-independent part.
    pub fn rhs(&self) -> Result<Vec<f64>> {
        let core = self
            .core
            .rhs_core
            .as_ref()
            .ok_or_else(|| Error::InvalidConfiguration("no data attached to the system".into()))?;
        Ok(self.rhs_from_core(core))
    }

    /// `b = M^T P^T N^{-1} d` for explicit data.
    pub fn build_rhs(&self, data: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(self.rhs_from_core(&self.core.rhs_core_of(data)?))
    }

    fn rhs_from_core(&self, core: &[Vec<f64>]) -> Vec<f64> {
        let mut b = vec![0.0; self.core.dim()];
        for (f, m) in core.iter().enumerate() {
            self.mix_transpose_add(f, m, &mut b);
        }
        b
    }

    /// Block-diagonal preconditioner for these spectral parameters.
    pub fn assemble_preconditioner(&self) -> Result<BlockDiagPreconditioner> {
        let alpha = &self.mixing.alpha;
        let hits = &self.core.hits;
        BlockDiagPreconditioner::from_fn(BLOCK, self.npix(), |p, i, j| {
            let (ci, si) = (i / 2, i % 2);
            let (cj, sj) = (j / 2, j % 2);
            let slot = match (si, sj) {
                (0, 0) => 0,
                (1, 1) => 2,
                _ => 1,
            };
            (0..alpha.len())
                .map(|f| alpha[f][ci] * alpha[f][cj] * hits[f][p][slot])
                .sum()
        })
    }
}

impl LinearOperator for SystemOperator<'_> {
    fn dim(&self) -> usize {
        self.core.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim());
        assert_eq!(y.len(), self.dim());
        self.matvecs.fetch_add(1, Ordering::Relaxed);
        let npix = self.npix();
        let mut m = vec![0.0; 2 * npix];
        let mut mm = vec![0.0; 2 * npix];
        y.fill(0.0);
        for f in 0..self.core.n_freq() {
            self.mix(f, x, &mut m);
            self.core.map_making_apply(f, &m, &mut mm);
            self.mix_transpose_add(f, &mm, y);
        }
    }
}

/// `P_f^T N_f^{-1} P_f` acting on frequency maps `[Q; U]`.
#[derive(Debug, Clone, Copy)]
pub struct MapMakingOperator<'a> {
    core: &'a SystemCore,
    f: usize,
}

impl LinearOperator for MapMakingOperator<'_> {
    fn dim(&self) -> usize {
        2 * self.core.npix
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.core.map_making_apply(self.f, x, y);
    }
}

/// Per-pixel dense blocks of size `b`, entry `(i, j)` of pixel `p` coupling vector indices
/// `i * npix + p` and `j * npix + p`.
#[derive(Debug, Clone)]
pub struct BlockDiagPreconditioner {
    block: usize,
    npix: usize,
    blocks: Vec<f64>,
    factors: Vec<f64>,
}

impl BlockDiagPreconditioner {
    pub fn from_fn(
        block: usize,
        npix: usize,
        mut entry: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let bb = block * block;
        let mut blocks = vec![0.0; npix * bb];
        let mut factors = vec![0.0; npix * bb];
        for p in 0..npix {
            let m = DenseMatrix::symmetric_from_fn(block, |i, j| entry(p, i, j));
            let chol = cholesky(&m).map_err(|_| Error::SingularBlock { pixel: p })?;
            if !chol.is_full_rank() {
                return Err(Error::SingularBlock { pixel: p });
            }
            blocks[p * bb..(p + 1) * bb].copy_from_slice(m.as_slice());
            factors[p * bb..(p + 1) * bb].copy_from_slice(chol.l().as_slice());
        }
        Ok(Self {
            block,
            npix,
            blocks,
            factors,
        })
    }

    pub fn identity(block: usize, npix: usize) -> Self {
        Self::from_fn(block, npix, |_, i, j| if i == j { 1.0 } else { 0.0 })
            .expect("identity blocks are positive definite")
    }

    pub fn block_size(&self) -> usize {
        self.block
    }

    pub fn npix(&self) -> usize {
        self.npix
    }

    /// Dense block of pixel `p`.
    pub fn block(&self, p: usize) -> DenseMatrix {
        let bb = self.block * self.block;
        DenseMatrix::from_row_major(self.block, self.block, self.blocks[p * bb..(p + 1) * bb].to_vec())
            .expect("block storage is consistent")
    }
}

impl Preconditioner for BlockDiagPreconditioner {
    fn dim(&self) -> usize {
        self.block * self.npix
    }

    fn apply_inverse(&self, r: &[f64], z: &mut [f64]) {
        let (b, npix) = (self.block, self.npix);
        assert_eq!(r.len(), b * npix);
        let mut v = [0.0; 16];
        assert!(b <= 16);
        for p in 0..npix {
            let l = &self.factors[p * b * b..(p + 1) * b * b];
            for i in 0..b {
                let mut s = r[i * npix + p];
                for k in 0..i {
                    s -= l[i * b + k] * v[k];
                }
                v[i] = s / l[i * b + i];
            }
            for i in (0..b).rev() {
                let mut s = v[i];
                for k in i + 1..b {
                    s -= l[k * b + i] * v[k];
                }
                v[i] = s / l[i * b + i];
            }
            for i in 0..b {
                z[i * npix + p] = v[i];
            }
        }
    }

    fn apply_forward(&self, x: &[f64], y: &mut [f64]) {
        let (b, npix) = (self.block, self.npix);
        assert_eq!(x.len(), b * npix);
        for p in 0..npix {
            let m = &self.blocks[p * b * b..(p + 1) * b * b];
            for i in 0..b {
                y[i * npix + p] = (0..b).map(|j| m[i * b + j] * x[j * npix + p]).sum();
            }
        }
    }
}

/// Spin-2 rotation by pi/4: `(Q, U) -> (U, -Q)` per pixel, for any vector made of
/// consecutive `[Q; U]` pairs of length `npix` (component vectors or frequency maps).
pub fn apply_rotation(v: &[f64], npix: usize) -> Vec<f64> {
    assert_eq!(v.len() % (2 * npix), 0, "input is not a stack of Q/U pairs");
    let mut out = vec![0.0; v.len()];
    for (src, dst) in v.chunks(2 * npix).zip(out.chunks_mut(2 * npix)) {
        let (q, u) = src.split_at(npix);
        let (dq, du) = dst.split_at_mut(npix);
        dq.copy_from_slice(u);
        for (d, x) in du.iter_mut().zip(q) {
            *d = -x;
        }
    }
    out
}

/// Index of Stokes `s` of component `c` at pixel `p`.
#[inline]
pub fn component_index(c: usize, s: usize, p: usize, npix: usize) -> usize {
    debug_assert!(c < N_COMPONENTS && s < 2);
    (2 * c + s) * npix + p
}
