//! Raster scan patterns and the polarized pointing operator.

use std::f64::consts::FRAC_PI_4;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Number of scan subsets; subset `i` observes at polarizer angle `i * pi / 4`.
pub const N_SUBSETS: usize = 4;

/// How sweeps are arranged inside the four subsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanLayout {
    /// Subsets 1 and 3 sweep rows, subsets 2 and 4 sweep columns.
    #[default]
    Alternating,
    /// Every subset alternates row and column sweeps, so all four angles share one sampling
    /// pattern. The map-making operator then commutes with the spin-2 rotation.
    CrossLinked,
}

/// Per-sample pixel ids and polarizer angles of one frequency channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanPattern {
    rows: usize,
    cols: usize,
    sweeps_per_subset: usize,
    layout: ScanLayout,
    pixel_index: Vec<u32>,
    polarizer_angle: Vec<f64>,
    cos2: Vec<f64>,
    sin2: Vec<f64>,
    subset_boundaries: [usize; N_SUBSETS + 1],
}

fn snap(v: f64) -> f64 {
    if v.abs() < 1e-15 {
        0.0
    } else {
        v
    }
}

impl ScanPattern {
    /// Full-coverage raster: every sweep visits each pixel exactly once.
    pub fn raster(
        rows: usize,
        cols: usize,
        sweeps_per_subset: usize,
        layout: ScanLayout,
    ) -> Result<Self> {
        if rows < 2 {
            return Err(Error::invalid("patch_rows", format!("must be at least 2, got {rows}")));
        }
        if cols < 2 {
            return Err(Error::invalid("patch_cols", format!("must be at least 2, got {cols}")));
        }
        if sweeps_per_subset == 0 {
            return Err(Error::invalid("sweeps_per_subset", "must be at least 1"));
        }
        let npix = rows * cols;
        if npix > u32::MAX as usize {
            return Err(Error::invalid("patch_rows", "patch too large"));
        }
        let n = N_SUBSETS * sweeps_per_subset * npix;
        let mut pixel_index = Vec::with_capacity(n);
        let mut polarizer_angle = Vec::with_capacity(n);
        let mut subset_boundaries = [0; N_SUBSETS + 1];
        for subset in 0..N_SUBSETS {
            let phi = subset as f64 * FRAC_PI_4;
            for sweep in 0..sweeps_per_subset {
                let horizontal = match layout {
                    ScanLayout::Alternating => subset % 2 == 0,
                    ScanLayout::CrossLinked => sweep % 2 == 0,
                };
                if horizontal {
                    for r in 0..rows {
                        for c in 0..cols {
                            pixel_index.push((r * cols + c) as u32);
                        }
                    }
                } else {
                    for c in 0..cols {
                        for r in 0..rows {
                            pixel_index.push((r * cols + c) as u32);
                        }
                    }
                }
                polarizer_angle.resize(pixel_index.len(), phi);
            }
            subset_boundaries[subset + 1] = pixel_index.len();
        }
        let cos2 = polarizer_angle.iter().map(|p| snap((2.0 * p).cos())).collect();
        let sin2 = polarizer_angle.iter().map(|p| snap((2.0 * p).sin())).collect();
        Ok(Self {
            rows,
            cols,
            sweeps_per_subset,
            layout,
            pixel_index,
            polarizer_angle,
            cos2,
            sin2,
            subset_boundaries,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn npix(&self) -> usize {
        self.rows * self.cols
    }

    pub fn n_samples(&self) -> usize {
        self.pixel_index.len()
    }

    pub fn sweeps_per_subset(&self) -> usize {
        self.sweeps_per_subset
    }

    pub fn layout(&self) -> ScanLayout {
        self.layout
    }

    pub fn pixel_index(&self) -> &[u32] {
        &self.pixel_index
    }

    pub fn polarizer_angle(&self) -> &[f64] {
        &self.polarizer_angle
    }

    pub fn subset_boundaries(&self) -> &[usize; N_SUBSETS + 1] {
        &self.subset_boundaries
    }

    /// Samples per subset.
    pub fn subset_len(&self) -> usize {
        self.sweeps_per_subset * self.npix()
    }

    /// Pointing weights `(cos 2phi_t, sin 2phi_t)` of sample `t`.
    #[inline]
    pub fn weights(&self, t: usize) -> (f64, f64) {
        (self.cos2[t], self.sin2[t])
    }

    /// `out[t] = Q[p(t)] cos 2phi_t + U[p(t)] sin 2phi_t` for a map laid out as `[Q; U]`.
    pub fn apply_pointing(&self, map_qu: &[f64], out: &mut [f64]) {
        let npix = self.npix();
        assert_eq!(map_qu.len(), 2 * npix, "map size does not match patch");
        assert_eq!(out.len(), self.n_samples(), "stream length does not match scan");
        let (q, u) = map_qu.split_at(npix);
        for (t, o) in out.iter_mut().enumerate() {
            let p = self.pixel_index[t] as usize;
            *o = q[p] * self.cos2[t] + u[p] * self.sin2[t];
        }
    }

    /// Adjoint of [`apply_pointing`](Self::apply_pointing); `out` is overwritten.
    pub fn apply_pointing_transpose(&self, stream: &[f64], out: &mut [f64]) {
        let npix = self.npix();
        assert_eq!(out.len(), 2 * npix, "map size does not match patch");
        assert_eq!(stream.len(), self.n_samples(), "stream length does not match scan");
        out.fill(0.0);
        let (q, u) = out.split_at_mut(npix);
        for (t, &v) in stream.iter().enumerate() {
            let p = self.pixel_index[t] as usize;
            q[p] += v * self.cos2[t];
            u[p] += v * self.sin2[t];
        }
    }

    /// Per-pixel sums `[sum cos^2, sum cos sin, sum sin^2]` over all samples.
    pub fn hit_matrices(&self) -> Vec<[f64; 3]> {
        let mut h = vec![[0.0; 3]; self.npix()];
        for t in 0..self.n_samples() {
            let p = self.pixel_index[t] as usize;
            let (c, s) = self.weights(t);
            h[p][0] += c * c;
            h[p][1] += c * s;
            h[p][2] += s * s;
        }
        h
    }

    /// Number of samples per pixel.
    pub fn hit_counts(&self) -> Vec<usize> {
        let mut h = vec![0; self.npix()];
        for &p in &self.pixel_index {
            h[p as usize] += 1;
        }
        h
    }
}
