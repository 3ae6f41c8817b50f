//! Stationary 1/f noise with a block-circulant covariance.
//!
//! Each block of `block_length` samples has covariance `C = F^{-1} diag(lambda) F` with
//! `lambda_k = P(f_k)`, the apodized power spectrum sampled on the discrete frequency grid.
//! Weighting, simulation and the preconditioner diagonal all use these same eigenvalues.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// White-noise level per sample, µK.
    pub sigma_rms: f64,
    /// Knee frequency in Hz; zero gives white noise.
    pub f_knee: f64,
    /// Apodization frequency in Hz.
    pub f_apo: f64,
    /// Hz.
    pub sample_rate: f64,
    /// Samples per stationary block, a power of two.
    pub block_length: usize,
}

impl NoiseModel {
    pub fn white(sigma_rms: f64, block_length: usize) -> Self {
        Self {
            sigma_rms,
            f_knee: 0.0,
            f_apo: 1e-3,
            sample_rate: 1.0,
            block_length,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_rms > 0.0) || !self.sigma_rms.is_finite() {
            return Err(Error::invalid("sigma_rms", format!("must be positive, got {}", self.sigma_rms)));
        }
        if !(self.f_knee >= 0.0) || !self.f_knee.is_finite() {
            return Err(Error::invalid("f_knee", format!("must be nonnegative, got {}", self.f_knee)));
        }
        if !(self.f_apo > 0.0) {
            return Err(Error::invalid("f_apo", format!("must be positive, got {}", self.f_apo)));
        }
        if self.f_knee > 0.0 && self.f_apo >= self.f_knee {
            return Err(Error::invalid(
                "f_apo",
                format!("must be below f_knee = {}, got {}", self.f_knee, self.f_apo),
            ));
        }
        if !(self.sample_rate > 0.0) {
            return Err(Error::invalid("sample_rate", format!("must be positive, got {}", self.sample_rate)));
        }
        if self.block_length < 2 || !self.block_length.is_power_of_two() {
            return Err(Error::invalid(
                "block_length",
                format!("must be a power of two >= 2, got {}", self.block_length),
            ));
        }
        Ok(())
    }

    /// Apodized spectrum `sigma^2 (1 + f_knee / max(f, f_apo))`.
    pub fn psd(&self, f: f64) -> f64 {
        self.sigma_rms * self.sigma_rms * (1.0 + self.f_knee / f.max(self.f_apo))
    }

    /// Frequency of DFT bin `k` of a block (mirrored above Nyquist).
    pub fn bin_frequency(&self, k: usize) -> f64 {
        let l = self.block_length;
        let m = if k <= l / 2 { k } else { l - k };
        m as f64 * self.sample_rate / l as f64
    }

    /// Circulant eigenvalues of one block.
    pub fn eigenvalues(&self) -> Vec<f64> {
        (0..self.block_length)
            .map(|k| self.psd(self.bin_frequency(k)))
            .collect()
    }

    pub fn filter(&self) -> Result<NoiseFilter> {
        NoiseFilter::new(self.clone())
    }
}

/// Precomputed FFT plans and spectra for one [`NoiseModel`].
#[derive(Clone)]
pub struct NoiseFilter {
    model: NoiseModel,
    eigenvalues: Vec<f64>,
    inverse_diagonal: f64,
    forward: Arc<dyn Fft<f64>>,
    backward: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for NoiseFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NoiseFilter")
            .field("model", &self.model)
            .field("inverse_diagonal", &self.inverse_diagonal)
            .finish_non_exhaustive()
    }
}

impl NoiseFilter {
    pub fn new(model: NoiseModel) -> Result<Self> {
        model.validate()?;
        let eigenvalues = model.eigenvalues();
        if let Some(bad) = eigenvalues.iter().find(|&&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("psd", format!("nonpositive spectrum sample {bad}")));
        }
        let inverse_diagonal =
            eigenvalues.iter().map(|v| 1.0 / v).sum::<f64>() / eigenvalues.len() as f64;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(model.block_length);
        let backward = planner.plan_fft_inverse(model.block_length);
        Ok(Self {
            model,
            eigenvalues,
            inverse_diagonal,
            forward,
            backward,
        })
    }

    pub fn model(&self) -> &NoiseModel {
        &self.model
    }

    pub fn block_length(&self) -> usize {
        self.model.block_length
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// The (constant) diagonal entry of `N^{-1}`.
    pub fn inverse_diagonal(&self) -> f64 {
        self.inverse_diagonal
    }

    /// `N^{-1} x` in place.
    pub fn apply_inverse(&self, x: &mut [f64]) {
        self.apply_spectral(x, |l| 1.0 / l);
    }

    /// `N x` in place.
    pub fn apply_covariance(&self, x: &mut [f64]) {
        self.apply_spectral(x, |l| l);
    }

    /// `N^{1/2} x` in place; maps white unit-variance noise to noise of covariance `N`.
    pub fn apply_sqrt(&self, x: &mut [f64]) {
        self.apply_spectral(x, f64::sqrt);
    }

    /// Applies the circulant with eigenvalues `g(lambda_k)` to each block of `x`.
    ///
    /// The filter is real and even, so two real blocks are packed as the real and imaginary
    /// parts of one complex transform.
    fn apply_spectral(&self, x: &mut [f64], g: impl Fn(f64) -> f64) {
        let l = self.block_length();
        assert!(
            x.len() % l == 0,
            "stream length {} is not a multiple of block_length {l}",
            x.len()
        );
        let gains: Vec<f64> = self.eigenvalues.iter().map(|&v| g(v) / l as f64).collect();
        let mut buf = vec![Complex64::new(0.0, 0.0); l];
        let mut scratch =
            vec![Complex64::new(0.0, 0.0); self.forward.get_inplace_scratch_len().max(self.backward.get_inplace_scratch_len())];
        let mut blocks = x.chunks_mut(l);
        while let Some(a) = blocks.next() {
            let b = blocks.next();
            match &b {
                Some(b) => {
                    for ((z, &re), &im) in buf.iter_mut().zip(a.iter()).zip(b.iter()) {
                        *z = Complex64::new(re, im);
                    }
                }
                None => {
                    for (z, &re) in buf.iter_mut().zip(a.iter()) {
                        *z = Complex64::new(re, 0.0);
                    }
                }
            }
            self.forward.process_with_scratch(&mut buf, &mut scratch);
            for (z, &w) in buf.iter_mut().zip(&gains) {
                *z *= w;
            }
            self.backward.process_with_scratch(&mut buf, &mut scratch);
            for (dst, z) in a.iter_mut().zip(&buf) {
                *dst = z.re;
            }
            if let Some(b) = b {
                for (dst, z) in b.iter_mut().zip(&buf) {
                    *dst = z.im;
                }
            }
        }
    }
}

/// Knee frequencies log-spaced over `[lo, hi]`, one per channel.
pub fn log_spaced_knees(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
            .collect(),
    }
}
