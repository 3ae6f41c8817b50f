//! Spectral scaling of the sky components and the Kronecker factor of the mixing matrix.

use serde::{Deserialize, Serialize};

use crate::smalldense::DenseMatrix;
use crate::{Error, Result};

pub const PLANCK: f64 = 6.626_070_15e-34;
pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const T_CMB: f64 = 2.7525;

/// Number of sky components (CMB, dust, synchrotron).
pub const N_COMPONENTS: usize = 3;
/// Number of unknowns per pixel: three components times (Q, U).
pub const BLOCK: usize = 2 * N_COMPONENTS;

/// Rayleigh-Jeans to thermodynamic conversion factor at `nu_ghz`.
pub fn gamma_rj(nu_ghz: f64) -> f64 {
    let x = PLANCK * nu_ghz * 1e9 / (BOLTZMANN * T_CMB);
    let em1 = x.exp_m1();
    em1 * em1 / (x * x * x.exp())
}

/// Ratio `S_dust(nu) / S_dust(nu_ref)` of modified blackbodies sharing `beta_d` and `t_dust`.
pub fn dust_ratio(nu_ghz: f64, nu_ref_ghz: f64, beta_d: f64, t_dust: f64) -> f64 {
    let x = PLANCK * nu_ghz * 1e9 / (BOLTZMANN * t_dust);
    let x_ref = PLANCK * nu_ref_ghz * 1e9 / (BOLTZMANN * t_dust);
    (nu_ghz / nu_ref_ghz).powf(beta_d + 3.0) * x_ref.exp_m1() / x.exp_m1()
}

/// Ratio `S_sync(nu) / S_sync(nu_ref)` of a pure power law.
pub fn sync_ratio(nu_ghz: f64, nu_ref_ghz: f64, beta_s: f64) -> f64 {
    (nu_ghz / nu_ref_ghz).powf(beta_s)
}

/// Per-frequency scaling coefficients `alpha[f] = [cmb, dust, sync]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingCoefficients {
    pub beta_d: f64,
    pub beta_s: f64,
    pub t_dust: f64,
    pub frequencies: Vec<f64>,
    pub nu_ref: f64,
    pub alpha: Vec<[f64; N_COMPONENTS]>,
}

impl MixingCoefficients {
    pub fn n_freq(&self) -> usize {
        self.alpha.len()
    }

    /// The `2 n_freq x 6` matrix `K`: row `2f + s` (s = 0 for Q, 1 for U), column `2c + s`.
    pub fn k_matrix(&self) -> DenseMatrix {
        let mut k = DenseMatrix::zeros(2 * self.n_freq(), BLOCK);
        for (f, a) in self.alpha.iter().enumerate() {
            for (c, &v) in a.iter().enumerate() {
                k[(2 * f, 2 * c)] = v;
                k[(2 * f + 1, 2 * c + 1)] = v;
            }
        }
        k
    }
}

pub fn compute_mixing_coefficients(
    beta_d: f64,
    beta_s: f64,
    t_dust: f64,
    frequencies: &[f64],
    nu_ref: f64,
) -> Result<MixingCoefficients> {
    if frequencies.is_empty() {
        return Err(Error::invalid("frequencies", "empty frequency list"));
    }
    if !(t_dust > 0.0) || !t_dust.is_finite() {
        return Err(Error::invalid("t_dust", format!("must be positive, got {t_dust}")));
    }
    if !(nu_ref > 0.0) || !nu_ref.is_finite() {
        return Err(Error::invalid("nu_ref", format!("must be positive, got {nu_ref}")));
    }
    if let Some(&bad) = frequencies.iter().find(|&&nu| !(nu > 0.0) || !nu.is_finite()) {
        return Err(Error::invalid("frequencies", format!("must be positive, got {bad}")));
    }
    if !beta_d.is_finite() || !beta_s.is_finite() {
        return Err(Error::invalid("beta", "spectral indices must be finite"));
    }
    let alpha = frequencies
        .iter()
        .map(|&nu| {
            let g = gamma_rj(nu);
            [
                1.0,
                g * dust_ratio(nu, nu_ref, beta_d, t_dust),
                g * sync_ratio(nu, nu_ref, beta_s),
            ]
        })
        .collect();
    Ok(MixingCoefficients {
        beta_d,
        beta_s,
        t_dust,
        frequencies: frequencies.to_vec(),
        nu_ref,
        alpha,
    })
}
