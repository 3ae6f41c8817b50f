//! Dense reference constructions shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use compsep_core::linalg::{LinearOperator, Preconditioner};
use compsep_core::operators::{MixingCoefficients, NoiseModel, ScanPattern, SystemCore};
use compsep_core::simulator::SimulationConfig;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn small_config(side: usize) -> SimulationConfig {
    SimulationConfig {
        patch_rows: side,
        patch_cols: side,
        ..SimulationConfig::default()
    }
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

/// Explicit pointing matrix, `n_samples x 2 npix`, map layout `[Q; U]`.
pub fn dense_pointing(scan: &ScanPattern) -> DMatrix<f64> {
    let npix = scan.npix();
    let mut p = DMatrix::zeros(scan.n_samples(), 2 * npix);
    for t in 0..scan.n_samples() {
        let pix = scan.pixel_index()[t] as usize;
        let phi = scan.polarizer_angle()[t];
        p[(t, pix)] = (2.0 * phi).cos();
        p[(t, npix + pix)] = (2.0 * phi).sin();
    }
    p
}

/// Noise power of DFT bin `k` in a block of `len` samples, written out from the model parameters.
pub fn bin_power(m: &NoiseModel, k: usize, len: usize) -> f64 {
    let folded = k.min(len - k) as f64;
    let f = folded * m.sample_rate / len as f64;
    m.sigma_rms.powi(2) * (1.0 + m.f_knee / f.max(m.f_apo))
}

/// Dense inverse noise covariance from the real cosine expansion of each circulant block.
pub fn dense_noise_inverse(m: &NoiseModel, n_samples: usize) -> DMatrix<f64> {
    let len = m.block_length;
    let inv: Vec<f64> = (0..len).map(|k| 1.0 / bin_power(m, k, len)).collect();
    let row: Vec<f64> = (0..len)
        .map(|d| {
            inv.iter()
                .enumerate()
                .map(|(k, w)| w * (2.0 * std::f64::consts::PI * (k * d) as f64 / len as f64).cos())
                .sum::<f64>()
                / len as f64
        })
        .collect();
    let mut n = DMatrix::zeros(n_samples, n_samples);
    for b in 0..n_samples / len {
        for i in 0..len {
            for j in 0..len {
                n[(b * len + i, b * len + j)] = row[(i + len - j) % len];
            }
        }
    }
    n
}

/// `P_f K_f`: maps a component vector to channel `f`'s stream.
pub fn dense_channel_map(p: &DMatrix<f64>, mixing: &MixingCoefficients, f: usize) -> DMatrix<f64> {
    let two_npix = p.ncols();
    let mut m = DMatrix::zeros(p.nrows(), 3 * two_npix);
    for c in 0..3 {
        let alpha = mixing.alpha[f][c];
        m.columns_mut(c * two_npix, two_npix).copy_from(&(p * alpha));
    }
    m
}

pub struct DenseSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// Per channel `P_f K_f` and `N_f^{-1}`.
    pub channels: Vec<(DMatrix<f64>, DMatrix<f64>)>,
}

impl DenseSystem {
    pub fn rhs(&self, data: &[Vec<f64>]) -> DVector<f64> {
        let mut out = DVector::zeros(self.a.nrows());
        for ((m, ninv), d) in self.channels.iter().zip(data) {
            out += m.transpose() * (ninv * DVector::from_column_slice(d));
        }
        out
    }
}

pub fn dense_system(core: &SystemCore, mixing: &MixingCoefficients) -> DenseSystem {
    let n = core.dim();
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, n);
    let mut channels = Vec::new();
    for f in 0..core.n_freq() {
        let scan = &core.scans()[f];
        let model = core.filters()[f].model();
        let p = dense_pointing(scan);
        let ninv = dense_noise_inverse(model, scan.n_samples());
        let m = dense_channel_map(&p, mixing, f);
        let diag = ninv[(0, 0)];
        a += m.transpose() * &ninv * &m;
        b += m.transpose() * &m * diag;
        channels.push((m, ninv));
    }
    DenseSystem { a, b, channels }
}

/// Columns of a matrix-free operator, obtained by applying it to unit vectors.
pub fn operator_columns(op: &dyn LinearOperator) -> DMatrix<f64> {
    let n = op.dim();
    let mut out = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = op.apply_vec(&e);
        out.column_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    out
}

pub fn preconditioner_forward_columns(b: &dyn Preconditioner) -> DMatrix<f64> {
    let n = b.dim();
    let mut out = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        b.apply_forward(&e, &mut col);
        out.column_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    out
}

pub fn max_rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max() / b.abs().max()
}

/// Generalized eigenpairs of `A v = lambda B v` via `B^{-1/2} A B^{-1/2}`, ascending.
pub fn generalized_eigen(a: &DMatrix<f64>, b: &DMatrix<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let eb = b.clone().symmetric_eigen();
    let mut inv_sqrt = DMatrix::zeros(b.nrows(), b.ncols());
    for (i, &l) in eb.eigenvalues.iter().enumerate() {
        let v = eb.eigenvectors.column(i);
        inv_sqrt += (&v * v.transpose()) / l.sqrt();
    }
    let c = &inv_sqrt * a * &inv_sqrt;
    let c = (&c + c.transpose()) * 0.5;
    let ec = c.symmetric_eigen();
    let mut order: Vec<usize> = (0..ec.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| ec.eigenvalues[i].total_cmp(&ec.eigenvalues[j]));
    let values = order.iter().map(|&i| ec.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| (&inv_sqrt * ec.eigenvectors.column(i)).iter().copied().collect())
        .collect();
    (values, vectors)
}

/// A dense symmetric matrix used as a matrix-free operator.
pub struct DenseOp(pub DMatrix<f64>);

impl LinearOperator for DenseOp {
    fn dim(&self) -> usize {
        self.0.nrows()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let r = &self.0 * DVector::from_column_slice(x);
        y.copy_from_slice(r.as_slice());
    }
}

/// Random SPD matrix `Q diag(spectrum) Q^T`.
pub fn random_spd(rng: &mut ChaCha8Rng, spectrum: &[f64]) -> DMatrix<f64> {
    let n = spectrum.len();
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let q = g.qr().q();
    &q * DMatrix::from_diagonal(&DVector::from_column_slice(spectrum)) * q.transpose()
}

/// `M^+ y` for full-column-rank `M`, from a Householder QR factorization.
pub fn least_squares(m: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let qr = m.clone().qr();
    let qty = qr.q().transpose() * y;
    qr.r().solve_upper_triangular(&qty).unwrap()
}
