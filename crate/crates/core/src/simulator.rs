//! Seeded synthetic observations: raster scans, Gaussian sky components, 1/f noise and the
//! resulting time-ordered data, plus a directory archive format.
//!
//! Random streams are derived from one master seed: ChaCha8 seeded with the master seed and
//! switched to stream `1 + j` for sky map `j` (component-major, Q before U) and to stream
//! `100 + f` for the noise of channel `f`.
//!
//! Archive layout: `manifest.toml` holds the format version and the full configuration;
//! `sky.f64` and `tod_<f>.f64` hold arrays as a little-endian `u64` rank, `u64` extents and
//! `f64` values. Scans and noise models are regenerated from the configuration.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::operators::{
    compute_mixing_coefficients, log_spaced_knees, MixingCoefficients, NoiseModel, ScanLayout,
    ScanPattern, SystemCore, BLOCK, N_COMPONENTS,
};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.toml";

const SKY_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub patch_rows: usize,
    pub patch_cols: usize,
    pub sweeps_per_subset: usize,
    pub layout: ScanLayout,
    /// GHz.
    pub frequencies: Vec<f64>,
    pub nu_ref: f64,
    pub beta_d: f64,
    pub beta_s: f64,
    pub t_dust: f64,
    /// µK per sample, one value shared by all channels.
    pub sigma_rms: f64,
    /// Per-channel knee frequencies; empty means log-spaced over `[f_knee_min, f_knee_max]`.
    pub f_knees: Vec<f64>,
    pub f_knee_min: f64,
    pub f_knee_max: f64,
    /// `f_apo = f_apo_ratio * f_knee`.
    pub f_apo_ratio: f64,
    pub sample_rate: f64,
    /// Samples per stationary noise block; 0 selects the default (two scan subsets).
    pub block_length: usize,
    /// Standard deviation of the CMB, dust and synchrotron maps, µK.
    pub amplitudes: [f64; N_COMPONENTS],
    /// Width of the Gaussian smoothing kernel in pixels.
    pub smoothing_pixels: f64,
    pub add_noise: bool,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            patch_rows: 32,
            patch_cols: 32,
            sweeps_per_subset: 2,
            layout: ScanLayout::Alternating,
            frequencies: vec![30.0, 40.0, 90.0, 150.0, 220.0, 270.0],
            nu_ref: 150.0,
            beta_d: 1.59,
            beta_s: -3.1,
            t_dust: 19.6,
            sigma_rms: 30.0,
            f_knees: Vec::new(),
            f_knee_min: 0.5,
            f_knee_max: 3.0,
            f_apo_ratio: 0.001,
            sample_rate: 10.0,
            block_length: 0,
            amplitudes: [1.0, 5.0, 2.0],
            smoothing_pixels: 1.5,
            add_noise: true,
            seed: 1,
        }
    }
}

impl SimulationConfig {
    pub fn npix(&self) -> usize {
        self.patch_rows * self.patch_cols
    }

    pub fn samples_per_channel(&self) -> usize {
        4 * self.sweeps_per_subset * self.npix()
    }

    /// Block length in use: the configured one, or the largest power of two that divides the
    /// stream and does not exceed two scan subsets.
    pub fn effective_block_length(&self) -> usize {
        if self.block_length != 0 {
            return self.block_length;
        }
        let n = self.samples_per_channel();
        let cap = 2 * self.sweeps_per_subset * self.npix();
        let mut l = 1;
        while n % (2 * l) == 0 && 2 * l <= cap {
            l *= 2;
        }
        l
    }

    pub fn knee_frequencies(&self) -> Vec<f64> {
        if self.f_knees.is_empty() {
            log_spaced_knees(self.frequencies.len(), self.f_knee_min, self.f_knee_max)
        } else {
            self.f_knees.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_rows < 2 {
            return Err(Error::invalid("patch_rows", format!("must be at least 2, got {}", self.patch_rows)));
        }
        if self.patch_cols < 2 {
            return Err(Error::invalid("patch_cols", format!("must be at least 2, got {}", self.patch_cols)));
        }
        if self.sweeps_per_subset == 0 {
            return Err(Error::invalid("sweeps_per_subset", "must be at least 1"));
        }
        if self.frequencies.is_empty() {
            return Err(Error::invalid("frequencies", "empty frequency list"));
        }
        if !self.f_knees.is_empty() && self.f_knees.len() != self.frequencies.len() {
            return Err(Error::invalid(
                "f_knees",
                format!("expected {} values, got {}", self.frequencies.len(), self.f_knees.len()),
            ));
        }
        if self.f_knees.is_empty() && !(0.0 < self.f_knee_min && self.f_knee_min <= self.f_knee_max) {
            return Err(Error::invalid("f_knee_min", "need 0 < f_knee_min <= f_knee_max"));
        }
        if !(self.f_apo_ratio > 0.0 && self.f_apo_ratio < 1.0) {
            return Err(Error::invalid("f_apo_ratio", "must lie in (0, 1)"));
        }
        if !(self.smoothing_pixels >= 0.0) {
            return Err(Error::invalid("smoothing_pixels", "must be nonnegative"));
        }
        if self.amplitudes.iter().any(|a| !(*a >= 0.0)) {
            return Err(Error::invalid("amplitudes", "must be nonnegative"));
        }
        let l = self.effective_block_length();
        if self.samples_per_channel() % l != 0 {
            return Err(Error::invalid(
                "block_length",
                format!("{} samples are not a multiple of {l}", self.samples_per_channel()),
            ));
        }
        for m in self.noise_models() {
            m.validate()?;
        }
        self.mixing(self.beta_d, self.beta_s)?;
        Ok(())
    }

    pub fn noise_models(&self) -> Vec<NoiseModel> {
        let block_length = self.effective_block_length();
        self.knee_frequencies()
            .into_iter()
            .map(|f_knee| NoiseModel {
                sigma_rms: self.sigma_rms,
                f_knee,
                f_apo: if f_knee > 0.0 { self.f_apo_ratio * f_knee } else { 1e-3 },
                sample_rate: self.sample_rate,
                block_length,
            })
            .collect()
    }

    pub fn scans(&self) -> Result<Vec<ScanPattern>> {
        let scan = generate_scan(self.patch_rows, self.patch_cols, self.sweeps_per_subset, self.layout)?;
        Ok(vec![scan; self.frequencies.len()])
    }

    /// Mixing coefficients at `(beta_d, beta_s)` with this configuration's channels.
    pub fn mixing(&self, beta_d: f64, beta_s: f64) -> Result<MixingCoefficients> {
        compute_mixing_coefficients(beta_d, beta_s, self.t_dust, &self.frequencies, self.nu_ref)
    }

    /// β-independent system part without data attached.
    pub fn system_core(&self) -> Result<SystemCore> {
        SystemCore::new(self.scans()?, self.noise_models())
    }
}

fn stream_rng(master: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

/// Full-coverage raster scan.
pub fn generate_scan(
    patch_rows: usize,
    patch_cols: usize,
    sweeps_per_subset: usize,
    layout: ScanLayout,
) -> Result<ScanPattern> {
    ScanPattern::raster(patch_rows, patch_cols, sweeps_per_subset, layout)
}

/// Component maps at the reference frequency, stored as a component vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SkyModel {
    pub rows: usize,
    pub cols: usize,
    pub seed: u64,
    /// Component-wise layout, `(2c + s) * npix + p`.
    pub maps: Vec<f64>,
}

impl SkyModel {
    pub fn npix(&self) -> usize {
        self.rows * self.cols
    }

    /// Map of component `c`, Stokes `s`.
    pub fn map(&self, c: usize, s: usize) -> &[f64] {
        let npix = self.npix();
        &self.maps[(2 * c + s) * npix..(2 * c + s + 1) * npix]
    }
}

/// Periodic Gaussian kernel with unit sum of squares, so smoothing unit white noise keeps unit
/// variance.
fn smoothing_kernel(rows: usize, cols: usize, width: f64) -> Vec<f64> {
    let profile = |n: usize| -> Vec<f64> {
        (0..n)
            .map(|d| {
                let d = d.min(n - d) as f64;
                if width > 0.0 {
                    (-0.5 * d * d / (width * width)).exp()
                } else if d == 0.0 {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    };
    let (gr, gc) = (profile(rows), profile(cols));
    let mut h: Vec<f64> = gr.iter().flat_map(|a| gc.iter().map(move |b| a * b)).collect();
    let s = h.iter().map(|v| v * v).sum::<f64>().sqrt();
    h.iter_mut().for_each(|v| *v /= s);
    h
}

/// Gaussian random fields: seeded white noise, circularly smoothed and scaled to the
/// component amplitudes.
pub fn generate_sky(
    rows: usize,
    cols: usize,
    seed: u64,
    amplitudes: [f64; N_COMPONENTS],
    smoothing_pixels: f64,
) -> SkyModel {
    let npix = rows * cols;
    let kernel = smoothing_kernel(rows, cols, smoothing_pixels);
    let mut maps = vec![0.0; BLOCK * npix];
    for j in 0..BLOCK {
        let mut rng = stream_rng(seed, SKY_STREAM + j as u64);
        let white: Vec<f64> = (0..npix).map(|_| StandardNormal.sample(&mut rng)).collect();
        let amp = amplitudes[j / 2];
        let dst = &mut maps[j * npix..(j + 1) * npix];
        if amp == 0.0 {
            continue;
        }
        for r in 0..rows {
            for c in 0..cols {
                let mut acc = 0.0;
                for r2 in 0..rows {
                    let dr = (r + rows - r2) % rows;
                    for c2 in 0..cols {
                        let dc = (c + cols - c2) % cols;
                        acc += kernel[dr * cols + dc] * white[r2 * cols + c2];
                    }
                }
                dst[r * cols + c] = amp * acc;
            }
        }
    }
    SkyModel {
        rows,
        cols,
        seed,
        maps,
    }
}

/// Noise stream with covariance exactly the block circulant of `noise`.
pub fn generate_noise(noise: &NoiseModel, n_samples: usize, seed: u64, stream: u64) -> Result<Vec<f64>> {
    let filter = noise.filter()?;
    if n_samples % filter.block_length() != 0 {
        return Err(Error::invalid(
            "block_length",
            format!("{n_samples} samples are not a multiple of {}", filter.block_length()),
        ));
    }
    let mut rng = stream_rng(seed, stream);
    let mut x: Vec<f64> = (0..n_samples).map(|_| StandardNormal.sample(&mut rng)).collect();
    filter.apply_sqrt(&mut x);
    Ok(x)
}

/// Everything needed to rebuild the operators and data of a simulated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationArchive {
    pub config: SimulationConfig,
    pub sky: SkyModel,
    /// One time stream per channel.
    pub tods: Vec<Vec<f64>>,
}

/// Simulates `d_f = P_f K_f s + n_f` for every channel.
pub fn generate_tod(config: &SimulationConfig) -> Result<SimulationArchive> {
    config.validate()?;
    let sky = generate_sky(
        config.patch_rows,
        config.patch_cols,
        config.seed,
        config.amplitudes,
        config.smoothing_pixels,
    );
    let scans = config.scans()?;
    let noise = config.noise_models();
    let core = SystemCore::new(scans, noise.clone())?;
    let op = core.operator(config.mixing(config.beta_d, config.beta_s)?)?;
    let npix = config.npix();
    let mut tods = Vec::with_capacity(config.frequencies.len());
    let mut m = vec![0.0; 2 * npix];
    for (f, scan) in core.scans().iter().enumerate() {
        op.mix(f, &sky.maps, &mut m);
        let mut d = vec![0.0; scan.n_samples()];
        scan.apply_pointing(&m, &mut d);
        if config.add_noise {
            let n = generate_noise(&noise[f], scan.n_samples(), config.seed, NOISE_STREAM + f as u64)?;
            for (di, ni) in d.iter_mut().zip(n) {
                *di += ni;
            }
        }
        tods.push(d);
    }
    Ok(SimulationArchive {
        config: config.clone(),
        sky,
        tods,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format_version: u32,
    n_channels: usize,
    samples_per_channel: usize,
    config: SimulationConfig,
}

impl SimulationArchive {
    /// System part with the cached `P^T N^{-1} d`.
    pub fn system_core(&self) -> Result<SystemCore> {
        self.config.system_core()?.with_data(&self.tods)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            n_channels: self.tods.len(),
            samples_per_channel: self.config.samples_per_channel(),
            config: self.config.clone(),
        };
        let text = toml::to_string_pretty(&manifest)
            .map_err(|e| Error::format(dir.join(MANIFEST), e.to_string()))?;
        let path = dir.join(MANIFEST);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        write_array(&dir.join("sky.f64"), &[BLOCK, self.sky.npix()], &self.sky.maps)?;
        for (f, d) in self.tods.iter().enumerate() {
            write_array(&tod_path(dir, f), &[d.len()], d)?;
        }
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest =
            toml::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::format(
                &path,
                format!("unsupported format version {}", manifest.format_version),
            ));
        }
        let config = manifest.config;
        config.validate()?;
        if manifest.n_channels != config.frequencies.len()
            || manifest.samples_per_channel != config.samples_per_channel()
        {
            return Err(Error::format(&path, "channel layout disagrees with configuration"));
        }
        let npix = config.npix();
        let sky_path = dir.join("sky.f64");
        let maps = read_array(&sky_path, &[BLOCK, npix])?;
        let tods = (0..manifest.n_channels)
            .map(|f| read_array(&tod_path(dir, f), &[manifest.samples_per_channel]))
            .collect::<Result<_>>()?;
        Ok(Self {
            sky: SkyModel {
                rows: config.patch_rows,
                cols: config.patch_cols,
                seed: config.seed,
                maps,
            },
            config,
            tods,
        })
    }
}

fn tod_path(dir: &Path, f: usize) -> PathBuf {
    dir.join(format!("tod_{f}.f64"))
}

/// Writes `u64` rank, `u64` extents, then the values, all little-endian.
pub fn write_array(path: &Path, dims: &[usize], data: &[f64]) -> Result<()> {
    debug_assert_eq!(dims.iter().product::<usize>(), data.len());
    let mut buf = Vec::with_capacity(8 * (1 + dims.len() + data.len()));
    buf.extend_from_slice(&(dims.len() as u64).to_le_bytes());
    for &d in dims {
        buf.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Reads an array written by [`write_array`], checking its extents.
pub fn read_array(path: &Path, expected_dims: &[usize]) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let word = |i: usize| -> Result<[u8; 8]> {
        bytes
            .get(8 * i..8 * i + 8)
            .map(|b| b.try_into().expect("slice of length 8"))
            .ok_or_else(|| Error::format(path, "truncated file"))
    };
    let ndim = u64::from_le_bytes(word(0)?) as usize;
    let dims = (0..ndim)
        .map(|i| word(1 + i).map(|w| u64::from_le_bytes(w) as usize))
        .collect::<Result<Vec<_>>>()?;
    if dims != expected_dims {
        return Err(Error::format(
            path,
            format!("expected dimensions {expected_dims:?}, found {dims:?}"),
        ));
    }
    let n: usize = dims.iter().product();
    let offset = 1 + ndim;
    if bytes.len() != 8 * (offset + n) {
        return Err(Error::format(path, "file size does not match header"));
    }
    (0..n)
        .map(|i| word(offset + i).map(f64::from_le_bytes))
        .collect()
}
