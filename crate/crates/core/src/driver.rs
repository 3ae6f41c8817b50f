//! The full procedure over a sequence of spectral parameters.
//!
//! For each `beta_i`: assemble the operator from the cached β-independent core, pick the
//! initial guess, build the deflation space from the previous solve, run deflated PCG and
//! keep its harvest for the next system.

use std::path::Path;

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::linalg::Preconditioner;
use crate::operators::{compute_mixing_coefficients, MixingCoefficients, SystemCore, BLOCK};
use crate::recycling::{
    augment_with_rotation, harmonic_ritz_recycle, ritz_recycle, RecycleMethod, RecyclePool,
};
use crate::simulator::SimulationConfig;
use crate::smalldense::pseudo_inverse_product;
use crate::solvers::{deflated_pcg, DeflationSpace, DeflationVariant, SolveLog, SolverSettings};
use crate::{Error, Result};

/// Peak of the synthetic spectral likelihood both bundled sequences gravitate to,
/// `(beta_d, beta_s)`.
pub const FIXTURE_PEAK: (f64, f64) = (1.584, -3.006);

/// Ordered spectral parameters `(beta_d, beta_s)`, one system each.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaSequence {
    pub entries: Vec<(f64, f64)>,
    pub source_tag: String,
}

#[derive(Serialize, Deserialize)]
struct BetaRow {
    beta_d: f64,
    beta_s: f64,
}

impl BetaSequence {
    pub fn new(entries: Vec<(f64, f64)>, source_tag: impl Into<String>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("betas", "sequence is empty"));
        }
        if entries.iter().any(|(d, s)| !d.is_finite() || !s.is_finite()) {
            return Err(Error::invalid("betas", "non-finite spectral index"));
        }
        Ok(Self {
            entries,
            source_tag: source_tag.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// First `n` entries (or all of them).
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            entries: self.entries[..n.min(self.len())].to_vec(),
            source_tag: self.source_tag.clone(),
        }
    }

    /// Damped spiral from `(1.30, -2.60)` into [`FIXTURE_PEAK`], 26 entries: the kind of path a
    /// Newton-type maximizer takes.
    pub fn maximization_like() -> Self {
        let (pd, ps) = FIXTURE_PEAK;
        let (d0, s0) = (1.30 - pd, -2.60 - ps);
        let entries = (0..26)
            .map(|i| {
                let t = i as f64;
                let damp = 0.72_f64.powf(t);
                let (c, s) = (0.9 * t).sin_cos();
                (
                    pd + damp * (d0 * s + 0.3 * d0 * c),
                    ps + damp * (s0 * s - 0.2 * s0 * c),
                )
            })
            .collect();
        Self {
            entries,
            source_tag: "maximization-like".into(),
        }
    }

    /// Gaussian scatter around [`FIXTURE_PEAK`] with standard deviations `(0.02, 0.03)`,
    /// 30 entries from ChaCha8 seed 2019: the kind of chain a sampler produces.
    pub fn sampling_like() -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(2019);
        let nd = Normal::new(FIXTURE_PEAK.0, 0.02).expect("valid normal");
        let ns = Normal::new(FIXTURE_PEAK.1, 0.03).expect("valid normal");
        let entries = (0..30)
            .map(|_| (nd.sample(&mut rng), ns.sample(&mut rng)))
            .collect();
        Self {
            entries,
            source_tag: "sampling-like".into(),
        }
    }

    /// Reads a CSV file with header `beta_d,beta_s`.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::format(path, e.to_string()))?;
        let headers = reader
            .headers()
            .map_err(|e| Error::format(path, e.to_string()))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != ["beta_d", "beta_s"] {
            return Err(Error::format(path, "expected header `beta_d,beta_s`"));
        }
        let mut entries = Vec::new();
        for row in reader.deserialize() {
            let row: BetaRow = row.map_err(|e| Error::format(path, e.to_string()))?;
            entries.push((row.beta_d, row.beta_s));
        }
        let tag = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::new(entries, tag).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
        for &(beta_d, beta_s) in &self.entries {
            writer
                .serialize(BetaRow { beta_d, beta_s })
                .map_err(|e| Error::format(path, e.to_string()))?;
        }
        writer.flush().map_err(|e| Error::io(path, e))
    }
}

/// Channel frequencies and dust temperature, everything the mixing needs besides β.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralModel {
    pub frequencies: Vec<f64>,
    pub nu_ref: f64,
    pub t_dust: f64,
}

impl From<&SimulationConfig> for SpectralModel {
    fn from(cfg: &SimulationConfig) -> Self {
        Self {
            frequencies: cfg.frequencies.clone(),
            nu_ref: cfg.nu_ref,
            t_dust: cfg.t_dust,
        }
    }
}

impl SpectralModel {
    pub fn mixing(&self, beta_d: f64, beta_s: f64) -> Result<MixingCoefficients> {
        compute_mixing_coefficients(beta_d, beta_s, self.t_dust, &self.frequencies, self.nu_ref)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialGuess {
    #[default]
    Zero,
    Continuation,
    Adapted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailurePolicy {
    #[default]
    Abort,
    Continue,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub guess: InitialGuess,
    pub recycling: RecycleMethod,
    pub variant: DeflationVariant,
    /// Add spin-2 rotated copies of the recycled vectors (symmetric scans only).
    pub rotation: bool,
    pub reorthogonalize: bool,
    /// Deflation vectors carried to the next system.
    pub k: usize,
    /// Harvested search directions per solve.
    pub dim_p: usize,
}

impl Default for Strategy {
    fn default() -> Self {
        Self {
            guess: InitialGuess::Zero,
            recycling: RecycleMethod::Off,
            variant: DeflationVariant::Def1,
            rotation: false,
            reorthogonalize: false,
            k: 10,
            dim_p: 100,
        }
    }
}

impl Strategy {
    pub fn new(guess: InitialGuess, recycling: RecycleMethod) -> Self {
        Self {
            guess,
            recycling,
            ..Self::default()
        }
    }

    /// Short label such as `adapted+ritz`.
    pub fn label(&self) -> String {
        let guess = match self.guess {
            InitialGuess::Zero => "zero",
            InitialGuess::Continuation => "continuation",
            InitialGuess::Adapted => "adapted",
        };
        match self.recycling {
            RecycleMethod::Off => guess.to_string(),
            RecycleMethod::Ritz => format!("{guess}+ritz"),
            RecycleMethod::Harmonic => format!("{guess}+harmonic"),
        }
    }

    fn recycles(&self) -> bool {
        self.recycling != RecycleMethod::Off && self.k > 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriverConfig {
    pub strategy: Strategy,
    pub tol: f64,
    pub maxit: usize,
    pub policy: FailurePolicy,
}

impl Default for DriverConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::default(),
            tol: 1e-8,
            maxit: 500,
            policy: FailurePolicy::Abort,
        }
    }
}

/// The four configurations compared at the end of the procedure: zero, continuation,
/// adapted, adapted with Ritz recycling.
pub fn comparison_strategies(k: usize, dim_p: usize) -> [Strategy; 4] {
    [
        (InitialGuess::Zero, RecycleMethod::Off),
        (InitialGuess::Continuation, RecycleMethod::Off),
        (InitialGuess::Adapted, RecycleMethod::Off),
        (InitialGuess::Adapted, RecycleMethod::Ritz),
    ]
    .map(|(guess, recycling)| Strategy {
        k,
        dim_p,
        ..Strategy::new(guess, recycling)
    })
}

/// Starting vector for the next system. `prev` is `None` for the first system.
pub fn initial_guess(
    guess: InitialGuess,
    prev: Option<&[f64]>,
    k_prev: &MixingCoefficients,
    k_next: &MixingCoefficients,
    npix: usize,
) -> Result<Vec<f64>> {
    let Some(prev) = prev else {
        return Ok(vec![0.0; BLOCK * npix]);
    };
    if prev.len() != BLOCK * npix {
        return Err(Error::DimensionMismatch {
            expected: BLOCK * npix,
            found: prev.len(),
        });
    }
    match guess {
        InitialGuess::Zero => Ok(vec![0.0; BLOCK * npix]),
        InitialGuess::Continuation => Ok(prev.to_vec()),
        InitialGuess::Adapted => {
            if k_prev == k_next {
                return Ok(prev.to_vec());
            }
            let w = pseudo_inverse_product(&k_next.k_matrix(), &k_prev.k_matrix())?;
            let mut out = vec![0.0; BLOCK * npix];
            for i in 0..BLOCK {
                let dst = &mut out[i * npix..(i + 1) * npix];
                for j in 0..BLOCK {
                    let wij = w[(i, j)];
                    if wij == 0.0 {
                        continue;
                    }
                    let src = &prev[j * npix..(j + 1) * npix];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += wij * s;
                    }
                }
            }
            Ok(out)
        }
    }
}

/// Per-system record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemReport {
    pub index: usize,
    pub beta_d: f64,
    pub beta_s: f64,
    /// Deflation vectors used.
    pub deflation_size: usize,
    /// Smallest Ritz value of the recycled space, when recycling ran.
    pub smallest_ritz: Option<f64>,
    pub log: SolveLog,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub iterations: usize,
    pub matvecs_iteration: usize,
    pub matvecs_deflation: usize,
    pub matvecs_total: usize,
}

#[derive(Debug, Clone)]
pub struct SequenceReport {
    pub strategy: Strategy,
    pub per_system: Vec<SystemReport>,
    pub totals: Totals,
    pub wall_time: f64,
    /// Solution of the last system.
    pub last_solution: Vec<f64>,
}

impl SequenceReport {
    fn totals_of(per_system: &[SystemReport]) -> Totals {
        let mut t = Totals::default();
        for s in per_system {
            t.iterations += s.log.iterations;
            t.matvecs_iteration += s.log.matvecs_iteration;
            t.matvecs_deflation += s.log.matvecs_deflation;
        }
        t.matvecs_total = t.matvecs_iteration + t.matvecs_deflation;
        t
    }

    pub fn all_converged(&self) -> bool {
        self.per_system.iter().all(|s| s.log.converged())
    }
}

/// Runs the procedure over `betas`. `core` must carry data.
pub fn run_sequence(
    core: &SystemCore,
    model: &SpectralModel,
    config: &DriverConfig,
    betas: &BetaSequence,
) -> Result<SequenceReport> {
    let strategy = config.strategy;
    let settings = SolverSettings {
        tol: config.tol,
        maxit: config.maxit,
        dim_p: if strategy.recycles() { strategy.dim_p } else { 0 },
        variant: strategy.variant,
        reorthogonalize: strategy.reorthogonalize,
    };
    settings.validate()?;
    if betas.is_empty() {
        return Err(Error::invalid("betas", "sequence is empty"));
    }
    let start = std::time::Instant::now();
    let npix = core.npix();
    let mut per_system = Vec::with_capacity(betas.len());
    let mut prev: Option<(Vec<f64>, MixingCoefficients)> = None;
    let mut pool: Option<(RecyclePool, Box<dyn Preconditioner + '_>)> = None;

    for (index, &(beta_d, beta_s)) in betas.entries.iter().enumerate() {
        let mixing = model.mixing(beta_d, beta_s)?;
        let op = core.operator(mixing.clone())?;
        let b = op.assemble_preconditioner()?;
        let rhs = op.rhs()?;
        let x0 = match &prev {
            Some((sol, k_prev)) => initial_guess(strategy.guess, Some(sol), k_prev, &mixing, npix)?,
            None => vec![0.0; core.dim()],
        };

        let mut smallest_ritz = None;
        let z = match pool.take() {
            Some((pool, prev_b)) if strategy.recycles() && !pool.is_empty() => {
                let recycled = match strategy.recycling {
                    RecycleMethod::Harmonic => harmonic_ritz_recycle(&pool, prev_b.as_ref(), strategy.k)?,
                    _ => ritz_recycle(&pool, strategy.k)?,
                };
                smallest_ritz = recycled.values.first().copied();
                let mut vectors = recycled.vectors;
                if strategy.rotation {
                    vectors = augment_with_rotation(&vectors, npix);
                }
                DeflationSpace::new(&op, vectors)?
            }
            _ => DeflationSpace::empty(core.dim()),
        };

        let solve = deflated_pcg(&op, &b, &rhs, &x0, &z, &settings)?;
        info!(
            "system {index} (beta_d = {beta_d:.4}, beta_s = {beta_s:.4}): {} iterations, |Z| = {}, residual {:.2e}",
            solve.log.iterations,
            z.len(),
            solve.log.true_residual
        );
        if !solve.log.converged() {
            match config.policy {
                FailurePolicy::Abort => {
                    return Err(Error::NotConverged {
                        system: index,
                        iterations: solve.log.iterations,
                        residual: solve.log.final_residual(),
                    })
                }
                FailurePolicy::Continue => warn!("system {index} did not converge, continuing"),
            }
        }
        if strategy.recycles() {
            pool = Some((RecyclePool::from_solve(&z, solve.harvest, &b)?, Box::new(b)));
        }
        per_system.push(SystemReport {
            index,
            beta_d,
            beta_s,
            deflation_size: z.len(),
            smallest_ritz,
            log: solve.log,
        });
        prev = Some((solve.solution, mixing));
    }

    let totals = SequenceReport::totals_of(&per_system);
    Ok(SequenceReport {
        strategy,
        per_system,
        totals,
        wall_time: start.elapsed().as_secs_f64(),
        last_solution: prev.map(|(s, _)| s).unwrap_or_default(),
    })
}

/// One cell of a recycling parameter sweep.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub k: usize,
    pub dim_p: usize,
    pub report: SequenceReport,
}

/// Runs the first ten systems once per `(k, dim_p)` pair, `k` varying slowest.
pub fn sweep_recycling_params(
    core: &SystemCore,
    model: &SpectralModel,
    config: &DriverConfig,
    betas: &BetaSequence,
    k_values: &[usize],
    dimp_values: &[usize],
) -> Result<Vec<SweepCell>> {
    if k_values.is_empty() || dimp_values.is_empty() {
        return Err(Error::invalid("grid", "k and dim_p lists must be nonempty"));
    }
    let first = betas.truncated(10);
    let mut cells = Vec::with_capacity(k_values.len() * dimp_values.len());
    for &k in k_values {
        for &dim_p in dimp_values {
            let mut cfg = *config;
            cfg.strategy.k = k;
            cfg.strategy.dim_p = dim_p;
            let report = run_sequence(core, model, &cfg, &first)?;
            cells.push(SweepCell { k, dim_p, report });
        }
    }
    Ok(cells)
}
