use std::path::{Path, PathBuf};

use compsep_core::driver::{DriverConfig, FailurePolicy, InitialGuess, Strategy};
use compsep_core::recycling::RecycleMethod;
use compsep_core::simulator::SimulationConfig;
use compsep_core::solvers::DeflationVariant;
use serde::Deserialize;

use crate::CliError;

/// Settings shared by all subcommands. Every field is optional so that a configuration file
/// can be laid over the command-line flags key by key.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub strategy: StrategyConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    /// Seed of the simulated sky and noise.
    pub seed: Option<u64>,
    /// Keys of [`SimulationConfig`]; checked when the simulation config is built.
    #[serde(default)]
    pub simulation: toml::Table,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub archive: Option<PathBuf>,
    pub betas: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyConfig {
    pub guess: Option<InitialGuess>,
    pub recycling: Option<RecycleMethod>,
    pub variant: Option<DeflationVariant>,
    pub rotation: Option<bool>,
    pub reorthogonalize: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: Option<f64>,
    pub maxit: Option<usize>,
    pub k: Option<usize>,
    pub dim_p: Option<usize>,
    pub policy: Option<FailurePolicy>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub k: Option<Vec<usize>>,
    pub dim_p: Option<Vec<usize>>,
}

fn overlay<T>(base: &mut Option<T>, top: Option<T>) {
    if top.is_some() {
        *base = top;
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::invalid("config", format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::invalid("config", format!("{}: {e}", path.display())))
    }

    /// Replaces every value that is set in `file`.
    pub fn overlay(&mut self, file: RunConfig) {
        overlay(&mut self.paths.archive, file.paths.archive);
        overlay(&mut self.paths.betas, file.paths.betas);
        overlay(&mut self.paths.output, file.paths.output);
        overlay(&mut self.strategy.guess, file.strategy.guess);
        overlay(&mut self.strategy.recycling, file.strategy.recycling);
        overlay(&mut self.strategy.variant, file.strategy.variant);
        overlay(&mut self.strategy.rotation, file.strategy.rotation);
        overlay(&mut self.strategy.reorthogonalize, file.strategy.reorthogonalize);
        overlay(&mut self.solver.tol, file.solver.tol);
        overlay(&mut self.solver.maxit, file.solver.maxit);
        overlay(&mut self.solver.k, file.solver.k);
        overlay(&mut self.solver.dim_p, file.solver.dim_p);
        overlay(&mut self.solver.policy, file.solver.policy);
        overlay(&mut self.sweep.k, file.sweep.k);
        overlay(&mut self.sweep.dim_p, file.sweep.dim_p);
        overlay(&mut self.seed, file.seed);
        self.simulation.extend(file.simulation);
    }

    pub fn path(&self, field: &'static str) -> Result<&Path, CliError> {
        let p = match field {
            "archive" => &self.paths.archive,
            "betas" => &self.paths.betas,
            _ => &self.paths.output,
        };
        p.as_deref()
            .ok_or_else(|| CliError::invalid(field, "required (flag or [paths] entry)"))
    }

    pub fn simulation_config(&self) -> Result<SimulationConfig, CliError> {
        let mut cfg: SimulationConfig = toml::Value::Table(self.simulation.clone())
            .try_into()
            .map_err(|e: toml::de::Error| CliError::invalid("simulation", e.message().to_string()))?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }

    pub fn driver_config(&self) -> Result<DriverConfig, CliError> {
        let d = DriverConfig::default();
        let s = Strategy::default();
        let strategy = Strategy {
            guess: self.strategy.guess.unwrap_or(s.guess),
            recycling: self.strategy.recycling.unwrap_or(s.recycling),
            variant: self.strategy.variant.unwrap_or(s.variant),
            rotation: self.strategy.rotation.unwrap_or(s.rotation),
            reorthogonalize: self.strategy.reorthogonalize.unwrap_or(s.reorthogonalize),
            k: self.solver.k.unwrap_or(s.k),
            dim_p: self.solver.dim_p.unwrap_or(s.dim_p),
        };
        let config = DriverConfig {
            strategy,
            tol: self.solver.tol.unwrap_or(d.tol),
            maxit: self.solver.maxit.unwrap_or(d.maxit),
            policy: self.solver.policy.unwrap_or(d.policy),
        };
        if !(config.tol > 0.0 && config.tol < 1.0) {
            return Err(CliError::invalid("tol", format!("must lie in (0, 1), got {}", config.tol)));
        }
        if config.maxit == 0 {
            return Err(CliError::invalid("maxit", "must be at least 1"));
        }
        if strategy.recycling != RecycleMethod::Off && strategy.k > 0 && strategy.dim_p == 0 {
            return Err(CliError::invalid("dim_p", "recycling needs at least one harvested direction"));
        }
        Ok(config)
    }

    pub fn sweep_grid(&self) -> Result<(Vec<usize>, Vec<usize>), CliError> {
        let k = self.sweep.k.clone().unwrap_or_else(|| vec![6, 10]);
        let dim_p = self.sweep.dim_p.clone().unwrap_or_else(|| vec![20, 50, 100]);
        if k.is_empty() {
            return Err(CliError::invalid("k", "empty list"));
        }
        if dim_p.is_empty() || dim_p.contains(&0) {
            return Err(CliError::invalid("dim_p", "need a nonempty list of positive values"));
        }
        Ok((k, dim_p))
    }
}
