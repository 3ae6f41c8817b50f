use std::fs;
use std::path::Path;

use compsep_core::driver::{
    comparison_strategies, run_sequence, sweep_recycling_params, BetaSequence, SequenceReport, SpectralModel,
};
use compsep_core::simulator::{generate_tod, SimulationArchive};
use compsep_core::Error;
use log::info;
use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

pub const RESIDUALS_HEADER: [&str; 3] = ["system_index", "iteration", "relative_residual"];
pub const SUMMARY_FILE: &str = "summary.csv";
pub const SWEEP_FILE: &str = "sweep.csv";

#[derive(Serialize)]
struct SummaryRow<'a> {
    strategy: &'a str,
    iterations: usize,
    matvecs_deflation: usize,
    matvecs_total: usize,
    wall_time: f64,
}

#[derive(Serialize)]
struct SweepRow {
    dim_p: usize,
    k: usize,
    iterations: usize,
    deflation: usize,
    total: usize,
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
    .into()
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| {
        Error::Io {
            path: dir.to_path_buf(),
            source: e,
        }
        .into()
    })
}

/// File name of the residual history of one strategy, e.g. `residuals_adapted_ritz.csv`.
pub fn residuals_file(label: &str) -> String {
    format!("residuals_{}.csv", label.replace('+', "_"))
}

fn write_residuals(path: &Path, report: &SequenceReport) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(RESIDUALS_HEADER).map_err(|e| csv_error(path, e))?;
    for s in &report.per_system {
        for (j, r) in s.log.residual_history.iter().enumerate() {
            w.write_record([s.index.to_string(), j.to_string(), format!("{r:e}")])
                .map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let out = cfg.path("output")?;
    let sim = cfg.simulation_config()?;
    let archive = generate_tod(&sim)?;
    archive.write(out)?;
    info!(
        "wrote {} channels of {} samples to {}",
        archive.tods.len(),
        sim.samples_per_channel(),
        out.display()
    );
    Ok(())
}

fn load_inputs(cfg: &RunConfig) -> Result<(SimulationArchive, BetaSequence), CliError> {
    let betas = BetaSequence::read_csv(cfg.path("betas")?)?;
    let archive = SimulationArchive::read(cfg.path("archive")?)?;
    Ok((archive, betas))
}

pub fn solve(cfg: &RunConfig, compare: bool) -> Result<(), CliError> {
    let driver = cfg.driver_config()?;
    let out = cfg.path("output")?;
    let (archive, betas) = load_inputs(cfg)?;
    let core = archive.system_core()?;
    let model = SpectralModel::from(&archive.config);
    create_dir(out)?;

    let strategies = if compare {
        let s = driver.strategy;
        comparison_strategies(s.k, s.dim_p)
            .map(|c| compsep_core::driver::Strategy {
                variant: s.variant,
                reorthogonalize: s.reorthogonalize,
                ..c
            })
            .to_vec()
    } else {
        vec![driver.strategy]
    };
    let mut reports = Vec::with_capacity(strategies.len());
    for strategy in strategies {
        let config = compsep_core::driver::DriverConfig { strategy, ..driver };
        let report = run_sequence(&core, &model, &config, &betas)?;
        let label = strategy.label();
        write_residuals(&out.join(residuals_file(&label)), &report)?;
        info!(
            "{label}: {} iterations, {} matvecs",
            report.totals.iterations, report.totals.matvecs_total
        );
        reports.push((label, report));
    }
    write_rows(
        &out.join(SUMMARY_FILE),
        reports.iter().map(|(label, r)| SummaryRow {
            strategy: label,
            iterations: r.totals.iterations,
            matvecs_deflation: r.totals.matvecs_deflation,
            matvecs_total: r.totals.matvecs_total,
            wall_time: r.wall_time,
        }),
    )
}

pub fn sweep(cfg: &RunConfig) -> Result<(), CliError> {
    let driver = cfg.driver_config()?;
    let (k, dim_p) = cfg.sweep_grid()?;
    let out = cfg.path("output")?;
    let (archive, betas) = load_inputs(cfg)?;
    let core = archive.system_core()?;
    let model = SpectralModel::from(&archive.config);
    create_dir(out)?;
    let cells = sweep_recycling_params(&core, &model, &driver, &betas, &k, &dim_p)?;
    write_rows(
        &out.join(SWEEP_FILE),
        cells.iter().map(|c| SweepRow {
            dim_p: c.dim_p,
            k: c.k,
            iterations: c.report.totals.iterations,
            deflation: c.report.totals.matvecs_deflation,
            total: c.report.totals.matvecs_total,
        }),
    )
}
