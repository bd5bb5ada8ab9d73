//! Named experiments: configuration, dispatch and report emission.
//!
//! Each experiment builds its objects from an [`ExperimentConfig`], measures
//! a handful of quantities and attaches a [`Verdict`] per acceptance
//! criterion it covers. [`write_outputs`] turns a report into
//! `report.json`, `series.csv` and optionally `series.svg`.

mod config;
mod report;
mod runners;

use std::path::{Path, PathBuf};

pub use config::*;
pub use report::*;
pub use runners::{
    dyadic_cubes, COLLAPSE_TOLERANCE, FIT_SPREAD, RECONSTRUCTION_TOL, TAIL_TOLERANCE, TESTING_GROWTH,
    ZERO_MEAN_TOL,
};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExperimentInfo {
    pub name: &'static str,
    pub description: &'static str,
}

pub const EXPERIMENTS: &[ExperimentInfo] = &[
    ExperimentInfo { name: "aperture", description: "conical norm series on the Cantor measure for each aperture" },
    ExperimentInfo { name: "vertical", description: "vertical norm series and its domination of the conical terms" },
    ExperimentInfo { name: "l2-bound", description: "L² operator ratio of the vertical kernel on leaf inputs" },
    ExperimentInfo { name: "growth", description: "upper growth constant of the Cantor measure" },
    ExperimentInfo { name: "kernel-conditions", description: "size and Hölder ratios of both kernels" },
    ExperimentInfo { name: "logproduct", description: "exact checks on the log-product sets and moment ratios" },
    ExperimentInfo { name: "tb-testing", description: "testing functional of the log-product kernel against b = 1" },
    ExperimentInfo { name: "weak11", description: "weak-(1,1) probe of the aperture-one square function" },
    ExperimentInfo { name: "goodness", description: "probability of good cubes and fine-shift invariance" },
    ExperimentInfo { name: "stopping", description: "stopping forest, martingale differences and packing" },
];

/// Run the experiment named in `config.experiment`.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let f = match config.experiment.as_str() {
        "aperture" => runners::aperture,
        "vertical" => runners::vertical,
        "l2-bound" => runners::l2_bound,
        "growth" => runners::growth,
        "kernel-conditions" => runners::kernel_conditions,
        "logproduct" => runners::logproduct,
        "tb-testing" => runners::tb_testing,
        "weak11" => runners::weak11,
        "goodness" => runners::goodness,
        "stopping" => runners::stopping,
        other => return Err(Error::UnknownExperiment(other.to_string())),
    };
    f(config).map_err(|e| e.context(format!("experiment `{}`", config.experiment)))
}

/// Files written by [`write_outputs`].
#[derive(Debug, Clone, PartialEq)]
pub struct OutputPaths {
    pub report: PathBuf,
    pub csv: PathBuf,
    pub svg: Option<PathBuf>,
}

/// Write `report.json` and `series.csv` into `dir`, plus `series.svg` when
/// asked and the report has a series to draw.
pub fn write_outputs(report: &ExperimentReport, dir: &Path, svg: bool) -> Result<OutputPaths> {
    std::fs::create_dir_all(dir).map_err(|e| Error::from(e).context(format!("creating {}", dir.display())))?;
    let paths = OutputPaths {
        report: dir.join("report.json"),
        csv: dir.join("series.csv"),
        svg: (svg && report.series.iter().any(|s| !s.is_empty())).then(|| dir.join("series.svg")),
    };
    std::fs::write(&paths.report, report.to_json()?)?;
    emit_csv(report, &paths.csv)?;
    if let Some(p) = &paths.svg {
        emit_svg(report, p)?;
    }
    Ok(paths)
}
