//! Scenario runner and evaluation: scenario files, the simulation loop,
//! trajectory metrics and the per-run artifacts.

mod metrics;
mod record;
mod render;
mod run;
mod scenario;

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use metrics::{compute_ate, mean_heading_error, EstimatorMetrics, MetricsError, MetricsReport};
pub use record::{CsvError, RunRecord, StepRow, CSV_HEADER};
pub use render::render_svg;
pub use run::{run_scenario, RunOutput};
pub use scenario::{
    load_scenario, BuiltinMap, Drive, FusionSettings, Maneuvers, MapSource, MclInit, MclSettings, MeasurementSource,
    NavigationSettings, NdtSettings, ObstacleEvent, PoseSource, PreparedScenario, Scenario, ValidationErrors,
    SCHEMA_VERSION,
};

pub const RUN_CSV: &str = "run.csv";
pub const METRICS_JSON: &str = "metrics.json";
pub const RENDER_SVG: &str = "render.svg";
pub const SCENARIO_ECHO: &str = "scenario-echo.json";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("invalid scenario: {0}")]
    Invalid(ValidationErrors),
    #[error("step {step}: {message}")]
    Runtime { step: usize, message: String },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: CsvError },
}

fn write(path: &Path, contents: &str) -> Result<(), HarnessError> {
    fs::write(path, contents).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("plain data serializes") + "\n"
}

/// Writes run.csv, metrics.json, render.svg and scenario-echo.json into `dir`.
pub fn write_outputs(dir: &Path, prepared: &PreparedScenario, output: &RunOutput) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io { path: dir.to_path_buf(), source })?;
    let m = &output.metrics;
    write(&dir.join(RUN_CSV), &output.record.to_csv())?;
    write(&dir.join(METRICS_JSON), &to_json(m))?;
    write(&dir.join(RENDER_SVG), &render_svg(&prepared.map, &output.record, &m.blocked_zones, &m.waypoints))?;
    write(&dir.join(SCENARIO_ECHO), &to_json(&prepared.scenario))
}

/// Re-renders the SVG of a finished run directory from its artifacts.
pub fn render_run_dir(dir: &Path) -> Result<PathBuf, HarnessError> {
    let prepared = load_scenario(&dir.join(SCENARIO_ECHO))?;
    let csv_path = dir.join(RUN_CSV);
    let text = fs::read_to_string(&csv_path).map_err(|source| HarnessError::Io { path: csv_path.clone(), source })?;
    let record = RunRecord::from_csv(&text).map_err(|source| HarnessError::Csv { path: csv_path.clone(), source })?;
    let metrics_path = dir.join(METRICS_JSON);
    let text =
        fs::read_to_string(&metrics_path).map_err(|source| HarnessError::Io { path: metrics_path.clone(), source })?;
    let metrics: MetricsReport =
        serde_json::from_str(&text).map_err(|source| HarnessError::Parse { path: metrics_path.clone(), source })?;
    let out = dir.join(RENDER_SVG);
    write(&out, &render_svg(&prepared.map, &record, &metrics.blocked_zones, &metrics.waypoints))?;
    Ok(out)
}
