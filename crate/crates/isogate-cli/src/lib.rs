//! Scenario runner for the isogate simulator: loads JSON scenario configs,
//! executes them with seeded reproducibility, and writes CSV scan data, a
//! JSON summary (with the resolved config and its hash), and a text report.

pub mod config;
pub mod fixtures;
pub mod scenarios;

use std::path::{Path, PathBuf};

use isogate::error::{Error, Result};

use config::Scenario;
use scenarios::{run_scenario, RunArtifacts};

/// Paths written by one scenario run.
#[derive(Debug, Clone)]
pub struct WrittenArtifacts {
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub report: PathBuf,
    pub warnings: Vec<String>,
}

/// Load a scenario file, apply overrides, run it, and write the artifacts.
pub fn run_scenario_file(
    path: &Path,
    seed_override: Option<u64>,
    out_dir_override: Option<&Path>,
) -> Result<WrittenArtifacts> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidParameter(format!("cannot read {path:?}: {e}")))?;
    let mut scenario: Scenario = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidParameter(format!("config parse error in {path:?}: {e}")))?;
    if let Some(seed) = seed_override {
        scenario.seed = seed;
    }
    if let Some(dir) = out_dir_override {
        scenario.out_dir = dir.to_string_lossy().into_owned();
    }
    let artifacts = run_scenario(&mut scenario)?;
    write_artifacts(&scenario, &artifacts)
}

fn write_artifacts(scenario: &Scenario, artifacts: &RunArtifacts) -> Result<WrittenArtifacts> {
    let dir = PathBuf::from(&scenario.out_dir);
    std::fs::create_dir_all(&dir)
        .map_err(|e| Error::InvalidParameter(format!("cannot create {dir:?}: {e}")))?;
    let name = scenario.kind.name();
    let csv = dir.join(format!("{name}.csv"));
    let summary = dir.join(format!("{name}_summary.json"));
    let report = dir.join(format!("{name}_report.txt"));
    std::fs::write(&csv, &artifacts.csv)
        .map_err(|e| Error::InvalidParameter(format!("write {csv:?}: {e}")))?;
    std::fs::write(&summary, &artifacts.summary_json)
        .map_err(|e| Error::InvalidParameter(format!("write {summary:?}: {e}")))?;
    std::fs::write(&report, &artifacts.report)
        .map_err(|e| Error::InvalidParameter(format!("write {report:?}: {e}")))?;
    Ok(WrittenArtifacts { csv, summary, report, warnings: artifacts.warnings.clone() })
}
