//! Sweep execution and artifact IO.
//!
//! Runs are independent (each owns its state and is a pure function of its
//! config), so the sweep is data-parallel. With the `parallel` feature the
//! points run on a rayon pool; without it they run sequentially — results
//! are identical either way, and files are written atomically
//! (temp + rename) after each run completes.

use std::fs;
use std::path::{Path, PathBuf};

use crate::analytics::{self, GroupSummary};
use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::sim::{self, RunArtifact, Summary};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Executes every config, preserving input order in the result.
///
/// `workers` limits parallelism (0 or `None` = rayon default); ignored in
/// sequential builds.
pub fn run_all(configs: &[SimConfig], workers: Option<usize>) -> Result<Vec<RunArtifact>> {
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.unwrap_or(0))
            .build()
            .map_err(|e| Error::Init(format!("thread pool: {e}")))?;
        pool.install(|| configs.par_iter().map(sim::run).collect())
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        configs.iter().map(sim::run).collect()
    }
}

/// Writes `content` to `path` atomically (same-directory temp + rename).
pub fn write_atomic(path: &Path, content: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, content).map_err(|e| Error::io(tmp.display().to_string(), e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Writes one run's artifact files under `dir/<point_name>/`:
/// `manifest.json`, `metrics.csv`, `summary.json`. Returns the point
/// directory.
pub fn write_artifact(dir: &Path, artifact: &RunArtifact) -> Result<PathBuf> {
    let point_dir = dir.join(artifact.summary.point.as_str());
    fs::create_dir_all(&point_dir).map_err(|e| Error::io(point_dir.display().to_string(), e))?;
    write_atomic(
        &point_dir.join("manifest.json"),
        serde_json::to_string_pretty(&artifact.manifest)?.as_bytes(),
    )?;
    write_atomic(
        &point_dir.join("metrics.csv"),
        analytics::metrics_to_csv(&artifact.metrics).as_bytes(),
    )?;
    write_atomic(
        &point_dir.join("summary.json"),
        serde_json::to_string_pretty(&artifact.summary)?.as_bytes(),
    )?;
    if let Some(log) = &artifact.decision_log {
        write_atomic(&point_dir.join("decisions.csv"), log.as_bytes())?;
    }
    Ok(point_dir)
}

/// Writes the cross-run aggregate (`aggregate.json`) for a finished sweep.
pub fn write_aggregate(dir: &Path, summaries: &[Summary]) -> Result<Vec<GroupSummary>> {
    let groups = analytics::summarize_groups(summaries);
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    write_atomic(
        &dir.join("aggregate.json"),
        serde_json::to_string_pretty(&groups)?.as_bytes(),
    )?;
    Ok(groups)
}

/// Loads a run summary back from a point directory (as written by
/// [`write_artifact`]).
pub fn read_summary(point_dir: &Path) -> Result<Summary> {
    let path = point_dir.join("summary.json");
    let json = fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(serde_json::from_str(&json)?)
}

/// Loads a run manifest back from a point directory.
pub fn read_manifest(point_dir: &Path) -> Result<sim::Manifest> {
    let path = point_dir.join("manifest.json");
    let json = fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(serde_json::from_str(&json)?)
}
