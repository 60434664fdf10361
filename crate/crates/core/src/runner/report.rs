//! Run reports and atomic artifact output.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::scenario::{Kind, Scenario, ScenarioError};
use crate::error::FlowError;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),

    #[error(transparent)]
    Flow(#[from] FlowError),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {message}")]
    Csv { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    ConfigError,
    NumericalFailure,
    InvariantViolation,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::ConfigError => 2,
            Status::NumericalFailure => 3,
            Status::InvariantViolation => 4,
        }
    }
}

impl RunnerError {
    pub fn status(&self) -> Status {
        match self {
            RunnerError::Scenario(_) | RunnerError::Io { .. } | RunnerError::Csv { .. } => Status::ConfigError,
            RunnerError::Flow(e) => match e {
                FlowError::Config(_) | FlowError::Domain(_) | FlowError::Shape(_) | FlowError::Degree(_) => Status::ConfigError,
                FlowError::Numerical { .. } | FlowError::Singularity(_) | FlowError::Normalization { .. } => {
                    Status::NumericalFailure
                }
                FlowError::Invariant(_) => Status::InvariantViolation,
            },
        }
    }
}

/// One measured quantity against its tolerance. `passed` is false for NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// NaN is written as `null`.
    #[serde(deserialize_with = "nullable_f64")]
    pub measured: f64,
    #[serde(deserialize_with = "nullable_f64")]
    pub tolerance: f64,
}

fn nullable_f64<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

impl Check {
    pub fn at_most(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            passed: measured <= tolerance,
            measured,
            tolerance,
        }
    }

    /// Bit-exact requirement: `measured` must be zero.
    pub fn exact(name: impl Into<String>, measured: f64) -> Self {
        Self::at_most(name, measured, 0.0)
    }

    /// A failure recorded because the computation behind the check errored.
    pub fn errored(name: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed: false,
            measured: f64::NAN,
            tolerance: f64::NAN,
        }
    }
}

/// Wall time of a stage against its budget. Kept apart from [`Check`] so
/// that the numeric part of a report is reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub name: String,
    pub seconds: f64,
    pub budget_seconds: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub kind: Kind,
    pub scenario: Scenario,
    pub status: Status,
    pub exit_code: i32,
    pub error: Option<String>,
    pub checks: Vec<Check>,
    pub timing: Vec<Timing>,
    pub wall_seconds: f64,
    /// File names relative to the output directory.
    pub artifacts: Vec<String>,
    pub details: serde_json::Value,
}

impl RunReport {
    pub fn failed_checks(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .chain(self.timing.iter().filter(|t| !t.passed).map(|t| t.name.as_str()))
            .collect()
    }

    /// JSON with the timing fields removed; identical across runs of the same
    /// scenario and seed.
    pub fn reproducible_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("wall_seconds");
            if let Some(t) = obj.get_mut("timing").and_then(|t| t.as_array_mut()) {
                for entry in t {
                    if let Some(e) = entry.as_object_mut() {
                        e.remove("seconds");
                        e.remove("passed");
                    }
                }
            }
        }
        serde_json::to_string_pretty(&v).expect("report serializes")
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunnerError + '_ {
    move |source| RunnerError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `bytes` to `dir/name` through a temporary file in the same
/// directory followed by a rename, so readers never see a partial file.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, RunnerError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(&path))?;
    tmp.as_file().sync_all().map_err(io_err(&path))?;
    tmp.persist(&path).map_err(|e| RunnerError::Io {
        path: path.clone(),
        source: e.error,
    })?;
    Ok(path)
}

/// CSV with a header row and LF record terminators.
pub fn csv_bytes<T: Serialize>(header: &[&str], rows: &[T]) -> Result<Vec<u8>, String> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).map_err(|e| e.to_string())?;
    for r in rows {
        w.serialize(r).map_err(|e| e.to_string())?;
    }
    w.into_inner().map_err(|e| e.to_string())
}

/// Collects artifacts for one run.
#[derive(Debug)]
pub struct ArtifactSink {
    dir: PathBuf,
    names: Vec<String>,
}

impl ArtifactSink {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ArtifactSink {
            dir: dir.into(),
            names: Vec::new(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn csv<T: Serialize>(&mut self, name: &str, header: &[&str], rows: &[T]) -> Result<(), RunnerError> {
        let bytes = csv_bytes(header, rows).map_err(|message| RunnerError::Csv {
            path: self.dir.join(name),
            message,
        })?;
        write_atomic(&self.dir, name, &bytes)?;
        self.names.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), RunnerError> {
        let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
        text.push('\n');
        write_atomic(&self.dir, name, text.as_bytes())?;
        self.names.push(name.to_string());
        Ok(())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}
