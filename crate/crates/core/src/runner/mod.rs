//! Scenario parsing, execution of every experiment family, result
//! persistence and the self-test suite.

mod checks;
mod report;
mod run;
mod scenario;

use std::path::PathBuf;

pub use checks::{run_all, run_criterion, CriterionOutcome, Faults, CRITERIA};
pub use report::{csv_bytes, write_atomic, ArtifactSink, Check, RunReport, RunnerError, Status, Timing};
pub use run::{run_scenario, run_scenario_with, REPORT_FILE};
pub use scenario::{parse_scenario, DensitySpec, Kind, Scenario, ScenarioError, StringInit};

/// Environment variable naming the output directory.
pub const OUT_ENV: &str = "FLOWS4_OUT";
/// Output directory when nothing else names one.
pub const DEFAULT_OUT: &str = "flows4_out";

/// Output directory: the command line wins over the environment, which wins
/// over the scenario document.
pub fn resolve_out_dir(cli: Option<PathBuf>, env: Option<String>, scenario: &Scenario) -> PathBuf {
    cli.or_else(|| env.filter(|v| !v.is_empty()).map(PathBuf::from))
        .or_else(|| scenario.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}
