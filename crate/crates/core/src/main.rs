//! `flows4 <kind> [--config <path>] [--out <dir>] [--seed N]`
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 invariant violation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use flows4::runner::{parse_scenario, resolve_out_dir, run_scenario, Kind, RunReport, Scenario, Status, OUT_ENV, REPORT_FILE};

#[derive(Debug, Parser)]
#[command(name = "flows4", version, about = "Dynamical-flow experiments and self-test")]
struct Cli {
    /// Experiment family.
    #[arg(value_parser = parse_kind)]
    kind: Kind,

    /// Scenario document (JSON). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory; overrides FLOWS4_OUT and the scenario's `out`.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_kind(s: &str) -> Result<Kind, String> {
    Kind::ALL
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| format!("unknown kind {s:?}; expected one of {}", Kind::ALL.map(|k| k.name()).join(", ")))
}

fn load(cli: &Cli) -> Result<Scenario, String> {
    let mut scenario = match &cli.config {
        None => Scenario::defaults(cli.kind),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            let s = parse_scenario(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            if s.kind != cli.kind {
                return Err(format!(
                    "{}: scenario kind {} does not match command {}",
                    path.display(),
                    s.kind.name(),
                    cli.kind.name()
                ));
            }
            s
        }
    };
    if let Some(seed) = cli.seed {
        scenario.seed = seed;
    }
    Ok(scenario)
}

fn print_summary(report: &RunReport, out: &std::path::Path) {
    if report.kind == Kind::Selftest {
        if let Some(criteria) = report.details.get("criteria").and_then(|c| c.as_array()) {
            for (c, t) in criteria.iter().zip(&report.timing) {
                let id = c.get("id").and_then(|v| v.as_u64()).unwrap_or(0);
                let title = c.get("title").and_then(|v| v.as_str()).unwrap_or("");
                let ok = c
                    .get("checks")
                    .and_then(|v| v.as_array())
                    .is_some_and(|checks| checks.iter().all(|k| k.get("passed") == Some(&serde_json::Value::Bool(true))));
                let verdict = if ok && t.passed { "PASS" } else { "FAIL" };
                println!("criterion {id} ({title}): {verdict} in {:.3} s", t.seconds);
            }
        }
    } else {
        for c in &report.checks {
            println!(
                "{} {}: measured {:e}, tolerance {:e}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.measured,
                c.tolerance
            );
        }
    }
    if let Some(e) = &report.error {
        eprintln!("error: {e}");
    }
    println!(
        "{}: {:?}, exit {}, report {}",
        report.kind.name(),
        report.status,
        report.exit_code,
        out.join(REPORT_FILE).display()
    );
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let scenario = match load(&cli) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(Status::ConfigError.exit_code() as u8);
        }
    };
    let out = resolve_out_dir(cli.out.clone(), std::env::var(OUT_ENV).ok(), &scenario);
    let report = run_scenario(&scenario, &out);
    print_summary(&report, &out);
    ExitCode::from(report.exit_code as u8)
}
