//! End-to-end tests of the scenario pipeline and the command-line binary.

use std::path::Path;
use std::process::Command;

use flows4::runner::{
    parse_scenario, resolve_out_dir, run_criterion, run_scenario, run_scenario_with, Faults, Kind, RunReport, Scenario, ScenarioError,
    Status, OUT_ENV, REPORT_FILE,
};

const BIN: &str = env!("CARGO_BIN_EXE_flows4");

fn read_report(dir: &Path) -> RunReport {
    let text = std::fs::read_to_string(dir.join(REPORT_FILE)).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn flows4(args: &[&str]) -> Command {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove(OUT_ENV);
    cmd
}

#[test]
fn parse_errors_are_distinct() {
    assert!(matches!(parse_scenario("{\"kind\": "), Err(ScenarioError::Syntax { .. })));
    assert!(matches!(
        parse_scenario(r#"{"kind":"statics","bogus":1}"#),
        Err(ScenarioError::UnknownKey(k)) if k == "bogus"
    ));
    assert!(matches!(
        parse_scenario(r#"{"kind":"evolve","dtau":10,"h":1}"#),
        Err(ScenarioError::Cfl(_))
    ));
    assert!(matches!(
        parse_scenario(r#"{"kind":"statics","n":2}"#),
        Err(ScenarioError::OutOfRange { .. })
    ));
    assert!(parse_scenario(r#"{"kind":"selftest"}"#).is_ok());
}

#[test]
fn identical_scenarios_give_identical_reports() {
    for kind in [Kind::Quantize, Kind::Amplitude, Kind::Lorentz] {
        let mut s = Scenario::defaults(kind);
        s.seed = 42;
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let r1 = run_scenario(&s, d1.path());
        let r2 = run_scenario(&s, d2.path());
        assert_eq!(r1.status, Status::Ok, "{kind:?}: {:?}", r1.error);
        assert_eq!(r1.reproducible_json(), r2.reproducible_json());
        // the report carries wall time; its numeric content is compared above
        for name in r1.artifacts.iter().filter(|n| n.as_str() != REPORT_FILE) {
            let a = std::fs::read(d1.path().join(name)).unwrap();
            let b = std::fs::read(d2.path().join(name)).unwrap();
            assert!(a == b, "{name} differs between runs");
        }
    }
}

#[test]
fn corrupted_hodge_sign_is_reported_by_name() {
    let clean = run_criterion(1, Faults::default());
    assert!(clean.passed());
    let broken = run_criterion(
        1,
        Faults {
            hodge_sign_flip: true,
        },
    );
    assert!(!broken.passed());
    let failed: Vec<_> = broken.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    assert_eq!(failed, ["hodge_involution"]);
}

#[test]
fn cfl_violation_exits_with_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"kind":"evolve","dtau":10,"h":1}"#).unwrap();
    let out = dir.path().join("out");
    let status = flows4(&["evolve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    assert!(!out.join(REPORT_FILE).exists(), "nothing runs before the gate");
}

#[test]
fn unknown_key_and_kind_mismatch_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"kind":"statics","radius":3}"#).unwrap();
    let o = flows4(&["statics", "--config", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown key"));

    std::fs::write(&cfg, r#"{"kind":"statics"}"#).unwrap();
    let o = flows4(&["lorentz", "--config", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn quantize_writes_integral_action_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = flows4(&["quantize", "--out", dir.path().to_str().unwrap()]).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let bytes = std::fs::read(dir.path().join("orbits.csv")).unwrap();
    assert!(!bytes.contains(&b'\r'), "LF line endings");
    let mut rdr = csv::Reader::from_reader(bytes.as_slice());
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(&header[..4], ["z", "radius", "s_cl_over_h", "energy"]);
    let mut count = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let z: f64 = rec[0].parse().unwrap();
        let radius: f64 = rec[1].parse().unwrap();
        let s_over_h: f64 = rec[2].parse().unwrap();
        let energy: f64 = rec[3].parse().unwrap();
        assert!((s_over_h - z).abs() <= 1e-8);
        assert!((radius - z * z).abs() <= 1e-10 * z * z);
        assert!((energy + 0.5 / (z * z)).abs() <= 1e-10);
        count += 1;
    }
    assert_eq!(count, 5);

    let report = read_report(dir.path());
    assert_eq!(report.status, Status::Ok);
    assert!(report.artifacts.iter().any(|a| a == "orbits.csv"));
}

#[test]
fn uniform_amplitude_vanishes() {
    let s = parse_scenario(r#"{"kind":"amplitude","density":{"type":"uniform"}}"#).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let report = run_scenario(&s, dir.path());
    assert_eq!(report.status, Status::Ok, "{:?}", report.error);
    let modulus = report.details["amplitude"]["modulus"].as_f64().unwrap();
    assert!(modulus <= 1e-12);
}

#[test]
fn output_directory_precedence() {
    let s = parse_scenario(r#"{"kind":"lorentz","out":"from_scenario"}"#).unwrap();
    assert_eq!(resolve_out_dir(None, None, &s), Path::new("from_scenario"));
    assert_eq!(resolve_out_dir(None, Some("env".into()), &s), Path::new("env"));
    assert_eq!(resolve_out_dir(Some("cli".into()), Some("env".into()), &s), Path::new("cli"));

    let dir = tempfile::tempdir().unwrap();
    let env_dir = dir.path().join("via_env");
    let o = Command::new(BIN).arg("lorentz").env(OUT_ENV, &env_dir).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(env_dir.join(REPORT_FILE).exists());
    assert!(env_dir.join("lorentz.csv").exists());
}

#[test]
fn every_kind_runs_with_defaults() {
    for kind in Kind::ALL {
        if matches!(kind, Kind::Selftest) {
            continue;
        }
        let dir = tempfile::tempdir().unwrap();
        let report = run_scenario(&Scenario::defaults(kind), dir.path());
        assert_eq!(report.status, Status::Ok, "{kind:?}: {:?}", report.error);
        assert_eq!(report.exit_code, 0);
        assert!(report.checks.iter().all(|c| c.passed));
        for name in &report.artifacts {
            let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
            if name.ends_with(".csv") {
                assert!(text.ends_with('\n') && !text.contains('\r'), "{name}");
            }
        }
        assert_eq!(read_report(dir.path()).reproducible_json(), report.reproducible_json());
    }
}

#[test]
fn injected_fault_fails_the_selftest_with_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let faults = Faults {
        hodge_sign_flip: true,
    };
    let report = run_scenario_with(&Scenario::defaults(Kind::Selftest), dir.path(), faults);
    assert_eq!(report.status, Status::InvariantViolation);
    assert_eq!(report.exit_code, 4);
    assert_eq!(report.failed_checks(), ["hodge_involution"]);
    assert!(report.error.as_deref().unwrap_or("").contains("hodge_involution"));
    let on_disk = read_report(dir.path());
    assert_eq!(on_disk.exit_code, 4);
}
