//! Executes one scenario and persists its tables and report.

use std::f64::consts::{PI, TAU};
use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use super::checks::{bessel_ratio, run_all, Faults};
use super::report::{ArtifactSink, Check, RunReport, RunnerError, Status, Timing};
use super::scenario::{DensitySpec, Kind, Scenario, StringInit};
use crate::action::{action_value, alternate_relax, relax_strings, AlternateProblem, StringPath};
use crate::amplitude::{amplitude_p, draw_samples, histogram, sample_amplitude, CircularDensity};
use crate::exterior::{Lattice, LatticeForm, Point4, SphereChart, Vec3, Vec4};
use crate::quantization::{quantized_orbits, QuantConfig};
use crate::relativity::{from_null, lorentz_apply, observer_coords, to_null, LorentzElement};
use crate::statics::{far_field_profile, gauss_flux, observer_axis, static_flow, ParticleSet, SourceKind};
use crate::wavefield::{evolve_wave, wave_energy, WaveState};

/// Name of the report file inside the output directory.
pub const REPORT_FILE: &str = "report.json";

struct Outcome {
    checks: Vec<Check>,
    timing: Vec<Timing>,
    details: serde_json::Value,
}

impl Outcome {
    fn new(checks: Vec<Check>, details: serde_json::Value) -> Self {
        Outcome {
            checks,
            timing: Vec::new(),
            details,
        }
    }
}

/// Runs `scenario`, writing CSV tables and `report.json` into `out_dir`.
/// The report is written whatever the outcome; the returned report carries
/// the status and exit code.
pub fn run_scenario(scenario: &Scenario, out_dir: &Path) -> RunReport {
    run_scenario_with(scenario, out_dir, Faults::default())
}

/// [`run_scenario`] with injected faults; only the self-test reacts to them.
pub fn run_scenario_with(scenario: &Scenario, out_dir: &Path, faults: Faults) -> RunReport {
    let start = Instant::now();
    let mut sink = ArtifactSink::new(out_dir);
    let result = match scenario.kind {
        Kind::Statics => statics(scenario, &mut sink),
        Kind::Evolve => evolve(scenario, &mut sink),
        Kind::Relax => relax(scenario, &mut sink),
        Kind::Alternate => alternate(scenario, &mut sink),
        Kind::Lorentz => lorentz(scenario, &mut sink),
        Kind::Quantize => quantize(scenario, &mut sink),
        Kind::Amplitude => amplitude(scenario, &mut sink),
        Kind::Selftest => selftest(faults),
    };
    let (status, error, outcome) = match result {
        Ok(o) => {
            let failed: Vec<&str> = o
                .checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| c.name.as_str())
                .chain(o.timing.iter().filter(|t| !t.passed).map(|t| t.name.as_str()))
                .collect();
            if failed.is_empty() {
                (Status::Ok, None, o)
            } else {
                let msg = format!("failed checks: {}", failed.join(", "));
                (Status::InvariantViolation, Some(msg), o)
            }
        }
        Err(e) => (e.status(), Some(e.to_string()), Outcome::new(Vec::new(), json!(null))),
    };
    let mut report = RunReport {
        kind: scenario.kind,
        scenario: scenario.clone(),
        status,
        exit_code: status.exit_code(),
        error,
        checks: outcome.checks,
        timing: outcome.timing,
        wall_seconds: 0.0,
        artifacts: sink.names().to_vec(),
        details: outcome.details,
    };
    report.artifacts.push(REPORT_FILE.to_string());
    report.wall_seconds = start.elapsed().as_secs_f64();
    if let Err(e) = sink.json(REPORT_FILE, &report) {
        report.status = Status::ConfigError;
        report.exit_code = report.status.exit_code();
        report.error = Some(format!("{}; report not written: {e}", report.error.unwrap_or_default()));
        report.artifacts.pop();
    }
    report
}

fn statics(s: &Scenario, sink: &mut ArtifactSink) -> Result<Outcome, RunnerError> {
    let set = ParticleSet::new(s.particles.clone())?;
    let field = static_flow(&set);
    #[derive(Serialize)]
    struct Row {
        radius: f64,
        mass_flux: f64,
        mass_enclosed: f64,
        charge_flux: f64,
        charge_enclosed: f64,
    }
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let mut checks = Vec::new();
    for &radius in &s.radii {
        let chart = SphereChart::new(Vec3::zeros(), radius, s.orders[0], s.orders[1])?;
        let m = gauss_flux(&field, &chart, SourceKind::Mass)?;
        let e = gauss_flux(&field, &chart, SourceKind::Charge)?;
        checks.push(Check::at_most(format!("mass_flux_r{radius}"), m.abs_error, 1e-6));
        checks.push(Check::at_most(format!("charge_flux_r{radius}"), e.abs_error, 1e-6));
        rows.push(Row {
            radius,
            mass_flux: m.measured,
            mass_enclosed: m.expected,
            charge_flux: e.measured,
            charge_enclosed: e.expected,
        });
        reports.push(m);
        reports.push(e);
    }
    sink.csv(
        "gauss_flux.csv",
        &["radius", "mass_flux", "mass_enclosed", "charge_flux", "charge_enclosed"],
        &rows,
    )?;
    sink.json("gauss_report.json", &reports)?;
    let far = far_field_profile(&field, &s.radii, (s.orders[0].min(32), s.orders[1].min(64)), 0.0)?;
    sink.csv("far_field.csv", &["radius", "max_deviation", "norm_deviation"], &far)?;
    Ok(Outcome::new(checks, json!({ "gauss": reports, "far_field": far })))
}

fn random_form(lat: &Lattice, rng: &mut ChaCha8Rng) -> crate::Result<LatticeForm> {
    LatticeForm::from_fn(lat, 1, |_, _| rng.gen_range(-1.0..1.0))
}

fn evolve(s: &Scenario, sink: &mut ArtifactSink) -> Result<Outcome, RunnerError> {
    let lat = Lattice::periodic(4, s.n, s.h)?;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let s0 = WaveState::new(random_form(&lat, &mut rng)?, random_form(&lat, &mut rng)?, s.dtau())?;
    let e0 = wave_energy(&s0)?;
    #[derive(Serialize)]
    struct Row {
        step: usize,
        tau: f64,
        energy: f64,
        relative_drift: f64,
    }
    let mut rows = vec![Row {
        step: 0,
        tau: 0.0,
        energy: e0,
        relative_drift: 0.0,
    }];
    let mut state = s0.clone();
    let mut done = 0;
    let mut drift: f64 = 0.0;
    while done < s.steps {
        let k = s.record_every.min(s.steps - done);
        state = evolve_wave(&state, k)?;
        done += k;
        let e = wave_energy(&state)?;
        let d = (e - e0).abs() / e0;
        drift = drift.max(d);
        rows.push(Row {
            step: done,
            tau: state.tau(),
            energy: e,
            relative_drift: d,
        });
    }
    sink.csv("energy.csv", &["step", "tau", "energy", "relative_drift"], &rows)?;
    let back = evolve_wave(&state.reversed(), s.steps)?.reversed();
    let reversal = back
        .field()
        .combine(1.0, s0.field(), -1.0)?
        .max_abs()
        .max(back.rate().combine(1.0, s0.rate(), -1.0)?.max_abs());
    let checks = vec![
        Check::at_most("energy_drift", drift, 1e-6),
        Check::at_most("time_reversal", reversal, 1e-12 * (s.steps as f64 / 1000.0).max(1.0)),
    ];
    Ok(Outcome::new(
        checks,
        json!({ "initial_energy": e0, "final_energy": rows.last().map(|r| r.energy), "max_relative_drift": drift }),
    ))
}

fn build_strings(inits: &[StringInit]) -> crate::Result<Vec<StringPath>> {
    inits
        .iter()
        .map(|init| {
            let s = StringPath::straight(
                Point4::from(init.from),
                Point4::from(init.to),
                init.segments,
                init.mass,
                init.charge,
            )?;
            if init.bend == 0.0 {
                return Ok(s);
            }
            let n = init.segments as f64;
            let nodes = s
                .nodes()
                .iter()
                .enumerate()
                .map(|(k, p)| p + observer_axis(0) * (init.bend * (PI * k as f64 / n).sin()))
                .collect();
            s.with_nodes(nodes)
        })
        .collect()
}

#[derive(Serialize)]
struct NodeRow {
    string: usize,
    node: usize,
    x0: f64,
    x1: f64,
    x2: f64,
    x3: f64,
    t: f64,
    x: f64,
    y: f64,
    z: f64,
}

const NODE_HEADER: [&str; 10] = ["string", "node", "x0", "x1", "x2", "x3", "t", "x", "y", "z"];

fn node_rows(strings: &[StringPath]) -> crate::Result<Vec<NodeRow>> {
    let mut rows = Vec::new();
    for (j, s) in strings.iter().enumerate() {
        let events = observer_coords(s)?;
        for (k, (p, e)) in s.nodes().iter().zip(events).enumerate() {
            rows.push(NodeRow {
                string: j,
                node: k,
                x0: p[0],
                x1: p[1],
                x2: p[2],
                x3: p[3],
                t: e.t,
                x: e.x,
                y: e.y,
                z: e.z,
            });
        }
    }
    Ok(rows)
}

fn monotone_excess(trace: &[f64]) -> f64 {
    trace
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0].abs().max(1.0))
        .fold(0.0, f64::max)
}

fn relax(s: &Scenario, sink: &mut ArtifactSink) -> Result<Outcome, RunnerError> {
    let field = static_flow(&ParticleSet::new(s.particles.clone())?);
    let strings = build_strings(&s.strings)?;
    let before = action_value(&strings, &field)?;
    let out = relax_strings(&strings, &field, &s.relax)?;
    let after = action_value(&out.strings, &field)?;
    sink.csv("strings.csv", &NODE_HEADER, &node_rows(&out.strings)?)?;
    #[derive(Serialize)]
    struct Row {
        iteration: usize,
        s_total: f64,
    }
    let trace: Vec<Row> = out
        .trace
        .iter()
        .enumerate()
        .map(|(iteration, &s_total)| Row { iteration, s_total })
        .collect();
    sink.csv("trace.csv", &["iteration", "s_total"], &trace)?;
    let checks = vec![
        Check::at_most("relaxation_residual", out.residual, s.relax.tol),
        Check::at_most("action_non_increasing", monotone_excess(&out.trace), 16.0 * f64::EPSILON),
    ];
    Ok(Outcome::new(
        checks,
        json!({
            "before": before,
            "after": after,
            "iterations": out.iterations,
            "converged": out.converged,
            "residual": out.residual,
            "flow_residual": out.flow_residual,
        }),
    ))
}

fn alternate(s: &Scenario, sink: &mut ArtifactSink) -> Result<Outcome, RunnerError> {
    let tolerance = 1e-12;
    let problem = AlternateProblem {
        lattice: Lattice::periodic(3, s.n, s.h)?,
        flow_extent: s.flow_extent,
        strings: build_strings(&s.strings)?,
        relax: s.relax,
        rounds: s.rounds,
        tolerance,
    };
    let out = alternate_relax(&problem)?;
    #[derive(Serialize)]
    struct Row {
        half_step: usize,
        s_mass: f64,
        s_charge: f64,
        s_field: f64,
        s_total: f64,
    }
    let rows: Vec<Row> = out
        .trace
        .iter()
        .enumerate()
        .map(|(half_step, b)| Row {
            half_step,
            s_mass: b.s_mass,
            s_charge: b.s_charge,
            s_field: b.s_field,
            s_total: b.s_total,
        })
        .collect();
    sink.csv("alternation.csv", &["half_step", "s_mass", "s_charge", "s_field", "s_total"], &rows)?;
    sink.csv("strings.csv", &NODE_HEADER, &node_rows(&out.strings)?)?;
    let totals: Vec<f64> = out.trace.iter().map(|b| b.s_total).collect();
    let checks = vec![
        Check::at_most("action_non_increasing", monotone_excess(&totals), tolerance),
        Check::exact("strings_converged", if out.strings_converged { 0.0 } else { 1.0 }),
    ];
    Ok(Outcome::new(
        checks,
        json!({ "trace": out.trace, "solver_iterations": out.solver_iterations }),
    ))
}

fn lorentz(s: &Scenario, sink: &mut ArtifactSink) -> Result<Outcome, RunnerError> {
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    #[derive(Serialize)]
    struct Row {
        index: usize,
        rapidity: f64,
        axis: usize,
        angle: f64,
        interval_before: f64,
        interval_after: f64,
        null_round_trip: f64,
    }
    let q = |a: &Vec4| a[0] * a[0] - a[1] * a[1] - a[2] * a[2] - a[3] * a[3];
    let mut rows = Vec::with_capacity(s.lorentz_count);
    let (mut worst_interval, mut worst_null, mut worst_defect): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for index in 0..s.lorentz_count {
        let rapidity = rng.gen_range(-1.5..1.5);
        let axis = rng.gen_range(1..=3);
        let angle = rng.gen_range(0.0..TAU);
        let rot_axis = Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let l = LorentzElement::boost(rapidity, axis)?.compose(&LorentzElement::rotation(rot_axis, angle)?);
        let v = Vec4::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let w = lorentz_apply(&l, &v)?;
        let (before, after) = (q(&v), q(&w));
        let null = (from_null(&to_null(&v)) - v).amax();
        worst_interval = worst_interval.max((after - before).abs());
        worst_null = worst_null.max(null);
        let (d0, d1) = l.defect();
        worst_defect = worst_defect.max(d0).max(d1);
        rows.push(Row {
            index,
            rapidity,
            axis,
            angle,
            interval_before: before,
            interval_after: after,
            null_round_trip: null,
        });
    }
    sink.csv(
        "lorentz.csv",
        &["index", "rapidity", "axis", "angle", "interval_before", "interval_after", "null_round_trip"],
        &rows,
    )?;
    let checks = vec![
        Check::at_most("interval_preserved", worst_interval, 1e-12),
        Check::at_most("group_defect", worst_defect, LorentzElement::TOL),
        Check::at_most("null_round_trip", worst_null, 1e-14),
    ];
    Ok(Outcome::new(checks, json!({ "count": s.lorentz_count })))
}

fn quantize(s: &Scenario, sink: &mut ArtifactSink) -> Result<Outcome, RunnerError> {
    let cfg = QuantConfig::new(s.hbar)?;
    let results = quantized_orbits(s.alpha, s.mass, &cfg, &s.z)?;
    #[derive(Serialize)]
    struct Row {
        z: i64,
        radius: f64,
        s_cl_over_h: f64,
        energy: f64,
        energy_numeric: f64,
        s_cl_numeric_over_h: f64,
    }
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let (mut integral, mut radius, mut energy, mut numeric): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for r in &results {
        match r {
            Ok(o) => {
                let z = o.z as f64;
                // Bohr oracle
                let r_z = z * z * s.hbar * s.hbar / (s.mass * s.alpha);
                let e_z = -s.mass * s.alpha * s.alpha / (2.0 * s.hbar * s.hbar * z * z);
                integral = integral.max((o.s_cl_over_h - z).abs());
                radius = radius.max((o.radius - r_z).abs() / r_z);
                energy = energy.max((o.energy - e_z).abs() / e_z.abs());
                numeric = numeric.max((o.energy_numeric - e_z).abs() / e_z.abs());
                rows.push(Row {
                    z: o.z,
                    radius: o.radius,
                    s_cl_over_h: o.s_cl_over_h,
                    energy: o.energy,
                    energy_numeric: o.energy_numeric,
                    s_cl_numeric_over_h: o.s_cl_numeric / cfg.h(),
                });
            }
            Err(f) => failures.push(f.clone()),
        }
    }
    sink.csv(
        "orbits.csv",
        &["z", "radius", "s_cl_over_h", "energy", "energy_numeric", "s_cl_numeric_over_h"],
        &rows,
    )?;
    let checks = vec![
        Check::exact("orbit_failures", failures.len() as f64),
        Check::at_most("action_integral", integral, 1e-8),
        Check::at_most("radius_vs_bohr", radius, 1e-10),
        Check::at_most("energy_vs_bohr", energy, 1e-10),
        Check::at_most("energy_numeric_vs_bohr", numeric, 1e-4),
    ];
    Ok(Outcome::new(checks, json!({ "orbits": results.iter().filter_map(|r| r.as_ref().ok()).collect::<Vec<_>>(), "failures": failures })))
}

fn amplitude(s: &Scenario, sink: &mut ArtifactSink) -> Result<Outcome, RunnerError> {
    let analytic = |f: fn(f64) -> f64| CircularDensity::analytic(f, s.grid);
    // closed-form amplitude and the tolerance it is held to
    let (rho, oracle, tol) = match s.density {
        DensitySpec::Uniform => (analytic(|_| 1.0 / TAU)?, Complex64::new(0.0, 0.0), 1e-12),
        DensitySpec::RaisedCosine => (analytic(|phi| (1.0 + phi.cos()) / TAU)?, Complex64::new(0.5, 0.0), 1e-10),
        DensitySpec::VonMises { kappa, mu } => (
            CircularDensity::von_mises(kappa, mu, s.grid)?,
            Complex64::from_polar(bessel_ratio(kappa), mu),
            1e-8,
        ),
        DensitySpec::PointMass { phi0 } => (CircularDensity::point_mass(phi0), Complex64::from_polar(1.0, phi0), 1e-12),
    };
    let p = amplitude_p(&rho)?;
    let samples = draw_samples(&rho, s.samples, s.seed)?;
    let est = sample_amplitude(&samples)?;
    let hist = histogram(&samples, s.grid)?;
    let ph = amplitude_p(&hist)?;
    #[derive(Serialize)]
    struct Row {
        phi: f64,
        density: f64,
        histogram: f64,
    }
    let hv = hist.grid_values().expect("histograms are grids");
    let rows: Vec<Row> = match rho.grid_values() {
        Some(v) => v
            .iter()
            .zip(&hv)
            .enumerate()
            .map(|(j, (&density, &histogram))| Row {
                phi: TAU * j as f64 / s.grid as f64,
                density,
                histogram,
            })
            .collect(),
        None => Vec::new(),
    };
    if !rows.is_empty() {
        sink.csv("density.csv", &["phi", "density", "histogram"], &rows)?;
    }
    let n = s.samples as f64;
    // cell-uniform draws shrink the amplitude by at most (pi / grid)^2 / 6
    let cell = (PI / s.grid as f64).powi(2);
    let checks = vec![
        Check::at_most("modulus_at_most_one", p.modulus, 1.0),
        Check::at_most("amplitude_vs_oracle", (p.value() - oracle).norm(), tol),
        Check::at_most("sampling_estimator", (est.amplitude.value() - p.value()).norm(), 3.0 / n.sqrt() + cell),
        Check::at_most("histogram_vs_samples", (ph.value() - est.amplitude.value()).norm(), PI / s.grid as f64),
    ];
    Ok(Outcome::new(
        checks,
        json!({ "amplitude": p, "sample_estimate": est, "histogram_amplitude": ph }),
    ))
}

fn selftest(faults: Faults) -> Result<Outcome, RunnerError> {
    let criteria = run_all(faults);
    let mut checks = Vec::new();
    let mut timing = Vec::new();
    for c in &criteria {
        checks.extend(c.checks.iter().cloned());
        timing.push(c.timing.clone());
    }
    Ok(Outcome {
        checks,
        timing,
        details: json!({ "criteria": criteria }),
    })
}
