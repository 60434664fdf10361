//! Scenario documents: JSON syntax, every key optional except `kind`,
//! unknown keys rejected, ranges validated after defaults are applied.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::RelaxOptions;
use crate::statics::Particle;
use crate::wavefield::WaveState;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },

    #[error("unknown key: {0}")]
    UnknownKey(String),

    #[error("invalid value: {0}")]
    Invalid(String),

    #[error("value out of range: {key} {message}")]
    OutOfRange { key: String, message: String },

    /// The evolution step violates the stability bound.
    #[error("configuration error: {0}")]
    Cfl(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Statics,
    Evolve,
    Relax,
    Alternate,
    Lorentz,
    Quantize,
    Amplitude,
    Selftest,
}

impl Kind {
    pub const ALL: [Kind; 8] = [
        Kind::Statics,
        Kind::Evolve,
        Kind::Relax,
        Kind::Alternate,
        Kind::Lorentz,
        Kind::Quantize,
        Kind::Amplitude,
        Kind::Selftest,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Kind::Statics => "statics",
            Kind::Evolve => "evolve",
            Kind::Relax => "relax",
            Kind::Alternate => "alternate",
            Kind::Lorentz => "lorentz",
            Kind::Quantize => "quantize",
            Kind::Amplitude => "amplitude",
            Kind::Selftest => "selftest",
        }
    }
}

/// Initial straight string, optionally bent by `bend * sin(pi t)` along
/// the observer axis 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StringInit {
    pub from: [f64; 4],
    pub to: [f64; 4],
    #[serde(default = "default_segments")]
    pub segments: usize,
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default)]
    pub charge: f64,
    #[serde(default)]
    pub bend: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    Uniform,
    RaisedCosine,
    VonMises { kappa: f64, mu: f64 },
    PointMass { phi0: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub kind: Kind,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; the command line and `FLOWS4_OUT` take precedence.
    #[serde(default)]
    pub out: Option<String>,

    /// Sites per lattice axis.
    #[serde(default = "default_n")]
    pub n: usize,
    /// Lattice spacing.
    #[serde(default = "one")]
    pub h: f64,
    /// Evolution step; defaults to `h / 2`.
    #[serde(default)]
    pub dtau: Option<f64>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Energy is recorded every `record_every` steps.
    #[serde(default = "default_record")]
    pub record_every: usize,

    #[serde(default = "default_particles")]
    pub particles: Vec<Particle>,
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
    /// `(polar, azimuthal)` quadrature orders.
    #[serde(default = "default_orders")]
    pub orders: [usize; 2],

    #[serde(default = "default_strings")]
    pub strings: Vec<StringInit>,
    #[serde(default)]
    pub relax: RelaxOptions,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default = "default_flow_extent")]
    pub flow_extent: f64,

    #[serde(default = "default_lorentz_count")]
    pub lorentz_count: usize,

    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default = "default_z")]
    pub z: Vec<i64>,

    #[serde(default = "default_density")]
    pub density: DensitySpec,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn one() -> f64 {
    1.0
}
fn default_n() -> usize {
    8
}
fn default_steps() -> usize {
    1000
}
fn default_record() -> usize {
    10
}
fn default_segments() -> usize {
    16
}
fn default_particles() -> Vec<Particle> {
    vec![Particle {
        position: [0.0; 3],
        mass: 1.0,
        charge: 1.0,
    }]
}
fn default_radii() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 4.0]
}
fn default_orders() -> [usize; 2] {
    [64, 128]
}
fn default_strings() -> Vec<StringInit> {
    vec![StringInit {
        from: [0.0, 1.0, 1.0, 0.0],
        to: [2.0, 2.0, 1.5, 1.0],
        segments: 16,
        mass: 1.0,
        charge: 0.0,
        bend: 0.2,
    }]
}
fn default_rounds() -> usize {
    3
}
fn default_flow_extent() -> f64 {
    4.0
}
fn default_lorentz_count() -> usize {
    1000
}
fn default_z() -> Vec<i64> {
    vec![1, 2, 3, 4, 5]
}
fn default_density() -> DensitySpec {
    DensitySpec::Uniform
}
fn default_grid() -> usize {
    crate::amplitude::DEFAULT_GRID
}
fn default_samples() -> usize {
    10_000
}

impl Scenario {
    /// Defaults for a kind.
    pub fn defaults(kind: Kind) -> Self {
        let text = format!("{{\"kind\":\"{}\"}}", kind.name());
        parse_scenario(&text).expect("defaults are valid")
    }

    pub fn dtau(&self) -> f64 {
        self.dtau.unwrap_or(0.5 * self.h)
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        let out = |key: &str, message: String| ScenarioError::OutOfRange {
            key: key.into(),
            message,
        };
        let positive = |key: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(out(key, format!("must be positive and finite, got {v}")))
            }
        };
        let max_n = if self.kind == Kind::Alternate { 64 } else { 32 };
        if !(4..=max_n).contains(&self.n) {
            return Err(out("n", format!("must lie in 4..={max_n}, got {}", self.n)));
        }
        positive("h", self.h)?;
        if let Some(d) = self.dtau {
            positive("dtau", d)?;
        }
        if !(1..=1_000_000).contains(&self.steps) {
            return Err(out("steps", format!("must lie in 1..=1000000, got {}", self.steps)));
        }
        if self.record_every == 0 {
            return Err(out("record_every", "must be at least 1".into()));
        }
        for (i, p) in self.particles.iter().enumerate() {
            if !p.position.iter().all(|c| c.is_finite()) || !p.charge.is_finite() || !(p.mass.is_finite() && p.mass >= 0.0) {
                return Err(out(&format!("particles[{i}]"), "needs finite data and nonnegative mass".into()));
            }
        }
        for (i, &r) in self.radii.iter().enumerate() {
            positive(&format!("radii[{i}]"), r)?;
        }
        if self.orders[0] < 8 || self.orders[1] < 16 {
            return Err(out("orders", format!("need at least (8, 16), got {:?}", self.orders)));
        }
        for (i, s) in self.strings.iter().enumerate() {
            let key = format!("strings[{i}]");
            if s.segments < 2 || s.segments > 4096 {
                return Err(out(&format!("{key}.segments"), format!("must lie in 2..=4096, got {}", s.segments)));
            }
            if !(s.mass.is_finite() && s.mass >= 0.0) || !s.charge.is_finite() || !s.bend.is_finite() {
                return Err(out(&key, "needs finite coupling, bend and nonnegative mass".into()));
            }
            if !s.from.iter().chain(&s.to).all(|c| c.is_finite()) {
                return Err(out(&key, "endpoints must be finite".into()));
            }
        }
        if self.relax.max_iters == 0 {
            return Err(out("relax.max_iters", "must be at least 1".into()));
        }
        positive("relax.tol", self.relax.tol)?;
        if !(1..=100).contains(&self.rounds) {
            return Err(out("rounds", format!("must lie in 1..=100, got {}", self.rounds)));
        }
        positive("flow_extent", self.flow_extent)?;
        if !(1..=1_000_000).contains(&self.lorentz_count) {
            return Err(out("lorentz_count", format!("must lie in 1..=1000000, got {}", self.lorentz_count)));
        }
        positive("hbar", self.hbar)?;
        positive("alpha", self.alpha)?;
        positive("mass", self.mass)?;
        if self.z.is_empty() {
            return Err(out("z", "needs at least one quantum number".into()));
        }
        if let Some(z) = self.z.iter().find(|&&z| !(1..=1000).contains(&z)) {
            return Err(out("z", format!("entries must lie in 1..=1000, got {z}")));
        }
        match self.density {
            DensitySpec::VonMises { kappa, mu } => {
                if !(kappa.is_finite() && kappa >= 0.0) || !mu.is_finite() {
                    return Err(out("density.kappa", format!("must be finite and nonnegative, got {kappa}")));
                }
            }
            DensitySpec::PointMass { phi0 } if !phi0.is_finite() => {
                return Err(out("density.phi0", "must be finite".into()));
            }
            _ => {}
        }
        if !(crate::amplitude::MIN_GRID..=1 << 20).contains(&self.grid) {
            return Err(out("grid", format!("must lie in 64..=1048576, got {}", self.grid)));
        }
        if !(1..=10_000_000).contains(&self.samples) {
            return Err(out("samples", format!("must lie in 1..=10000000, got {}", self.samples)));
        }
        if self.kind == Kind::Evolve {
            if self.n > 16 {
                return Err(out("n", format!("evolution runs on at most 16^4 sites, got {}", self.n)));
            }
            if self.dtau() > WaveState::max_step(self.h) {
                return Err(ScenarioError::Cfl(format!(
                    "dtau = {} exceeds the stability bound h/2 = {}",
                    self.dtau(),
                    WaveState::max_step(self.h)
                )));
            }
        }
        Ok(())
    }
}

/// Parses and validates a scenario document. Syntax errors, unknown keys and
/// out-of-range values are reported as distinct variants.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ScenarioError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let scenario: Scenario = serde_json::from_value(value).map_err(|e| {
        let msg = e.to_string();
        match msg.strip_prefix("unknown field ") {
            Some(rest) => ScenarioError::UnknownKey(rest.split(',').next().unwrap_or(rest).trim_matches('`').to_string()),
            None => ScenarioError::Invalid(msg),
        }
    })?;
    scenario.validate()?;
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_selftest() {
        let s = parse_scenario(r#"{"kind":"selftest"}"#).unwrap();
        assert_eq!(s.kind, Kind::Selftest);
        assert_eq!(s.n, 8);
        assert_eq!(s.dtau(), 0.5);
        assert_eq!(s.z, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn quantize_instance() {
        let s = parse_scenario(r#"{"kind":"quantize","hbar":1,"alpha":1,"z":[1,2,3]}"#).unwrap();
        assert_eq!(s.z, vec![1, 2, 3]);
    }

    #[test]
    fn cfl_gate() {
        let e = parse_scenario(r#"{"kind":"evolve","dtau":10,"h":1}"#).unwrap_err();
        assert!(matches!(e, ScenarioError::Cfl(_)), "{e}");
    }

    #[test]
    fn distinct_errors() {
        let e = parse_scenario("{\"kind\":\n \"statics\",,}").unwrap_err();
        assert!(matches!(e, ScenarioError::Syntax { line: 2, .. }), "{e}");
        let e = parse_scenario(r#"{"kind":"statics","bogus":1}"#).unwrap_err();
        assert_eq!(e, ScenarioError::UnknownKey("bogus".into()));
        let e = parse_scenario(r#"{"kind":"statics","strings":[{"from":[0,0,0,0],"to":[1,1,1,1],"wiggle":2}]}"#).unwrap_err();
        assert_eq!(e, ScenarioError::UnknownKey("wiggle".into()));
        let e = parse_scenario(r#"{"kind":"statics","h":-1}"#).unwrap_err();
        assert!(matches!(e, ScenarioError::OutOfRange { ref key, .. } if key == "h"), "{e}");
        let e = parse_scenario(r#"{"kind":"teleport"}"#).unwrap_err();
        assert!(matches!(e, ScenarioError::Invalid(_)), "{e}");
        // messages differ between the three classes
        let msgs: Vec<String> = [
            parse_scenario("{").unwrap_err(),
            parse_scenario(r#"{"kind":"statics","x":1}"#).unwrap_err(),
            parse_scenario(r#"{"kind":"statics","n":2}"#).unwrap_err(),
        ]
        .iter()
        .map(|e| e.to_string())
        .collect();
        assert!(msgs[0].starts_with("syntax error"));
        assert!(msgs[1].starts_with("unknown key"));
        assert!(msgs[2].starts_with("value out of range"));
    }

    #[test]
    fn defaults_round_trip_through_json() {
        for kind in Kind::ALL {
            let s = Scenario::defaults(kind);
            let text = serde_json::to_string(&s).unwrap();
            assert_eq!(parse_scenario(&text).unwrap(), s);
        }
    }
}
