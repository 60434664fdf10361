//! Discrete circular orbits of a charged string around a resting charge.
//!
//! The string is a helix: node `k` sits at observer position
//! `R (cos k theta, sin k theta, 0)` and flow coordinate `k a`. Every segment
//! then has the same action
//!
//! ```text
//! L(R) = m sqrt(c^2 + a^2) + e a phi_E(R cos(theta/2)),   c = 2 R sin(theta/2)
//! ```
//!
//! and by the half-turn symmetry of each node the interior gradient is purely
//! radial with magnitude `dL/dR`. The orbit is stationary at the root of
//! `dL/dR`, which is unique because `dL/dR` is strictly increasing in `R`.

use std::f64::consts::PI;

use serde::Serialize;

use super::{Endpoints, StringPath};
use crate::error::{FlowError, Result};
use crate::exterior::Vec3;
use crate::statics::{embed, static_flow, FlowField, Particle, ParticleSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitSpec {
    pub mass: f64,
    pub charge: f64,
    /// Charge of the resting source at the observer origin.
    pub center_charge: f64,
    pub segments_per_turn: usize,
    /// Flow advance `a` of each segment.
    pub flow_step: f64,
    pub turns: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CircularOrbit {
    pub radius: f64,
    pub theta: f64,
    /// `dL/dR` at the returned radius.
    pub balance_residual: f64,
    /// `sum p . dq` over one turn with `p = m dq / |dx|`.
    pub period_action: f64,
    #[serde(skip)]
    pub string: StringPath,
    #[serde(skip)]
    pub field: FlowField,
}

impl OrbitSpec {
    fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) || !(self.flow_step > 0.0) {
            return Err(FlowError::Domain("orbit needs positive mass and flow step".into()));
        }
        if self.segments_per_turn < 3 || self.turns == 0 {
            return Err(FlowError::Domain("orbit needs at least 3 segments per turn and one turn".into()));
        }
        if !(self.charge * self.center_charge < 0.0) {
            return Err(FlowError::Domain("a bound orbit needs opposite charges".into()));
        }
        Ok(())
    }

    pub fn theta(&self) -> f64 {
        2.0 * PI / self.segments_per_turn as f64
    }

    /// `dL/dR` of one segment.
    pub fn balance(&self, r: f64) -> f64 {
        let half = 0.5 * self.theta();
        let c = 2.0 * r * half.sin();
        let a = self.flow_step;
        self.mass * c * 2.0 * half.sin() / (c * c + a * a).sqrt()
            + self.charge * a * self.center_charge / (4.0 * PI * r * r * half.cos())
    }

    /// Period action of the helix of radius `r`.
    pub fn period_action(&self, r: f64) -> f64 {
        let c = 2.0 * r * (0.5 * self.theta()).sin();
        let a = self.flow_step;
        self.segments_per_turn as f64 * self.mass * c * c / (c * c + a * a).sqrt()
    }

    /// Root of [`OrbitSpec::balance`] by bisection to adjacent floats.
    pub fn balance_radius(&self) -> Result<f64> {
        self.validate()?;
        let mut hi = 1.0;
        while self.balance(hi) <= 0.0 {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(FlowError::numerical("no balance radius below 1e12"));
            }
        }
        let mut lo = hi;
        while self.balance(lo) >= 0.0 {
            lo *= 0.5;
            if lo < 1e-12 {
                return Err(FlowError::numerical("no balance radius above 1e-12"));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.balance(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(if self.balance(lo).abs() <= self.balance(hi).abs() { lo } else { hi })
    }

    /// Helix string of radius `r`, starting at angle 0 and flow coordinate 0.
    pub fn helix(&self, r: f64) -> Result<StringPath> {
        let theta = self.theta();
        let n = self.segments_per_turn * self.turns;
        let nodes = (0..=n)
            .map(|k| {
                let phi = theta * k as f64;
                embed(&Vec3::new(r * phi.cos(), r * phi.sin(), 0.0), self.flow_step * k as f64)
            })
            .collect();
        StringPath::new(nodes, 2.0 * self.flow_step, self.mass, self.charge, Endpoints::Fixed)
    }

    pub fn center_field(&self) -> Result<FlowField> {
        let set = ParticleSet::new(vec![Particle::new(Vec3::zeros(), 0.0, self.center_charge)])?;
        Ok(static_flow(&set))
    }
}

pub fn circular_orbit(spec: &OrbitSpec) -> Result<CircularOrbit> {
    let radius = spec.balance_radius()?;
    Ok(CircularOrbit {
        radius,
        theta: spec.theta(),
        balance_residual: spec.balance(radius),
        period_action: spec.period_action(radius),
        string: spec.helix(radius)?,
        field: spec.center_field()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{action_gradient, action_value, max_gradient_norm, relax_strings, RelaxOptions};

    fn spec() -> OrbitSpec {
        OrbitSpec {
            mass: 1.0,
            charge: -1.0,
            center_charge: 4.0 * PI,
            segments_per_turn: 24,
            flow_step: 0.3,
            turns: 2,
        }
    }

    /// Golden-section minimisation of the one-segment action evaluated through
    /// `action_value` on a single-segment helix piece.
    fn oracle_radius(s: &OrbitSpec) -> f64 {
        let field = s.center_field().unwrap();
        let l = |r: f64| {
            let h = OrbitSpec { turns: 1, ..*s }.helix(r).unwrap();
            let piece = StringPath::new(h.nodes()[..3].to_vec(), 1.0, s.mass, s.charge, Endpoints::Fixed).unwrap();
            action_value(&[piece], &field).unwrap().s_total
        };
        let (mut a, mut b) = (0.05, 20.0);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if l(c) < l(d) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn balance_radius_matches_minimum_of_segment_action() {
        let s = spec();
        let r = s.balance_radius().unwrap();
        let r_oracle = oracle_radius(&s);
        assert!((r - r_oracle).abs() <= 1e-6 * r, "{r} vs {r_oracle}");
    }

    #[test]
    fn orbit_is_stationary() {
        let o = circular_orbit(&spec()).unwrap();
        let g = action_gradient(std::slice::from_ref(&o.string), &o.field).unwrap();
        assert!(max_gradient_norm(&g) <= 1e-6, "{}", max_gradient_norm(&g));
        let out = relax_strings(std::slice::from_ref(&o.string), &o.field, &RelaxOptions { max_iters: 100, tol: 1e-6 }).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn off_balance_orbit_is_not_stationary() {
        let s = spec();
        let o = circular_orbit(&s).unwrap();
        let off = s.helix(o.radius * 1.05).unwrap();
        let g = action_gradient(&[off], &o.field).unwrap();
        assert!(max_gradient_norm(&g) > 1e-3);
    }

    #[test]
    fn like_charges_rejected() {
        let s = OrbitSpec { charge: 1.0, ..spec() };
        assert!(circular_orbit(&s).is_err());
    }
}
