//! Discretised least-action functional for strings moving in a flow.
//!
//! A string is a polyline `x^0 .. x^N` in E(4). Each segment contributes
//!
//! ```text
//! m * G(mid) * |dx|  +  e * <A(mid), dx>
//! ```
//!
//! where `mid` is the segment midpoint, `G` the scalar mass weight and `A` the
//! charge covector supplied by an [`ActionField`]. A field term is added when
//! the field carries one.

mod lattice_field;
mod orbit;
mod relax;

pub use lattice_field::{
    alternate_relax, field_energy_split, m4_weight, AlternateOutcome, AlternateProblem, FieldEnergySplit,
    LatticeFlowSampler, ObserverLatticeField,
};
pub use orbit::{circular_orbit, CircularOrbit, OrbitSpec};
pub use relax::{relax_strings, RelaxOptions, RelaxOutcome};

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::exterior::{Point4, Vec4};
use crate::statics::{unit_flow, vacuum, FlowField, SourceKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoints {
    Fixed,
    Free,
}

/// A discretised string. Every segment satisfies the direction condition
/// `<c, dx> > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StringPath {
    nodes: Vec<Point4>,
    dtau: f64,
    mass: f64,
    charge: f64,
    endpoints: Endpoints,
}

impl StringPath {
    pub fn new(nodes: Vec<Point4>, dtau: f64, mass: f64, charge: f64, endpoints: Endpoints) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(FlowError::Shape(format!(
                "a string needs at least 2 segments, got {} nodes",
                nodes.len()
            )));
        }
        if !(dtau.is_finite() && dtau > 0.0) {
            return Err(FlowError::Domain(format!("parameter step must be positive, got {dtau}")));
        }
        if !(mass.is_finite() && mass >= 0.0) || !charge.is_finite() {
            return Err(FlowError::Domain("string mass must be nonnegative and charge finite".into()));
        }
        if nodes.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(FlowError::Domain("string nodes must be finite".into()));
        }
        let path = StringPath {
            nodes,
            dtau,
            mass,
            charge,
            endpoints,
        };
        path.check_direction()?;
        Ok(path)
    }

    /// Straight string from `a` to `b` with `segments` equal segments and the
    /// parameter step set to the flow advance per segment.
    pub fn straight(a: Point4, b: Point4, segments: usize, mass: f64, charge: f64) -> Result<Self> {
        let n = segments.max(1);
        let nodes: Vec<Point4> = (0..=n).map(|k| a + (b - a) * (k as f64 / n as f64)).collect();
        let dtau = vacuum().dot(&(b - a)) / n as f64;
        Self::new(nodes, dtau, mass, charge, Endpoints::Fixed)
    }

    pub fn nodes(&self) -> &[Point4] {
        &self.nodes
    }

    pub fn num_segments(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn dtau(&self) -> f64 {
        self.dtau
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn charge(&self) -> f64 {
        self.charge
    }

    pub fn endpoints(&self) -> Endpoints {
        self.endpoints
    }

    /// Same string with different node positions; the direction condition is
    /// rechecked.
    pub fn with_nodes(&self, nodes: Vec<Point4>) -> Result<Self> {
        Self::new(nodes, self.dtau, self.mass, self.charge, self.endpoints)
    }

    pub fn with_coupling(&self, mass: f64, charge: f64) -> Result<Self> {
        Self::new(self.nodes.clone(), self.dtau, mass, charge, self.endpoints)
    }

    /// `<c, x^{k+1} - x^k>` for every segment.
    pub fn direction_report(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| vacuum().dot(&(w[1] - w[0]))).collect()
    }

    /// `|<c, dx> - dtau|` for every segment.
    pub fn homogeneity_residuals(&self) -> Vec<f64> {
        self.direction_report().iter().map(|a| (a - self.dtau).abs()).collect()
    }

    fn check_direction(&self) -> Result<()> {
        if let Some((k, a)) = self.direction_report().iter().enumerate().find(|(_, &a)| !(a > 0.0)) {
            return Err(FlowError::Domain(format!(
                "segment {k} violates the direction condition (<c, dx> = {a:e})"
            )));
        }
        Ok(())
    }

    /// Resamples the polyline at equal steps of the flow parameter
    /// `<c, x - x^0>` and sets `dtau` to that step. The endpoints are kept.
    pub fn reparametrized(&self) -> Result<Self> {
        let adv = self.direction_report();
        let mut cum = vec![0.0];
        for a in &adv {
            cum.push(cum.last().unwrap() + a);
        }
        let total = *cum.last().unwrap();
        let n = self.num_segments();
        let step = total / n as f64;
        let mut nodes = Vec::with_capacity(n + 1);
        let mut seg = 0;
        for k in 0..=n {
            let target = step * k as f64;
            if k == n {
                nodes.push(*self.nodes.last().unwrap());
                break;
            }
            while seg + 1 < n && cum[seg + 1] < target {
                seg += 1;
            }
            let t = (target - cum[seg]) / adv[seg];
            nodes.push(self.nodes[seg] + (self.nodes[seg + 1] - self.nodes[seg]) * t);
        }
        Self::new(nodes, step, self.mass, self.charge, self.endpoints)
    }

    /// Indices of nodes that move under variation.
    pub fn movable(&self) -> std::ops::Range<usize> {
        match self.endpoints {
            Endpoints::Fixed => 1..self.nodes.len() - 1,
            Endpoints::Free => 0..self.nodes.len(),
        }
    }
}

/// Local data a string needs from a field.
pub trait ActionField {
    /// Scalar mass weight `G(x)` and its gradient.
    fn mass_weight(&self, x: &Point4) -> Result<(f64, Vec4)>;

    /// Charge covector `A(x)` and its Jacobian `J[(i, j)] = dA_i / dx_j`.
    fn charge_covector(&self, x: &Point4) -> Result<(Vec4, Matrix4<f64>)>;

    /// Field term of the action, when the field carries one.
    fn field_energy(&self) -> Result<Option<f64>> {
        Ok(None)
    }
}

/// Closed-form static flows: `G = |c + d phi_G| / |c|` and
/// `A = phi_E n + d chi`. Lattice flows must be wrapped in a
/// [`LatticeFlowSampler`].
impl ActionField for FlowField {
    fn mass_weight(&self, x: &Point4) -> Result<(f64, Vec4)> {
        let jet = self.potential(x, SourceKind::Mass)?;
        let g = vacuum() + jet.gradient;
        let norm = g.norm();
        let c = vacuum().norm();
        Ok((norm / c, jet.hessian * g / (norm * c)))
    }

    fn charge_covector(&self, x: &Point4) -> Result<(Vec4, Matrix4<f64>)> {
        let a = self.a_hat(x)?;
        let jet = self.potential(x, SourceKind::Charge)?;
        let mut jac = unit_flow() * jet.gradient.transpose();
        if let FlowField::Static { gauge: Some(chi), .. } = self {
            jac += chi.quad;
        }
        Ok((a, jac))
    }
}

/// Weight `G = 1` and `A = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct FlatField;

impl ActionField for FlatField {
    fn mass_weight(&self, _: &Point4) -> Result<(f64, Vec4)> {
        Ok((1.0, Vec4::zeros()))
    }

    fn charge_covector(&self, _: &Point4) -> Result<(Vec4, Matrix4<f64>)> {
        Ok((Vec4::zeros(), Matrix4::zeros()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StringContribution {
    pub mass: f64,
    pub charge: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ActionBreakdown {
    pub s_mass: f64,
    pub s_charge: f64,
    pub s_field: f64,
    pub s_total: f64,
    pub per_string: Vec<StringContribution>,
}

/// Mass and charge terms of one segment.
pub fn segment_terms(field: &dyn ActionField, a: &Point4, b: &Point4, mass: f64, charge: f64) -> Result<(f64, f64)> {
    let mid = (a + b) * 0.5;
    let dx = b - a;
    let sm = if mass != 0.0 {
        mass * field.mass_weight(&mid)?.0 * dx.norm()
    } else {
        0.0
    };
    let sc = if charge != 0.0 {
        charge * field.charge_covector(&mid)?.0.dot(&dx)
    } else {
        0.0
    };
    Ok((sm, sc))
}

pub fn action_value(strings: &[StringPath], field: &dyn ActionField) -> Result<ActionBreakdown> {
    let mut out = ActionBreakdown::default();
    for s in strings {
        let mut c = StringContribution::default();
        for w in s.nodes.windows(2) {
            let (sm, sc) = segment_terms(field, &w[0], &w[1], s.mass, s.charge)?;
            c.mass += sm;
            c.charge += sc;
        }
        out.s_mass += c.mass;
        out.s_charge += c.charge;
        out.per_string.push(c);
    }
    out.s_field = field.field_energy()?.unwrap_or(0.0);
    out.s_total = out.s_mass + out.s_charge + out.s_field;
    Ok(out)
}

/// `dS/dx^k` for every node of every string. Entries for fixed endpoints
/// are zero.
pub fn action_gradient(strings: &[StringPath], field: &dyn ActionField) -> Result<Vec<Vec<Vec4>>> {
    strings.iter().map(|s| string_gradient(s, field)).collect()
}

fn string_gradient(s: &StringPath, field: &dyn ActionField) -> Result<Vec<Vec4>> {
    let mut grad = vec![Vec4::zeros(); s.nodes.len()];
    for (k, w) in s.nodes.windows(2).enumerate() {
        let mid = (w[0] + w[1]) * 0.5;
        let dx = w[1] - w[0];
        if s.mass != 0.0 {
            let (g, dg) = field.mass_weight(&mid)?;
            let len = dx.norm();
            if len == 0.0 {
                return Err(FlowError::Singularity(format!("segment {k} has zero length")));
            }
            let half = dg * (0.5 * s.mass * len);
            let along = dx * (s.mass * g / len);
            grad[k] += half - along;
            grad[k + 1] += half + along;
        }
        if s.charge != 0.0 {
            let (a, jac) = field.charge_covector(&mid)?;
            let half = jac.transpose() * dx * (0.5 * s.charge);
            let along = a * s.charge;
            grad[k] += half - along;
            grad[k + 1] += half + along;
        }
    }
    if s.endpoints == Endpoints::Fixed {
        grad[0] = Vec4::zeros();
        *grad.last_mut().unwrap() = Vec4::zeros();
    }
    Ok(grad)
}

/// Largest node gradient norm over movable nodes.
pub fn max_gradient_norm(grad: &[Vec<Vec4>]) -> f64 {
    grad.iter().flatten().map(|g| g.norm()).fold(0.0, f64::max)
}
