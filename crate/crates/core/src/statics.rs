//! Static flows sourced by resting particles, the gradient/remainder split of
//! lattice flows, Gauss-law flux extraction and the observer projection.
//!
//! Particle positions live in the observer space E(3), the hyperplane of E(4)
//! orthogonal to the vacuum flow `c = dx0 + dx1 + dx2 + dx3`. It is
//! coordinatised by the orthonormal Hadamard frame
//!
//! ```text
//! f1 = (1, 1,-1,-1)/2   f2 = (1,-1, 1,-1)/2   f3 = (1,-1,-1, 1)/2
//! ```
//!
//! which together with the unit flow `n = c/2` is an orthonormal basis.
//! Potentials follow the convention `phi(x) = -sum_i q_i / (4 pi |x - p_i|)`,
//! so the outward flux of `d phi` through a closed surface is `+sum q_i`.

use std::f64::consts::PI;

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::exterior::{
    codiff, ext_d, surface_flux, Boundary, CovectorField3, LatticeForm, Point4, Signature, SphereChart,
    Vec3, Vec4,
};
use crate::solver::solve_poisson;

/// Poisson tolerance on the relative residual.
pub const POISSON_TOL: f64 = 1e-10;
pub const POISSON_MAX_ITER: usize = 20_000;

/// The vacuum flow covector `c`.
pub fn vacuum() -> Vec4 {
    Vec4::new(1.0, 1.0, 1.0, 1.0)
}

/// Unit flow covector `n = c / |c|`.
pub fn unit_flow() -> Vec4 {
    Vec4::new(0.5, 0.5, 0.5, 0.5)
}

const OBSERVER_FRAME: [[f64; 4]; 3] = [
    [0.5, 0.5, -0.5, -0.5],
    [0.5, -0.5, 0.5, -0.5],
    [0.5, -0.5, -0.5, 0.5],
];

/// Observer-space frame vector `f_i`, `i` in 0..3.
pub fn observer_axis(i: usize) -> Vec4 {
    Vec4::from(OBSERVER_FRAME[i])
}

/// Point of E(4) with observer coordinates `q` and flow coordinate `s`
/// (the component along the unit flow).
pub fn embed(q: &Vec3, s: f64) -> Point4 {
    (0..3).fold(s * unit_flow(), |acc, i| acc + q[i] * observer_axis(i))
}

/// Observer coordinates of a point of E(4).
pub fn observer_part(x: &Point4) -> Vec3 {
    Vec3::new(
        x.dot(&observer_axis(0)),
        x.dot(&observer_axis(1)),
        x.dot(&observer_axis(2)),
    )
}

/// Component of `x` along the unit flow.
pub fn flow_part(x: &Point4) -> f64 {
    x.dot(&unit_flow())
}

/// Orthogonal projection of a covector onto the observer space,
/// `w - <w, n> n`.
pub fn project_observer(w: &Vec4) -> Vec4 {
    let n = unit_flow();
    w - w.dot(&n) * n
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Particle {
    pub position: [f64; 3],
    #[serde(default)]
    pub mass: f64,
    #[serde(default)]
    pub charge: f64,
}

impl Particle {
    pub fn new(position: Vec3, mass: f64, charge: f64) -> Self {
        Particle {
            position: [position.x, position.y, position.z],
            mass,
            charge,
        }
    }

    pub fn pos(&self) -> Vec3 {
        Vec3::from(self.position)
    }
}

/// Resting particles with an active subset.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParticleSet {
    particles: Vec<Particle>,
    active: Vec<usize>,
}

impl ParticleSet {
    pub fn new(particles: Vec<Particle>) -> Result<Self> {
        for (i, p) in particles.iter().enumerate() {
            if !(p.position.iter().all(|c| c.is_finite()) && p.mass.is_finite() && p.charge.is_finite()) {
                return Err(FlowError::Domain(format!("particle {i} has non-finite data")));
            }
            if p.mass < 0.0 {
                return Err(FlowError::Domain(format!("particle {i} has negative mass {}", p.mass)));
            }
            for (j, q) in particles[..i].iter().enumerate() {
                if p.position == q.position {
                    return Err(FlowError::Domain(format!("particles {j} and {i} coincide")));
                }
            }
        }
        let active = (0..particles.len()).collect();
        Ok(ParticleSet { particles, active })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Restricts the set to the listed indices.
    pub fn with_active(mut self, active: Vec<usize>) -> Result<Self> {
        if let Some(&i) = active.iter().find(|&&i| i >= self.particles.len()) {
            return Err(FlowError::Domain(format!("active index {i} out of range")));
        }
        self.active = active;
        Ok(self)
    }

    pub fn all(&self) -> &[Particle] {
        &self.particles
    }

    pub fn active(&self) -> impl Iterator<Item = &Particle> {
        self.active.iter().map(|&i| &self.particles[i])
    }

    pub fn total_mass(&self) -> f64 {
        self.active().map(|p| p.mass).sum()
    }

    pub fn total_charge(&self) -> f64 {
        self.active().map(|p| p.charge).sum()
    }

    /// Union of the active particles of both sets.
    pub fn union(&self, other: &ParticleSet) -> Result<ParticleSet> {
        ParticleSet::new(self.active().chain(other.active()).copied().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Mass,
    Charge,
}

/// Quadratic gauge function `chi(x) = x^T Q x / 2 + b^T x`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticGauge {
    pub quad: Matrix4<f64>,
    pub linear: Vec4,
}

impl QuadraticGauge {
    pub fn new(quad: Matrix4<f64>, linear: Vec4) -> Self {
        QuadraticGauge {
            quad: 0.5 * (quad + quad.transpose()),
            linear,
        }
    }

    pub fn value(&self, x: &Point4) -> f64 {
        0.5 * x.dot(&(self.quad * x)) + self.linear.dot(x)
    }

    pub fn gradient(&self, x: &Point4) -> Vec4 {
        self.quad * x + self.linear
    }
}

/// Potential value, 4-D gradient and 4-D Hessian of `-sum q/(4 pi r)` where
/// `r` is the observer-space distance.
#[derive(Debug, Clone, Copy)]
pub struct PotentialJet {
    pub value: f64,
    pub gradient: Vec4,
    pub hessian: Matrix4<f64>,
}

/// A flow covector field: the vacuum plus a perturbation.
#[derive(Debug, Clone, PartialEq)]
pub enum FlowField {
    /// Closed-form static field of resting point sources.
    Static {
        sources: ParticleSet,
        gauge: Option<QuadraticGauge>,
    },
    /// A perturbation sampled as a 1-cochain on a lattice.
    Lattice { perturbation: LatticeForm },
}

/// Builds the static flow of a particle set.
pub fn static_flow(particles: &ParticleSet) -> FlowField {
    FlowField::Static {
        sources: particles.clone(),
        gauge: None,
    }
}

impl FlowField {
    pub fn vacuum_only() -> Self {
        static_flow(&ParticleSet::empty())
    }

    pub fn lattice(perturbation: LatticeForm) -> Result<Self> {
        if perturbation.degree() != 1 {
            return Err(FlowError::Degree("flow perturbation must be a 1-form".into()));
        }
        Ok(FlowField::Lattice { perturbation })
    }

    /// Adds `d chi` to the electromagnetic part.
    pub fn with_gauge(self, chi: QuadraticGauge) -> Result<Self> {
        match self {
            FlowField::Static { sources, .. } => Ok(FlowField::Static {
                sources,
                gauge: Some(chi),
            }),
            FlowField::Lattice { .. } => Err(FlowError::Domain("gauge shifts apply to static flows only".into())),
        }
    }

    pub fn sources(&self) -> Option<&ParticleSet> {
        match self {
            FlowField::Static { sources, .. } => Some(sources),
            FlowField::Lattice { .. } => None,
        }
    }

    fn static_parts(&self) -> Result<(&ParticleSet, Option<&QuadraticGauge>)> {
        match self {
            FlowField::Static { sources, gauge } => Ok((sources, gauge.as_ref())),
            FlowField::Lattice { .. } => Err(FlowError::Domain(
                "pointwise evaluation needs a closed-form flow; use site values for lattice flows".into(),
            )),
        }
    }

    /// Potential jet for one source kind at `x`.
    pub fn potential(&self, x: &Point4, kind: SourceKind) -> Result<PotentialJet> {
        let (sources, _) = self.static_parts()?;
        let q = observer_part(x);
        let mut value = 0.0;
        let mut gradient = Vec4::zeros();
        let mut hessian = Matrix4::zeros();
        let frame = Matrix4::from_rows(&[
            observer_axis(0).transpose(),
            observer_axis(1).transpose(),
            observer_axis(2).transpose(),
            Vector4::zeros().transpose(),
        ]);
        for p in sources.active() {
            let strength = match kind {
                SourceKind::Mass => p.mass,
                SourceKind::Charge => p.charge,
            };
            if strength == 0.0 {
                continue;
            }
            let d3 = q - p.pos();
            let r = d3.norm();
            if r < 1e-12 {
                return Err(FlowError::Singularity(format!(
                    "flow evaluated at a source located at {:?}",
                    p.position
                )));
            }
            let k = strength / (4.0 * PI);
            // 4-D displacement within the observer space
            let d = frame.transpose() * Vec4::new(d3.x, d3.y, d3.z, 0.0);
            value -= k / r;
            gradient += k * d / r.powi(3);
            let proj = frame.transpose() * frame;
            hessian += k * (proj / r.powi(3) - 3.0 * d * d.transpose() / r.powi(5));
        }
        Ok(PotentialJet {
            value,
            gradient,
            hessian,
        })
    }

    /// Gravitational part `G = c + d phi_G` (closed).
    pub fn g_hat(&self, x: &Point4) -> Result<Vec4> {
        Ok(vacuum() + self.potential(x, SourceKind::Mass)?.gradient)
    }

    /// Electromagnetic part `A = phi_E n + d chi`.
    pub fn a_hat(&self, x: &Point4) -> Result<Vec4> {
        let (_, gauge) = self.static_parts()?;
        let phi = self.potential(x, SourceKind::Charge)?.value;
        let mut a = phi * unit_flow();
        if let Some(chi) = gauge {
            a += chi.gradient(x);
        }
        Ok(a)
    }

    /// Full flow `B = G + A`.
    pub fn b_hat(&self, x: &Point4) -> Result<Vec4> {
        Ok(self.g_hat(x)? + self.a_hat(x)?)
    }

    /// `B - c`.
    pub fn perturbation_at(&self, x: &Point4) -> Result<Vec4> {
        Ok(self.b_hat(x)? - vacuum())
    }

    pub fn g_observer(&self, x: &Point4) -> Result<Vec4> {
        Ok(project_observer(&self.g_hat(x)?))
    }

    pub fn a_observer(&self, x: &Point4) -> Result<Vec4> {
        Ok(project_observer(&self.a_hat(x)?))
    }

    pub fn b_observer(&self, x: &Point4) -> Result<Vec4> {
        Ok(project_observer(&self.b_hat(x)?))
    }

    /// Pointwise flow at a lattice site: vacuum plus the cochain divided by
    /// the spacing.
    pub fn site_value(&self, site: usize) -> Result<Vec4> {
        match self {
            FlowField::Lattice { perturbation } => {
                let lat = perturbation.lattice();
                if lat.ndim() != 4 {
                    return Err(FlowError::Shape("site values need a 4-D lattice".into()));
                }
                let h = lat.spacing();
                let mut v = vacuum();
                for a in 0..4 {
                    v[a] += perturbation.get(site, 1 << a) / h;
                }
                Ok(v)
            }
            FlowField::Static { .. } => Err(FlowError::Domain("static flows have no lattice sites".into())),
        }
    }

    /// Gradient/remainder split of a lattice flow perturbation.
    pub fn split(&self) -> Result<HelmholtzSplit> {
        match self {
            FlowField::Lattice { perturbation } => helmholtz_split(perturbation),
            FlowField::Static { .. } => Err(FlowError::Domain("split applies to lattice flows".into())),
        }
    }
}

/// Observer-space field strength `d phi` of one source kind, as a
/// [`CovectorField3`] for flux integration.
pub struct ObserverGradient<'a> {
    pub sources: &'a ParticleSet,
    pub kind: SourceKind,
}

impl CovectorField3 for ObserverGradient<'_> {
    fn covector(&self, q: &Vec3) -> Result<Vec3> {
        let mut out = Vec3::zeros();
        for p in self.sources.active() {
            let strength = match self.kind {
                SourceKind::Mass => p.mass,
                SourceKind::Charge => p.charge,
            };
            if strength == 0.0 {
                continue;
            }
            let d = q - p.pos();
            let r = d.norm();
            if r < 1e-12 {
                return Err(FlowError::Singularity("flux node at a source".into()));
            }
            out += strength * d / (4.0 * PI * r.powi(3));
        }
        Ok(out)
    }

    fn singularities(&self) -> Vec<Vec3> {
        self.sources.active().map(|p| p.pos()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussReport {
    pub kind: SourceKind,
    pub center: [f64; 3],
    pub radius: f64,
    pub orders: (usize, usize),
    pub measured: f64,
    /// Sum over active particles strictly inside the sphere.
    pub expected: f64,
    pub abs_error: f64,
}

/// Flux of `*g` (mass) or of the electric field `d phi_E` (charge) through a
/// sphere, compared with the enclosed source total.
pub fn gauss_flux(field: &FlowField, surface: &SphereChart, kind: SourceKind) -> Result<GaussReport> {
    let sources = field
        .sources()
        .ok_or_else(|| FlowError::Domain("Gauss flux needs a closed-form static flow".into()))?;
    let measured = surface_flux(&ObserverGradient { sources, kind }, surface)?;
    let expected = sources
        .active()
        .filter(|p| surface.encloses(&p.pos()))
        .map(|p| match kind {
            SourceKind::Mass => p.mass,
            SourceKind::Charge => p.charge,
        })
        .sum();
    let c = surface.center();
    Ok(GaussReport {
        kind,
        center: [c.x, c.y, c.z],
        radius: surface.radius(),
        orders: surface.orders(),
        measured,
        expected,
        abs_error: (measured - expected).abs(),
    })
}

#[derive(Debug, Clone)]
pub struct HelmholtzSplit {
    /// Exact part `d phi`.
    pub gradient: LatticeForm,
    /// Remainder `B - d phi`, co-closed up to the solver residual.
    pub remainder: LatticeForm,
    pub potential: LatticeForm,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Splits a periodic Euclidean 1-cochain into `d phi` plus a co-closed
/// remainder by solving `codiff d phi = codiff B`.
pub fn helmholtz_split(b: &LatticeForm) -> Result<HelmholtzSplit> {
    let lat = b.lattice();
    if b.degree() != 1 {
        return Err(FlowError::Degree("split expects a 1-form".into()));
    }
    if lat.boundary() != Boundary::Periodic || lat.signature() != Signature::Euclidean {
        return Err(FlowError::Domain("split needs a periodic Euclidean lattice".into()));
    }
    let nb = b.masks().len();
    let sites = lat.num_sites() as f64;
    let scale = b.max_abs().max(f64::MIN_POSITIVE);
    for comp in 0..nb {
        let mean: f64 = b.coeffs().iter().skip(comp).step_by(nb).sum::<f64>() / sites;
        if mean.abs() > 1e-10 * scale {
            return Err(FlowError::Domain(format!(
                "component {comp} has lattice mean {mean:e}; constant modes must be removed first"
            )));
        }
    }
    let rhs = codiff(b)?;
    let (potential, out) = solve_poisson(lat, &rhs, POISSON_TOL, POISSON_MAX_ITER)?;
    let gradient = ext_d(&potential)?;
    let remainder = b.combine(1.0, &gradient, -1.0)?;
    Ok(HelmholtzSplit {
        gradient,
        remainder,
        potential,
        iterations: out.iterations,
        relative_residual: out.relative_residual,
    })
}

/// Removes the lattice mean of every component of a 1-cochain.
pub fn remove_component_means(b: &LatticeForm) -> LatticeForm {
    let nb = b.masks().len();
    let sites = b.lattice().num_sites() as f64;
    let mut out = b.clone();
    for comp in 0..nb {
        let mean: f64 = b.coeffs().iter().skip(comp).step_by(nb).sum::<f64>() / sites;
        out.coeffs_mut().iter_mut().skip(comp).step_by(nb).for_each(|c| *c -= mean);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FarFieldSample {
    pub radius: f64,
    /// `max |B(x) - c|` over the sphere.
    pub max_deviation: f64,
    /// `max | |B(x)| - |c| |` over the sphere.
    pub norm_deviation: f64,
}

/// Far-field profile on observer-space spheres centred on the source centroid,
/// taken at flow coordinate `s`.
pub fn far_field_profile(field: &FlowField, radii: &[f64], orders: (usize, usize), s: f64) -> Result<Vec<FarFieldSample>> {
    let sources = field
        .sources()
        .ok_or_else(|| FlowError::Domain("far-field profile needs a static flow".into()))?;
    let n = sources.active().count().max(1) as f64;
    let centroid = sources.active().fold(Vec3::zeros(), |acc, p| acc + p.pos()) / n;
    let c_norm = vacuum().norm();
    radii
        .iter()
        .map(|&radius| {
            let chart = SphereChart::new(centroid, radius, orders.0, orders.1)?;
            let mut max_deviation: f64 = 0.0;
            let mut norm_deviation: f64 = 0.0;
            for node in chart.nodes() {
                let b = field.b_hat(&embed(&node.point, s))?;
                max_deviation = max_deviation.max((b - vacuum()).norm());
                norm_deviation = norm_deviation.max((b.norm() - c_norm).abs());
            }
            Ok(FarFieldSample {
                radius,
                max_deviation,
                norm_deviation,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::{form_inner, Lattice};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one_mass() -> ParticleSet {
        ParticleSet::new(vec![Particle::new(Vec3::zeros(), 1.0, 0.0)]).unwrap()
    }

    #[test]
    fn frame_is_orthonormal_and_orthogonal_to_flow() {
        for i in 0..3 {
            assert!(observer_axis(i).dot(&vacuum()).abs() < 1e-15);
            for j in 0..3 {
                let d = observer_axis(i).dot(&observer_axis(j));
                assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
        let q = Vec3::new(0.3, -1.2, 2.0);
        let x = embed(&q, 0.7);
        assert!((observer_part(&x) - q).norm() < 1e-15);
        assert!((flow_part(&x) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn vacuum_norm_squared_is_four() {
        assert_eq!(vacuum().norm_squared(), 4.0);
    }

    #[test]
    fn empty_set_gives_vacuum() {
        let f = static_flow(&ParticleSet::empty());
        let x = Point4::new(0.1, 2.0, -3.0, 0.4);
        assert_eq!(f.b_hat(&x).unwrap(), vacuum());
    }

    #[test]
    fn unit_mass_potential_at_unit_distance() {
        let f = static_flow(&one_mass());
        let x = embed(&Vec3::new(0.0, 1.0, 0.0), 3.0);
        let phi = f.potential(&x, SourceKind::Mass).unwrap().value;
        assert!((phi + 1.0 / (4.0 * PI)).abs() < 1e-15);
        assert!((phi + 0.0795775).abs() < 1e-7);
    }

    #[test]
    fn symmetric_pair_cancels_at_midpoint() {
        let a = 0.8;
        let set = ParticleSet::new(vec![
            Particle::new(Vec3::new(a, 0.0, 0.0), 2.0, 0.0),
            Particle::new(Vec3::new(-a, 0.0, 0.0), 2.0, 0.0),
        ])
        .unwrap();
        let g = static_flow(&set).g_observer(&embed(&Vec3::zeros(), 0.0)).unwrap();
        assert!(g.norm() < 1e-15);
    }

    #[test]
    fn evaluation_at_source_is_singular() {
        let f = static_flow(&one_mass());
        assert!(matches!(f.b_hat(&embed(&Vec3::zeros(), 5.0)), Err(FlowError::Singularity(_))));
    }

    #[test]
    fn particle_set_validation() {
        assert!(ParticleSet::new(vec![Particle::new(Vec3::zeros(), -1.0, 0.0)]).is_err());
        assert!(ParticleSet::new(vec![Particle::new(Vec3::zeros(), 1.0, 0.0), Particle::new(Vec3::zeros(), 2.0, 0.0)]).is_err());
        assert!(one_mass().with_active(vec![3]).is_err());
    }

    #[test]
    fn superposition_of_perturbations() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut rand_set = |n: usize| {
            ParticleSet::new(
                (0..n)
                    .map(|_| {
                        Particle::new(
                            Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                            rng.gen_range(0.0..2.0),
                            rng.gen_range(-1.0..1.0),
                        )
                    })
                    .collect(),
            )
            .unwrap()
        };
        let p1 = rand_set(3);
        let p2 = rand_set(2);
        let both = p1.union(&p2).unwrap();
        let x = embed(&Vec3::new(2.0, 2.5, -1.5), 0.3);
        let sum = static_flow(&p1).perturbation_at(&x).unwrap() + static_flow(&p2).perturbation_at(&x).unwrap();
        let joint = static_flow(&both).perturbation_at(&x).unwrap();
        assert!((sum - joint).norm() < 1e-12);
    }

    #[test]
    fn potential_derivatives_match_finite_differences() {
        let set = ParticleSet::new(vec![
            Particle::new(Vec3::new(0.2, 0.1, -0.3), 1.5, -0.7),
            Particle::new(Vec3::new(-0.5, 0.4, 0.2), 0.5, 1.1),
        ])
        .unwrap();
        let f = static_flow(&set);
        let x = Point4::new(0.4, -0.3, 0.9, 0.1);
        let h = 1e-5;
        for kind in [SourceKind::Mass, SourceKind::Charge] {
            let jet = f.potential(&x, kind).unwrap();
            for j in 0..4 {
                let mut e = Vec4::zeros();
                e[j] = h;
                let fp = f.potential(&(x + e), kind).unwrap();
                let fm = f.potential(&(x - e), kind).unwrap();
                let dv = (fp.value - fm.value) / (2.0 * h);
                assert!((dv - jet.gradient[j]).abs() < 1e-8);
                let dg = (fp.gradient - fm.gradient) / (2.0 * h);
                assert!((dg - jet.hessian.column(j)).norm() < 1e-7);
            }
            assert!(jet.gradient.dot(&vacuum()).abs() < 1e-14);
        }
    }

    #[test]
    fn gauss_flux_examples() {
        let chart = SphereChart::new(Vec3::zeros(), 1.0, 64, 128).unwrap();
        let r = gauss_flux(&static_flow(&ParticleSet::empty()), &chart, SourceKind::Mass).unwrap();
        assert!(r.measured.abs() <= 1e-12);

        let two = ParticleSet::new(vec![
            Particle::new(Vec3::new(0.2, 0.0, 0.1), 1.0, 0.0),
            Particle::new(Vec3::new(-0.3, 0.1, 0.0), 2.5, 0.0),
        ])
        .unwrap();
        let r = gauss_flux(&static_flow(&two), &chart, SourceKind::Mass).unwrap();
        assert_eq!(r.expected, 3.5);
        assert!(r.abs_error <= 1e-6, "{r:?}");

        let charges = ParticleSet::new(vec![
            Particle::new(Vec3::new(0.1, -0.2, 0.0), 0.0, 1.0),
            Particle::new(Vec3::new(2.0, 0.0, 0.0), 0.0, -1.0),
        ])
        .unwrap();
        let r = gauss_flux(&static_flow(&charges), &chart, SourceKind::Charge).unwrap();
        assert_eq!(r.expected, 1.0);
        assert!((r.measured - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn projection_properties() {
        assert!(project_observer(&unit_flow()).norm() < 1e-15);
        let w = Vec4::new(1.0, -1.0, 0.0, 0.0);
        assert_eq!(project_observer(&w), w);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let w = Vec4::from_fn(|_, _| rng.gen_range(-3.0..3.0));
            let p = project_observer(&w);
            assert!((project_observer(&p) - p).norm() < 1e-14);
            assert!(p.dot(&vacuum()).abs() < 1e-14);
        }
    }

    #[test]
    fn far_field_decays_like_inverse_radius() {
        let set = ParticleSet::new(vec![
            Particle::new(Vec3::new(0.3, 0.0, 0.0), 1.0, 0.5),
            Particle::new(Vec3::new(-0.2, 0.4, 0.1), 2.0, -1.5),
        ])
        .unwrap();
        let prof = far_field_profile(&static_flow(&set), &[10.0, 20.0, 40.0], (16, 32), 0.0).unwrap();
        for w in prof.windows(2) {
            assert!(w[0].max_deviation / w[1].max_deviation >= 1.9);
            assert!(w[1].norm_deviation < w[0].norm_deviation);
        }
    }

    fn random_mean_free(lat: &Lattice, seed: u64) -> LatticeForm {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        remove_component_means(&LatticeForm::from_fn(lat, 1, |_, _| rng.gen_range(-1.0..1.0)).unwrap())
    }

    #[test]
    fn split_of_pure_gradient() {
        let lat = Lattice::periodic(4, 6, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = LatticeForm::from_fn(&lat, 0, |_, _| rng.gen_range(-1.0..1.0)).unwrap();
        let b = ext_d(&f).unwrap();
        let s = helmholtz_split(&b).unwrap();
        assert!(s.remainder.norm() <= 1e-8 * b.norm());
        assert!(ext_d(&s.gradient).unwrap().max_abs() <= 1e-13);
    }

    #[test]
    fn split_reconstructs_and_is_orthogonal() {
        let lat = Lattice::periodic(3, 8, 0.25).unwrap();
        let b = random_mean_free(&lat, 3);
        let s = helmholtz_split(&b).unwrap();
        let recon = s.gradient.combine(1.0, &s.remainder, 1.0).unwrap();
        assert!(recon.combine(1.0, &b, -1.0).unwrap().norm() <= 1e-10 * b.norm());
        let cross = form_inner(&s.gradient, &s.remainder).unwrap();
        assert!(cross.abs() <= 1e-8 * form_inner(&b, &b).unwrap());
        assert!(s.relative_residual <= POISSON_TOL);
    }

    #[test]
    fn split_rejects_bad_input() {
        let lat = Lattice::new(&[4, 4, 4], 1.0, Boundary::Open, Signature::Euclidean).unwrap();
        let b = LatticeForm::zeros(&lat, 1).unwrap();
        assert!(helmholtz_split(&b).is_err());
        let lat = Lattice::periodic(3, 4, 1.0).unwrap();
        let b = LatticeForm::from_fn(&lat, 1, |_, _| 1.0).unwrap();
        assert!(matches!(helmholtz_split(&b), Err(FlowError::Domain(_))));
    }

    #[test]
    fn lattice_flow_site_values() {
        let lat = Lattice::periodic(4, 4, 0.5).unwrap();
        let b = LatticeForm::from_fn(&lat, 1, |_, m| if m == 0b0100 { 0.25 } else { 0.0 }).unwrap();
        let f = FlowField::lattice(b).unwrap();
        assert_eq!(f.site_value(3).unwrap(), Vec4::new(1.0, 1.0, 1.5, 1.0));
        assert!(f.b_hat(&Point4::zeros()).is_err());
    }
}
