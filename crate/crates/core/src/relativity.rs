//! Null coordinates, observer coordinates along strings, the 2x2 endomorphism
//! algebra and its boost group, the Lorentz group acting on `(t, x, y, z)`,
//! and the quadratic form induced by a flow.

use std::ops::Mul;

use nalgebra::{Matrix4, Rotation3, Unit};
use serde::Serialize;

use crate::error::{FlowError, Result};
use crate::exterior::{Point4, Vec3, Vec4};
use crate::statics::FlowField;

/// `y0 = x0 + x1 + x2 + x3`, `yi = x0 - xi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullCoords(pub [f64; 4]);

pub fn to_null(p: &Point4) -> NullCoords {
    NullCoords([p[0] + p[1] + p[2] + p[3], p[0] - p[1], p[0] - p[2], p[0] - p[3]])
}

pub fn from_null(y: &NullCoords) -> Point4 {
    let [y0, y1, y2, y3] = y.0;
    let x0 = (y0 + y1 + y2 + y3) / 4.0;
    Point4::new(x0, x0 - y1, x0 - y2, x0 - y3)
}

/// Observer coordinates accumulated along a string.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ObserverEvent {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl ObserverEvent {
    /// Increment produced by a displacement `d` of E(4).
    pub fn of_displacement(d: &Vec4) -> Self {
        ObserverEvent {
            t: d[0] + d[1] + d[2] + d[3],
            x: d[0] + d[1],
            y: d[0] + d[2],
            z: d[0] + d[3],
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.t, self.x, self.y, self.z]
    }
}

impl std::ops::Add for ObserverEvent {
    type Output = ObserverEvent;

    fn add(self, o: ObserverEvent) -> ObserverEvent {
        ObserverEvent {
            t: self.t + o.t,
            x: self.x + o.x,
            y: self.y + o.y,
            z: self.z + o.z,
        }
    }
}

/// Running observer coordinates at every node of a polyline. The integrands
/// are exact forms, so each segment contributes its endpoint difference.
pub fn observer_coords_nodes(nodes: &[Point4]) -> Result<Vec<ObserverEvent>> {
    if nodes.is_empty() {
        return Err(FlowError::Shape("observer coordinates need at least one node".into()));
    }
    let mut out = Vec::with_capacity(nodes.len());
    let mut acc = ObserverEvent::default();
    out.push(acc);
    for w in nodes.windows(2) {
        acc = acc + ObserverEvent::of_displacement(&(w[1] - w[0]));
        out.push(acc);
    }
    Ok(out)
}

pub fn observer_coords(path: &crate::action::StringPath) -> Result<Vec<ObserverEvent>> {
    observer_coords_nodes(path.nodes())
}

/// Element `[[t0, t1], [t1, t0]]` of the commutative endomorphism algebra.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Endo2 {
    pub t0: f64,
    pub t1: f64,
}

impl Endo2 {
    pub const IDENTITY: Endo2 = Endo2 { t0: 1.0, t1: 0.0 };

    pub fn new(t0: f64, t1: f64) -> Self {
        Endo2 { t0, t1 }
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[self.t0, self.t1], [self.t1, self.t0]]
    }

    /// Eigenvalues `(t0 + t1, t0 - t1)`; multiplication is componentwise in
    /// this basis.
    pub fn diagonal(&self) -> (f64, f64) {
        (self.t0 + self.t1, self.t0 - self.t1)
    }
}

pub fn endo_mul(a: Endo2, b: Endo2) -> Endo2 {
    Endo2 {
        t0: a.t0 * b.t0 + a.t1 * b.t1,
        t1: a.t0 * b.t1 + a.t1 * b.t0,
    }
}

impl Mul for Endo2 {
    type Output = Endo2;

    fn mul(self, rhs: Endo2) -> Endo2 {
        endo_mul(self, rhs)
    }
}

/// Boost of a null pair: `(u, v) -> (k u, v / k)`.
pub fn boost(pair: (f64, f64), k: f64) -> Result<(f64, f64)> {
    if !(k.is_finite() && k > 0.0) {
        return Err(FlowError::Domain(format!("boost factor must be positive, got {k}")));
    }
    Ok((k * pair.0, pair.1 / k))
}

/// `diag(+1, -1, -1, -1)`.
pub fn minkowski_metric() -> Matrix4<f64> {
    Matrix4::from_diagonal(&Vec4::new(1.0, -1.0, -1.0, -1.0))
}

/// `t^2 - x^2 - y^2 - z^2`.
pub fn interval(v: &Vec4) -> f64 {
    v[0] * v[0] - v[1] * v[1] - v[2] * v[2] - v[3] * v[3]
}

#[derive(Debug, Clone, PartialEq)]
pub enum LorentzKind {
    Identity,
    Boost { rapidity: f64, axis: usize },
    Rotation { axis: [f64; 3], angle: f64 },
    Product,
    Matrix,
}

/// Proper orthochronous Lorentz transformation acting on `(t, x, y, z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LorentzElement {
    matrix: Matrix4<f64>,
    kind: LorentzKind,
}

impl LorentzElement {
    pub const TOL: f64 = 1e-12;

    pub fn identity() -> Self {
        LorentzElement {
            matrix: Matrix4::identity(),
            kind: LorentzKind::Identity,
        }
    }

    /// Boost with rapidity `theta` along spatial axis 1..=3. In null
    /// components `t + x` scales by `e^theta` and `t - x` by `e^-theta`.
    pub fn boost(rapidity: f64, axis: usize) -> Result<Self> {
        if !(1..=3).contains(&axis) {
            return Err(FlowError::Domain(format!("boost axis must be 1, 2 or 3, got {axis}")));
        }
        if !rapidity.is_finite() {
            return Err(FlowError::Domain("rapidity must be finite".into()));
        }
        let (ch, sh) = (rapidity.cosh(), rapidity.sinh());
        let mut m = Matrix4::identity();
        m[(0, 0)] = ch;
        m[(axis, axis)] = ch;
        m[(0, axis)] = sh;
        m[(axis, 0)] = sh;
        Ok(LorentzElement {
            matrix: m,
            kind: LorentzKind::Boost { rapidity, axis },
        })
    }

    /// Spatial rotation about `axis` by `angle`; `t` is untouched.
    pub fn rotation(axis: Vec3, angle: f64) -> Result<Self> {
        if axis.norm() == 0.0 || !axis.iter().all(|c| c.is_finite()) || !angle.is_finite() {
            return Err(FlowError::Domain("rotation needs a finite nonzero axis and angle".into()));
        }
        let r = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle);
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(1, 1).copy_from(r.matrix());
        Ok(LorentzElement {
            matrix: m,
            kind: LorentzKind::Rotation {
                axis: [axis.x, axis.y, axis.z],
                angle,
            },
        })
    }

    /// Validates an arbitrary matrix.
    pub fn from_matrix(m: Matrix4<f64>) -> Result<Self> {
        let el = LorentzElement {
            matrix: m,
            kind: LorentzKind::Matrix,
        };
        el.check()?;
        Ok(el)
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.matrix
    }

    pub fn kind(&self) -> &LorentzKind {
        &self.kind
    }

    pub fn compose(&self, other: &LorentzElement) -> LorentzElement {
        LorentzElement {
            matrix: self.matrix * other.matrix,
            kind: LorentzKind::Product,
        }
    }

    /// Largest entry of `L^T eta L - eta` and `|det L - 1|`.
    pub fn defect(&self) -> (f64, f64) {
        let eta = minkowski_metric();
        let d = self.matrix.transpose() * eta * self.matrix - eta;
        (d.amax(), (self.matrix.determinant() - 1.0).abs())
    }

    pub fn check(&self) -> Result<()> {
        let (metric, det) = self.defect();
        if metric > Self::TOL || det > Self::TOL {
            return Err(FlowError::Invariant(format!(
                "not a proper Lorentz matrix: metric defect {metric:e}, determinant defect {det:e}"
            )));
        }
        Ok(())
    }
}

pub fn lorentz_apply(l: &LorentzElement, v: &Vec4) -> Result<Vec4> {
    l.check()?;
    Ok(l.matrix * v)
}

/// Frame pairings `<dX_i, e_j>` for `X = (t, x, y, z)` built from
/// `(tau0, ..., tau3)`: `tau0` on the diagonal, `tau_i` in row and column 0,
/// zero between distinct spatial slots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairingTable {
    taus: [f64; 4],
}

impl PairingTable {
    pub fn new(taus: [f64; 4]) -> Result<Self> {
        if !(taus[0] > 0.0) {
            return Err(FlowError::Domain(format!("tau0 must be positive, got {}", taus[0])));
        }
        Ok(PairingTable { taus })
    }

    /// Table of a string with tangent `w`: `tau0 = dt(w)`, `tau_i = dx_i(w)`.
    pub fn from_tangent(w: &Vec4) -> Result<Self> {
        Self::new(ObserverEvent::of_displacement(w).as_array())
    }

    pub fn taus(&self) -> [f64; 4] {
        self.taus
    }

    pub fn table(&self) -> [[f64; 4]; 4] {
        let t = self.taus;
        let mut out = [[0.0; 4]; 4];
        for i in 0..4 {
            out[i][i] = t[0];
        }
        for i in 1..4 {
            out[0][i] = t[i];
            out[i][0] = t[i];
        }
        out
    }

    /// Frame vectors `e_j` of E(4) realising the table. Column `j` of the
    /// returned matrix is `e_j`; `e_0` is the string tangent.
    pub fn frame(&self) -> Matrix4<f64> {
        // rows are dt, dx, dy, dz as covectors on E(4)
        let forms = observer_forms();
        let inv = forms.try_inverse().expect("observer forms are independent");
        let table = Matrix4::from_fn(|i, j| self.table()[i][j]);
        inv * table
    }

    /// Largest mismatch between the table and the pairings recomputed from
    /// [`PairingTable::frame`].
    pub fn consistency_defect(&self) -> f64 {
        let recomputed = observer_forms() * self.frame();
        let table = Matrix4::from_fn(|i, j| self.table()[i][j]);
        (recomputed - table).amax()
    }
}

fn observer_forms() -> Matrix4<f64> {
    Matrix4::new(
        1.0, 1.0, 1.0, 1.0, //
        1.0, 1.0, 0.0, 0.0, //
        1.0, 0.0, 1.0, 0.0, //
        1.0, 0.0, 0.0, 1.0,
    )
}

/// `g(v) = <u, v>^2 - |v - <u, v> u|^2` with `u` the unit flow at `x`.
pub fn induced_form(field: &FlowField, x: &Point4, v: &Vec4) -> Result<f64> {
    let u = unit_flow_at(field, x)?;
    Ok(quadratic_form_with(&u, v))
}

/// Matrix of [`induced_form`], `2 u u^T - I`.
pub fn induced_matrix(field: &FlowField, x: &Point4) -> Result<Matrix4<f64>> {
    let u = unit_flow_at(field, x)?;
    Ok(2.0 * u * u.transpose() - Matrix4::identity())
}

fn unit_flow_at(field: &FlowField, x: &Point4) -> Result<Vec4> {
    let b = field.b_hat(x)?;
    let n = b.norm();
    if n < 1e-14 {
        return Err(FlowError::Singularity("flow vanishes; no induced form".into()));
    }
    Ok(b / n)
}

fn quadratic_form_with(u: &Vec4, v: &Vec4) -> f64 {
    let along = u.dot(v);
    along * along - (v - along * u).norm_squared()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statics::{static_flow, vacuum, Particle, ParticleSet};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn null_map_examples() {
        assert_eq!(to_null(&Point4::zeros()).0, [0.0; 4]);
        assert_eq!(to_null(&Point4::new(1.0, 0.0, 0.0, 0.0)).0, [1.0; 4]);
        let y = to_null(&Point4::new(1.0, 2.0, 0.0, 0.0));
        assert_eq!(y.0, [3.0, -1.0, 1.0, 1.0]);
        assert_eq!(from_null(&y), Point4::new(1.0, 2.0, 0.0, 0.0));
    }

    #[test]
    fn null_map_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let p = Point4::from_fn(|_, _| rng.gen_range(-10.0..10.0));
            assert!((from_null(&to_null(&p)) - p).amax() <= 1e-14 * 10.0);
        }
    }

    #[test]
    fn endo_examples() {
        let a = Endo2::new(0.3, -1.7);
        assert_eq!(Endo2::IDENTITY * a, a);
        assert_eq!(Endo2::new(2.0, 1.0) * Endo2::new(3.0, 2.0), Endo2::new(8.0, 7.0));
    }

    #[test]
    fn endo_matches_matrix_product_and_diagonalises() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let a = Endo2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let b = Endo2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let c = Endo2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            assert_eq!(a * b, b * a);
            let l = (a * b) * c;
            let r = a * (b * c);
            assert!((l.t0 - r.t0).abs() < 1e-14 && (l.t1 - r.t1).abs() < 1e-14);
            let (am, bm) = (a.matrix(), b.matrix());
            let prod = a * b;
            for i in 0..2 {
                for j in 0..2 {
                    let m: f64 = (0..2).map(|k| am[i][k] * bm[k][j]).sum();
                    assert!((m - prod.matrix()[i][j]).abs() < 1e-14);
                }
            }
            let (p, q) = prod.diagonal();
            assert!((p - a.diagonal().0 * b.diagonal().0).abs() < 1e-14);
            assert!((q - a.diagonal().1 * b.diagonal().1).abs() < 1e-14);
        }
    }

    #[test]
    fn boost_examples() {
        assert_eq!(boost((1.0, 3.0), 1.0).unwrap(), (1.0, 3.0));
        let (u, v) = boost((1.0, 3.0), 2.0).unwrap();
        assert_eq!((u, v), (2.0, 1.5));
        assert_eq!(u * v, 3.0);
        assert!(boost((1.0, 1.0), 0.0).is_err());
        assert!(boost((1.0, 1.0), -2.0).is_err());
        let p = (0.7, -1.3);
        let two = boost(boost(p, 0.3f64.exp()).unwrap(), 0.5f64.exp()).unwrap();
        let one = boost(p, 0.8f64.exp()).unwrap();
        assert!((two.0 - one.0).abs() < 1e-14 && (two.1 - one.1).abs() < 1e-14);
    }

    #[test]
    fn boost_matches_lorentz_matrix_in_null_components() {
        let theta = 0.37;
        let l = LorentzElement::boost(theta, 1).unwrap();
        let v = Vec4::new(1.2, 0.4, -0.3, 2.0);
        let w = lorentz_apply(&l, &v).unwrap();
        let (u, vv) = boost((v[0] + v[1], v[0] - v[1]), theta.exp()).unwrap();
        assert!((w[0] + w[1] - u).abs() < 1e-14);
        assert!((w[0] - w[1] - vv).abs() < 1e-14);
    }

    #[test]
    fn lorentz_examples() {
        let v = Vec4::new(0.4, 1.0, 0.0, 0.0);
        assert_eq!(lorentz_apply(&LorentzElement::identity(), &v).unwrap(), v);
        let r = LorentzElement::rotation(Vec3::z(), std::f64::consts::FRAC_PI_2).unwrap();
        let w = lorentz_apply(&r, &v).unwrap();
        assert_eq!(w[0], 0.4);
        assert!((w - Vec4::new(0.4, 0.0, 1.0, 0.0)).amax() < 1e-15);
        let mut bad = Matrix4::identity();
        bad[(0, 1)] = 0.5;
        assert!(matches!(LorentzElement::from_matrix(bad), Err(FlowError::Invariant(_))));
    }

    #[test]
    fn random_group_elements_preserve_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let b = LorentzElement::boost(rng.gen_range(-1.5..1.5), rng.gen_range(1..=3)).unwrap();
            let axis = Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let r = LorentzElement::rotation(axis, rng.gen_range(0.0..6.3)).unwrap();
            let l = b.compose(&r);
            let v = Vec4::from_fn(|_, _| rng.gen_range(-2.0..2.0));
            let w = lorentz_apply(&l, &v).unwrap();
            // oracle: evaluate the quadratic form directly
            let q = |a: &Vec4| a[0].powi(2) - a[1].powi(2) - a[2].powi(2) - a[3].powi(2);
            assert!((q(&w) - q(&v)).abs() <= 1e-12 * q(&v).abs().max(1.0));
            assert!(l.defect().0 <= 1e-12 && l.defect().1 <= 1e-12);
        }
    }

    #[test]
    fn null_interval_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let (x0, x1): (f64, f64) = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let (y0, y1) = (x0 + x1, x0 - x1);
            assert!((y0 * y0 - y1 * y1 - 4.0 * x0 * x1).abs() <= 1e-12 * (x0 * x1).abs().max(1.0));
        }
    }

    #[test]
    fn observer_coords_examples() {
        let ev = observer_coords_nodes(&[Point4::new(1.0, 2.0, 3.0, 4.0)]).unwrap();
        assert_eq!(ev, vec![ObserverEvent::default()]);

        let nodes: Vec<Point4> = (0..=4).map(|k| Point4::repeat(k as f64 / 16.0)).collect();
        let ev = observer_coords_nodes(&nodes).unwrap();
        let last = ev.last().unwrap();
        assert!((last.t - 1.0).abs() < 1e-15);
        assert!((last.x - 0.5).abs() < 1e-15 && (last.y - 0.5).abs() < 1e-15 && (last.z - 0.5).abs() < 1e-15);
    }

    #[test]
    fn observer_coords_additive_under_concatenation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: Vec<Point4> = (0..5).map(|_| Point4::from_fn(|_, _| rng.gen_range(-1.0..1.0))).collect();
        let b: Vec<Point4> = std::iter::once(*a.last().unwrap())
            .chain((0..4).map(|_| Point4::from_fn(|_, _| rng.gen_range(-1.0..1.0))))
            .collect();
        let joined: Vec<Point4> = a.iter().chain(b.iter().skip(1)).copied().collect();
        let ea = *observer_coords_nodes(&a).unwrap().last().unwrap();
        let eb = *observer_coords_nodes(&b).unwrap().last().unwrap();
        let ej = *observer_coords_nodes(&joined).unwrap().last().unwrap();
        let s = ea + eb;
        for (p, q) in s.as_array().iter().zip(ej.as_array()) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn pairing_table_consistency() {
        let w = Vec4::new(0.25, 0.25, 0.25, 0.25);
        let t = PairingTable::from_tangent(&w).unwrap();
        assert_eq!(t.taus(), [1.0, 0.5, 0.5, 0.5]);
        assert!(t.consistency_defect() < 1e-14);
        // e_0 reproduces the string tangent
        let e0 = t.frame().column(0).into_owned();
        assert!((e0 - w).amax() < 1e-15);
        let table = t.table();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(table[i][j], table[j][i]);
            }
        }
        assert!(PairingTable::new([0.0, 1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn induced_form_vacuum() {
        let f = FlowField::vacuum_only();
        let x = Point4::zeros();
        assert!((induced_form(&f, &x, &(vacuum() / 2.0)).unwrap() - 1.0).abs() < 1e-15);
        let v = Vec4::new(1.0, -1.0, 0.0, 0.0) / 2f64.sqrt();
        assert!((induced_form(&f, &x, &v).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn induced_form_homogeneous_and_signature() {
        let set = ParticleSet::new(vec![Particle::new(Vec3::new(0.3, 0.1, -0.2), 2.0, 1.0)]).unwrap();
        let f = static_flow(&set);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let x = Point4::from_fn(|_, _| rng.gen_range(-2.0..2.0));
            let v = Vec4::from_fn(|_, _| rng.gen_range(-2.0..2.0));
            let g1 = induced_form(&f, &x, &v).unwrap();
            let g2 = induced_form(&f, &x, &(2.0 * v)).unwrap();
            assert!((g2 - 4.0 * g1).abs() < 1e-12 * g1.abs().max(1.0));
            let eig = induced_matrix(&f, &x).unwrap().symmetric_eigenvalues();
            assert_eq!(eig.iter().filter(|&&e| e > 0.5).count(), 1);
            assert_eq!(eig.iter().filter(|&&e| e < -0.5).count(), 3);
        }
    }
}
