//! Cylindrical numbers, the cylinder factorization of E(2) and E(4), its
//! k-deformation, phase amplitudes and orbit selection by `S_cl = z h`.
//!
//! A cylindrical number `x + e^{i phi}` carries a real linear part and a phase
//! stored in `[0, 2 pi)`. Operations act componentwise; multiplication of
//! phases uses the canonical representatives, so it is not invariant under
//! shifting a phase by `2 pi`. An optional unwrapped phase is carried when it
//! is known, which is what the k-deformation acts on.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::Serialize;

use crate::action::{action_gradient, max_gradient_norm, OrbitSpec};
use crate::error::{FlowError, Result};
use crate::exterior::Point4;
use crate::quadrature::gauss_legendre_on;
use crate::statics::observer_part;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantConfig {
    hbar: f64,
}

impl QuantConfig {
    pub fn new(hbar: f64) -> Result<Self> {
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(FlowError::Domain(format!("hbar must be positive, got {hbar}")));
        }
        Ok(QuantConfig { hbar })
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// Circle length `h = 2 pi hbar`.
    pub fn h(&self) -> f64 {
        TAU * self.hbar
    }
}

/// Reduces an angle to `[0, 2 pi)`.
pub fn canonical_angle(phi: f64) -> f64 {
    let r = phi.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2 pi for tiny negative input
    if r >= TAU {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CylNumber {
    pub lin: f64,
    ang: f64,
    unwrapped: Option<f64>,
}

impl CylNumber {
    pub const ZERO: CylNumber = CylNumber {
        lin: 0.0,
        ang: 0.0,
        unwrapped: Some(0.0),
    };

    /// Multiplicative identity `(1, 1 rad)`.
    pub const ONE: CylNumber = CylNumber {
        lin: 1.0,
        ang: 1.0,
        unwrapped: Some(1.0),
    };

    pub fn new(lin: f64, ang: f64) -> Self {
        CylNumber {
            lin,
            ang: canonical_angle(ang),
            unwrapped: None,
        }
    }

    /// Keeps `phase` as the unwrapped companion of the canonical angle.
    pub fn with_unwrapped(lin: f64, phase: f64) -> Self {
        CylNumber {
            lin,
            ang: canonical_angle(phase),
            unwrapped: Some(phase),
        }
    }

    pub fn ang(&self) -> f64 {
        self.ang
    }

    pub fn unwrapped(&self) -> Option<f64> {
        self.unwrapped
    }

    pub fn phase(&self) -> Complex64 {
        Complex64::from_polar(1.0, self.ang)
    }

    /// Equality of linear parts and of angles on the circle within `tol`.
    pub fn approx_eq(&self, other: &CylNumber, tol: f64) -> bool {
        let d = (self.ang - other.ang).abs();
        (self.lin - other.lin).abs() <= tol && d.min(TAU - d) <= tol
    }
}

pub fn cyl_add(a: CylNumber, b: CylNumber) -> CylNumber {
    CylNumber {
        lin: a.lin + b.lin,
        ang: canonical_angle(a.ang + b.ang),
        unwrapped: a.unwrapped.zip(b.unwrapped).map(|(x, y)| x + y),
    }
}

pub fn cyl_mul(a: CylNumber, b: CylNumber) -> CylNumber {
    CylNumber {
        lin: a.lin * b.lin,
        ang: canonical_angle(a.ang * b.ang),
        unwrapped: a.unwrapped.zip(b.unwrapped).map(|(x, y)| x * y),
    }
}

impl std::ops::Add for CylNumber {
    type Output = CylNumber;

    fn add(self, rhs: CylNumber) -> CylNumber {
        cyl_add(self, rhs)
    }
}

impl std::ops::Mul for CylNumber {
    type Output = CylNumber;

    fn mul(self, rhs: CylNumber) -> CylNumber {
        cyl_mul(self, rhs)
    }
}

/// Euclidean dot product of the linear parts together with the phase
/// `sum u_i.ang * v_i.ang` reduced mod `2 pi`.
pub fn cyl_inner(u: &[CylNumber], v: &[CylNumber]) -> Result<CylNumber> {
    if u.len() != v.len() {
        return Err(FlowError::Shape(format!("inner product of lengths {} and {}", u.len(), v.len())));
    }
    let lin = u.iter().zip(v).map(|(a, b)| a.lin * b.lin).sum();
    let ang: f64 = u.iter().zip(v).map(|(a, b)| a.ang * b.ang).sum();
    Ok(CylNumber::new(lin, ang))
}

/// Cylinder coordinates of a point: `y0 = e^{i x0/hbar} + (x1 + x2 + x3)`,
/// `yi = e^{i x0/hbar} - xi` in four dimensions, `y0 = e^{i x0/hbar} + x1`,
/// `y1 = e^{i x0/hbar} - x1` in two. All components share one phase.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorizedPoint {
    comps: Vec<CylNumber>,
}

impl FactorizedPoint {
    pub fn comps(&self) -> &[CylNumber] {
        &self.comps
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn approx_eq(&self, other: &FactorizedPoint, tol: f64) -> bool {
        self.dim() == other.dim() && self.comps.iter().zip(&other.comps).all(|(a, b)| a.approx_eq(b, tol))
    }

    /// Largest pairwise difference of the component phases on the circle.
    pub fn phase_spread(&self) -> f64 {
        let a0 = self.comps[0].ang;
        self.comps
            .iter()
            .map(|c| {
                let d = (c.ang - a0).abs();
                d.min(TAU - d)
            })
            .fold(0.0, f64::max)
    }

    fn shared_phase(&self) -> f64 {
        self.comps[0].unwrapped.unwrap_or(self.comps[0].ang)
    }
}

fn factorized(lins: Vec<f64>, x0: f64, cfg: &QuantConfig) -> FactorizedPoint {
    let phase = x0 / cfg.hbar;
    FactorizedPoint {
        comps: lins.into_iter().map(|l| CylNumber::with_unwrapped(l, phase)).collect(),
    }
}

pub fn factorize4(p: &Point4, cfg: &QuantConfig) -> FactorizedPoint {
    factorized(vec![p[1] + p[2] + p[3], -p[1], -p[2], -p[3]], p[0], cfg)
}

pub fn factorize2(x0: f64, x1: f64, cfg: &QuantConfig) -> FactorizedPoint {
    factorized(vec![x1, -x1], x0, cfg)
}

/// Inverse of [`factorize4`] reading `x0 = hbar * phase`, with the unwrapped
/// phase when present.
pub fn classical_limit4(f: &FactorizedPoint, cfg: &QuantConfig) -> Result<Point4> {
    if f.dim() != 4 {
        return Err(FlowError::Shape("expected a 4-component factorized point".into()));
    }
    let c = &f.comps;
    Ok(Point4::new(f.shared_phase() * cfg.hbar, -c[1].lin, -c[2].lin, -c[3].lin))
}

/// Inverse of [`factorize2`].
pub fn classical_limit2(f: &FactorizedPoint, cfg: &QuantConfig) -> Result<(f64, f64)> {
    if f.dim() != 2 {
        return Err(FlowError::Shape("expected a 2-component factorized point".into()));
    }
    Ok((f.shared_phase() * cfg.hbar, f.comps[0].lin))
}

/// Scales the cylinder by `k` along the perimeter and by `1/k` along the
/// generator: `y0' = e^{i k x0/hbar} + x1/k`, `y1' = e^{i k x0/hbar} - x1/k`.
pub fn deform_k(f: &FactorizedPoint, k: f64) -> Result<FactorizedPoint> {
    if !(k.is_finite() && k > 0.0) {
        return Err(FlowError::Domain(format!("deformation factor must be positive, got {k}")));
    }
    if f.dim() != 2 {
        return Err(FlowError::Shape("deformation acts on 2-component points".into()));
    }
    let comps = f
        .comps
        .iter()
        .map(|c| {
            let phase = c
                .unwrapped
                .ok_or_else(|| FlowError::Domain("deformation needs the unwrapped phase".into()))?;
            Ok(CylNumber::with_unwrapped(c.lin / k, phase * k))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FactorizedPoint { comps })
}

/// `x0 * x1` read back from a 2-component point.
pub fn reconstructed_product(f: &FactorizedPoint, cfg: &QuantConfig) -> Result<f64> {
    let (x0, x1) = classical_limit2(f, cfg)?;
    Ok(x0 * x1)
}

/// `e^{i S / hbar}`, with `S` reduced modulo `h` first.
pub fn phase_amplitude(s: f64, cfg: &QuantConfig) -> Complex64 {
    let theta = canonical_angle((s.rem_euclid(cfg.h())) / cfg.hbar);
    Complex64::new(theta.cos(), theta.sin())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantizedOrbit {
    pub z: i64,
    pub radius: f64,
    /// Period action by Gauss–Legendre quadrature.
    pub s_cl: f64,
    pub s_cl_over_h: f64,
    pub energy: f64,
    /// `|S_cl - z h|`.
    pub residual: f64,
    /// Period action and energy from an RK4 trajectory over one period.
    pub s_cl_numeric: f64,
    pub energy_numeric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitFailure {
    pub z: i64,
    pub reason: String,
}

const ACTION_NODES: usize = 32;
const RK4_STEPS: usize = 4096;

/// `oint p . dq` over one period of the circular orbit of radius `r` in the
/// potential `-alpha / r`, by Gauss–Legendre quadrature in the angle.
pub fn circular_period_action(alpha: f64, mass: f64, r: f64) -> f64 {
    let v = (alpha / (mass * r)).sqrt();
    let (nodes, weights) = gauss_legendre_on(ACTION_NODES, 0.0, TAU);
    nodes
        .iter()
        .zip(&weights)
        .map(|(&theta, w)| {
            // p = m v t, dq/dtheta = r t with t the unit tangent at theta
            let t = (-theta.sin(), theta.cos());
            let p = (mass * v * t.0, mass * v * t.1);
            w * (p.0 * r * t.0 + p.1 * r * t.1)
        })
        .sum()
}

/// Period action and final energy of the orbit started on the circle of
/// radius `r`, integrated by RK4 over one nominal period.
pub fn numeric_orbit(alpha: f64, mass: f64, r: f64) -> (f64, f64) {
    let v = (alpha / (mass * r)).sqrt();
    let period = TAU * r / v;
    let dt = period / RK4_STEPS as f64;
    let accel = |q: [f64; 2]| -> [f64; 2] {
        let d = (q[0] * q[0] + q[1] * q[1]).sqrt();
        let k = -alpha / (mass * d * d * d);
        [k * q[0], k * q[1]]
    };
    let mut q = [r, 0.0];
    let mut u = [0.0, v];
    let mut action = 0.0;
    let power = |u: [f64; 2]| mass * (u[0] * u[0] + u[1] * u[1]);
    for _ in 0..RK4_STEPS {
        let p0 = power(u);
        let k1 = (u, accel(q));
        let q2 = [q[0] + 0.5 * dt * k1.0[0], q[1] + 0.5 * dt * k1.0[1]];
        let u2 = [u[0] + 0.5 * dt * k1.1[0], u[1] + 0.5 * dt * k1.1[1]];
        let k2 = (u2, accel(q2));
        let q3 = [q[0] + 0.5 * dt * k2.0[0], q[1] + 0.5 * dt * k2.0[1]];
        let u3 = [u[0] + 0.5 * dt * k2.1[0], u[1] + 0.5 * dt * k2.1[1]];
        let k3 = (u3, accel(q3));
        let q4 = [q[0] + dt * k3.0[0], q[1] + dt * k3.0[1]];
        let u4 = [u[0] + dt * k3.1[0], u[1] + dt * k3.1[1]];
        let k4 = (u4, accel(q4));
        for i in 0..2 {
            q[i] += dt / 6.0 * (k1.0[i] + 2.0 * k2.0[i] + 2.0 * k3.0[i] + k4.0[i]);
            u[i] += dt / 6.0 * (k1.1[i] + 2.0 * k2.1[i] + 2.0 * k3.1[i] + k4.1[i]);
        }
        // trapezoid rule for oint p . dq = int m |u|^2 dt
        action += 0.5 * dt * (p0 + power(u));
    }
    let energy = 0.5 * mass * (u[0] * u[0] + u[1] * u[1]) - alpha / (q[0] * q[0] + q[1] * q[1]).sqrt();
    (action, energy)
}

fn select_radius(alpha: f64, mass: f64, target: f64) -> Result<f64> {
    let f = |r: f64| circular_period_action(alpha, mass, r) - target;
    let (mut lo, mut hi) = (1e-12, 1e12);
    if !(f(lo) < 0.0 && f(hi) > 0.0) {
        return Err(FlowError::numerical(format!("no radius in [{lo:e}, {hi:e}] has action {target}")));
    }
    // bisection in log r, then in r
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if f(lo).abs() <= f(hi).abs() { lo } else { hi })
}

/// Circular orbits of the attraction `-alpha / r` whose period action is
/// `z h`. Each `z` yields an orbit or a failure entry.
pub fn quantized_orbits(
    alpha: f64,
    mass: f64,
    cfg: &QuantConfig,
    zs: &[i64],
) -> Result<Vec<std::result::Result<QuantizedOrbit, OrbitFailure>>> {
    if !(alpha > 0.0 && mass > 0.0) {
        return Err(FlowError::Domain("coupling and mass must be positive".into()));
    }
    if zs.is_empty() {
        return Err(FlowError::Domain("empty quantum number range".into()));
    }
    let h = cfg.h();
    Ok(zs
        .iter()
        .map(|&z| {
            if z < 1 {
                return Err(OrbitFailure {
                    z,
                    reason: "quantum numbers start at 1".into(),
                });
            }
            let target = z as f64 * h;
            let radius = select_radius(alpha, mass, target).map_err(|e| OrbitFailure {
                z,
                reason: e.to_string(),
            })?;
            let s_cl = circular_period_action(alpha, mass, radius);
            let (s_num, e_num) = numeric_orbit(alpha, mass, radius);
            Ok(QuantizedOrbit {
                z,
                radius,
                s_cl,
                s_cl_over_h: s_cl / h,
                energy: -alpha / (2.0 * radius),
                residual: (s_cl - target).abs(),
                s_cl_numeric: s_num,
                energy_numeric: e_num,
            })
        })
        .collect())
}

/// `sum_k m |dq_k|^2 / |dx_k|` over the segments of a string, with `dq` the
/// observer-space displacement; the discrete `oint p . dq`.
pub fn string_period_action(path: &crate::action::StringPath) -> f64 {
    path.nodes()
        .windows(2)
        .map(|w| {
            let dx = w[1] - w[0];
            let dq = observer_part(&dx);
            path.mass() * dq.norm_squared() / dx.norm()
        })
        .sum()
}

/// A discrete charged orbit that is both stationary and quantized.
#[derive(Debug, Clone, Serialize)]
pub struct PrequantumOrbit {
    pub z: i64,
    pub flow_step: f64,
    pub radius: f64,
    pub s_cl: f64,
    /// Largest interior gradient norm of the discrete action.
    pub gradient_residual: f64,
    /// Distance of `S_cl / h` from the nearest integer.
    pub phase_residual: f64,
}

/// Tunes the flow step of a one-turn circular helix so that its period
/// action is `z h` while it sits at its balance radius, and reports both
/// stationarity residuals.
pub fn prequantum_orbit(base: &OrbitSpec, z: i64, cfg: &QuantConfig) -> Result<PrequantumOrbit> {
    if z < 1 {
        return Err(FlowError::Domain("quantum numbers start at 1".into()));
    }
    let target = z as f64 * cfg.h();
    let action_at = |a: f64| -> Result<f64> {
        let spec = OrbitSpec {
            flow_step: a,
            turns: 1,
            ..*base
        };
        let r = spec.balance_radius()?;
        Ok(spec.period_action(r))
    };
    let (mut lo, mut hi) = (1e-6, 1.0);
    while action_at(hi)? < target {
        hi *= 2.0;
        if hi > 1e9 {
            return Err(FlowError::numerical("no flow step reaches the target action"));
        }
    }
    while action_at(lo)? > target {
        lo *= 0.5;
        if lo < 1e-15 {
            return Err(FlowError::numerical("no flow step goes below the target action"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if action_at(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = if (action_at(lo)? - target).abs() <= (action_at(hi)? - target).abs() {
        lo
    } else {
        hi
    };
    let spec = OrbitSpec {
        flow_step: a,
        turns: 1,
        ..*base
    };
    let radius = spec.balance_radius()?;
    let string = spec.helix(radius)?;
    let field = spec.center_field()?;
    let gradient_residual = max_gradient_norm(&action_gradient(std::slice::from_ref(&string), &field)?);
    let s_cl = string_period_action(&string);
    let ratio = s_cl / cfg.h();
    Ok(PrequantumOrbit {
        z,
        flow_step: a,
        radius,
        s_cl,
        gradient_residual,
        phase_residual: (ratio - ratio.round()).abs(),
    })
}

/// Bohr radius and energy for comparison: `r_z = z^2 hbar^2 / (m alpha)`,
/// `E_z = -m alpha^2 / (2 hbar^2 z^2)`.
pub fn bohr_level(alpha: f64, mass: f64, cfg: &QuantConfig, z: i64) -> (f64, f64) {
    let zf = z as f64;
    let hb = cfg.hbar;
    (zf * zf * hb * hb / (mass * alpha), -mass * alpha * alpha / (2.0 * hb * hb * zf * zf))
}
