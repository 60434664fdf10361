//! Lattice-represented fields for the action: the self-consistent observer
//! potentials used by [`alternate_relax`], a sampler for 4-D lattice flows,
//! and the energy split of a lattice flow.
//!
//! Point values are read with the cubic B-spline (M4) kernel, which is a
//! partition of unity with a continuous second derivative. Sources are
//! deposited with the same kernel, so the string terms are exactly linear in
//! the nodal potentials.

use nalgebra::Matrix4;
use serde::Serialize;

use super::{action_value, relax_strings, ActionBreakdown, ActionField, RelaxOptions, StringPath};
use crate::error::{FlowError, Result};
use crate::exterior::{ext_d, form_inner, Boundary, Lattice, LatticeForm, Point4, Signature, Vec3, Vec4};
use crate::solver::solve_poisson;
use crate::statics::{
    helmholtz_split, observer_axis, observer_part, remove_component_means, unit_flow, vacuum, FlowField, POISSON_MAX_ITER,
    POISSON_TOL,
};

/// Cubic B-spline `M4(u)` and its derivative; support `|u| < 2`.
pub fn m4_weight(u: f64) -> (f64, f64) {
    let a = u.abs();
    let s = u.signum();
    if a < 1.0 {
        ((4.0 - 6.0 * a * a + 3.0 * a * a * a) / 6.0, s * (-2.0 * a + 1.5 * a * a))
    } else if a < 2.0 {
        let b = 2.0 - a;
        (b * b * b / 6.0, -s * 0.5 * b * b)
    } else {
        (0.0, 0.0)
    }
}

/// The four periodic nodes touching lattice coordinate `t`, with weights and
/// derivatives in `t`.
fn stencil(t: f64, n: usize) -> [(usize, f64, f64); 4] {
    let base = t.floor();
    let mut out = [(0, 0.0, 0.0); 4];
    for (j, slot) in out.iter_mut().enumerate() {
        let node = base + j as f64 - 1.0;
        let (w, dw) = m4_weight(t - node);
        *slot = ((node as i64).rem_euclid(n as i64) as usize, w, dw);
    }
    out
}

/// Value and gradient of the M4 reconstruction of a 3-D periodic 0-form at
/// lattice position `q`.
fn interp3(f: &LatticeForm, q: &Vec3) -> (f64, Vec3) {
    let lat = f.lattice();
    let h = lat.spacing();
    let dims = lat.dims();
    let sx = stencil(q.x / h, dims[0]);
    let sy = stencil(q.y / h, dims[1]);
    let sz = stencil(q.z / h, dims[2]);
    let mut v = 0.0;
    let mut g = Vec3::zeros();
    for &(i, wx, dx) in &sx {
        for &(j, wy, dy) in &sy {
            for &(k, wz, dz) in &sz {
                let c = f.coeffs()[lat.site_index(&[i, j, k])];
                v += c * wx * wy * wz;
                g += c * Vec3::new(dx * wy * wz, wx * dy * wz, wx * wy * dz);
            }
        }
    }
    (v, g / h)
}

fn deposit3(target: &mut [f64], lat: &Lattice, q: &Vec3, amount: f64) {
    let h = lat.spacing();
    let dims = lat.dims();
    let sx = stencil(q.x / h, dims[0]);
    let sy = stencil(q.y / h, dims[1]);
    let sz = stencil(q.z / h, dims[2]);
    for &(i, wx, _) in &sx {
        for &(j, wy, _) in &sy {
            for &(k, wz, _) in &sz {
                target[lat.site_index(&[i, j, k])] += amount * wx * wy * wz;
            }
        }
    }
}

/// Observer-space gradient `(g1, g2, g3)` as a covector on E(4).
fn lift(g: &Vec3) -> Vec4 {
    (0..3).fold(Vec4::zeros(), |acc, i| acc + observer_axis(i) * g[i])
}

/// Gravitational and electric potentials on a periodic observer lattice.
///
/// The flow is `B = c + d phi_G + phi_E n`. Strings see the mass weight
/// `G = 1 + phi_G`, the weak-field form of `|G| / |c|`, and `A = phi_E n`.
/// The field term is `T/2 (<d phi_G, d phi_G> + <d phi_E, d phi_E>)` for a
/// region of flow extent `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverLatticeField {
    phi_g: LatticeForm,
    phi_e: LatticeForm,
    flow_extent: f64,
}

impl ObserverLatticeField {
    pub fn zero(lattice: &Lattice, flow_extent: f64) -> Result<Self> {
        if lattice.ndim() != 3 || lattice.boundary() != Boundary::Periodic || lattice.signature() != Signature::Euclidean {
            return Err(FlowError::Domain("observer potentials need a periodic Euclidean 3-D lattice".into()));
        }
        if !(flow_extent.is_finite() && flow_extent > 0.0) {
            return Err(FlowError::Domain(format!("flow extent must be positive, got {flow_extent}")));
        }
        Ok(ObserverLatticeField {
            phi_g: LatticeForm::zeros(lattice, 0)?,
            phi_e: LatticeForm::zeros(lattice, 0)?,
            flow_extent,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        self.phi_g.lattice()
    }

    pub fn phi_g(&self) -> &LatticeForm {
        &self.phi_g
    }

    pub fn phi_e(&self) -> &LatticeForm {
        &self.phi_e
    }

    pub fn flow_extent(&self) -> f64 {
        self.flow_extent
    }

    /// Deposited source vectors `(b_G, b_E)`: the string terms equal
    /// `b_G . phi_G + b_E . phi_E` plus the bare length `sum m |dx|`.
    pub fn sources(&self, strings: &[StringPath]) -> (Vec<f64>, Vec<f64>) {
        let lat = self.lattice();
        let mut bg = vec![0.0; lat.num_sites()];
        let mut be = vec![0.0; lat.num_sites()];
        for s in strings {
            for w in s.nodes().windows(2) {
                let mid = (w[0] + w[1]) * 0.5;
                let dx = w[1] - w[0];
                let q = observer_part(&mid);
                if s.mass() != 0.0 {
                    deposit3(&mut bg, lat, &q, s.mass() * dx.norm());
                }
                if s.charge() != 0.0 {
                    deposit3(&mut be, lat, &q, s.charge() * unit_flow().dot(&dx));
                }
            }
        }
        (bg, be)
    }

    /// Exact minimiser of the action over mean-free potentials with the
    /// strings held fixed: `T h^3 codiff d phi = -b` for each potential.
    pub fn solved_for(&self, strings: &[StringPath]) -> Result<(ObserverLatticeField, usize)> {
        let lat = self.lattice().clone();
        let (bg, be) = self.sources(strings);
        let scale = -1.0 / (self.flow_extent * lat.cell_weight(0));
        let mut iterations = 0;
        let mut solve = |b: Vec<f64>| -> Result<LatticeForm> {
            let rhs = LatticeForm::from_coeffs(&lat, 0, b.iter().map(|v| v * scale).collect())?;
            let (phi, out) = solve_poisson(&lat, &rhs, POISSON_TOL, POISSON_MAX_ITER)?;
            iterations += out.iterations;
            Ok(phi)
        };
        let phi_g = solve(bg)?;
        let phi_e = solve(be)?;
        Ok((
            ObserverLatticeField {
                phi_g,
                phi_e,
                flow_extent: self.flow_extent,
            },
            iterations,
        ))
    }
}

impl ActionField for ObserverLatticeField {
    fn mass_weight(&self, x: &Point4) -> Result<(f64, Vec4)> {
        let (v, g) = interp3(&self.phi_g, &observer_part(x));
        let w = 1.0 + v;
        if !(w > 0.0) {
            return Err(FlowError::numerical(format!("mass weight {w:e} is not positive")));
        }
        Ok((w, lift(&g)))
    }

    fn charge_covector(&self, x: &Point4) -> Result<(Vec4, Matrix4<f64>)> {
        let (v, g) = interp3(&self.phi_e, &observer_part(x));
        Ok((unit_flow() * v, unit_flow() * lift(&g).transpose()))
    }

    fn field_energy(&self) -> Result<Option<f64>> {
        let dg = ext_d(&self.phi_g)?;
        let de = ext_d(&self.phi_e)?;
        Ok(Some(0.5 * self.flow_extent * (form_inner(&dg, &dg)? + form_inner(&de, &de)?)))
    }
}

#[derive(Debug, Clone)]
pub struct AlternateProblem {
    pub lattice: Lattice,
    pub flow_extent: f64,
    pub strings: Vec<StringPath>,
    pub relax: RelaxOptions,
    pub rounds: usize,
    /// Allowed increase of `S_total` per half-step, relative to `max(1, |S|)`.
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct AlternateOutcome {
    pub strings: Vec<StringPath>,
    pub field: ObserverLatticeField,
    /// Breakdown at the start and after every half-step.
    pub trace: Vec<ActionBreakdown>,
    /// Poisson iterations per field half-step.
    pub solver_iterations: Vec<usize>,
    pub strings_converged: bool,
}

/// Alternates an exact field solve with string relaxation. Both half-steps
/// minimise the same functional, so the trace is non-increasing; an increase
/// beyond the tolerance is a numerical failure carrying the trace.
pub fn alternate_relax(problem: &AlternateProblem) -> Result<AlternateOutcome> {
    let mut field = ObserverLatticeField::zero(&problem.lattice, problem.flow_extent)?;
    let mut strings = problem.strings.clone();
    let mut trace = vec![action_value(&strings, &field)?];
    let mut solver_iterations = Vec::new();
    let mut strings_converged = strings.is_empty();
    let record = |trace: &mut Vec<ActionBreakdown>, b: ActionBreakdown| -> Result<()> {
        let prev = trace.last().expect("trace starts non-empty").s_total;
        trace.push(b);
        let now = trace.last().unwrap().s_total;
        if now > prev + problem.tolerance * prev.abs().max(1.0) {
            return Err(FlowError::Numerical {
                message: format!("action increased from {prev} to {now} during alternation"),
                trace: trace.iter().map(|b| b.s_total).collect(),
            });
        }
        Ok(())
    };
    for _ in 0..problem.rounds {
        let (next, its) = field.solved_for(&strings)?;
        field = next;
        solver_iterations.push(its);
        record(&mut trace, action_value(&strings, &field)?)?;
        if !strings.is_empty() {
            let out = relax_strings(&strings, &field, &problem.relax)?;
            strings = out.strings;
            strings_converged = out.converged;
        }
        record(&mut trace, action_value(&strings, &field)?)?;
    }
    Ok(AlternateOutcome {
        strings,
        field,
        trace,
        solver_iterations,
        strings_converged,
    })
}

/// Pointwise view of a 4-D periodic lattice flow for the action. The
/// perturbation is split into its gradient part and the remainder (the
/// constant mode joins the remainder); site values are reconstructed with the
/// M4 kernel.
#[derive(Debug, Clone)]
pub struct LatticeFlowSampler {
    perturbation: LatticeForm,
    g_sites: Vec<Vec4>,
    a_sites: Vec<Vec4>,
}

impl LatticeFlowSampler {
    pub fn new(field: &FlowField) -> Result<Self> {
        let FlowField::Lattice { perturbation } = field else {
            return Err(FlowError::Domain("sampler wraps lattice flows".into()));
        };
        let lat = perturbation.lattice();
        if lat.ndim() != 4 {
            return Err(FlowError::Shape("sampler needs a 4-D lattice".into()));
        }
        let split = helmholtz_split(&remove_component_means(perturbation))?;
        let h = lat.spacing();
        let remainder = perturbation.combine(1.0, &split.gradient, -1.0)?;
        let site_vec = |f: &LatticeForm, s: usize| Vec4::from_fn(|a, _| f.get(s, 1 << a) / h);
        let g_sites = (0..lat.num_sites()).map(|s| vacuum() + site_vec(&split.gradient, s)).collect();
        let a_sites = (0..lat.num_sites()).map(|s| site_vec(&remainder, s)).collect();
        Ok(LatticeFlowSampler {
            perturbation: perturbation.clone(),
            g_sites,
            a_sites,
        })
    }

    /// Reconstructed `(G, J_G, A, J_A)` at `x`.
    fn sample(&self, x: &Point4) -> (Vec4, Matrix4<f64>, Vec4, Matrix4<f64>) {
        let lat = self.perturbation.lattice();
        let h = lat.spacing();
        let st: Vec<[(usize, f64, f64); 4]> = (0..4).map(|a| stencil(x[a] / h, lat.dims()[a])).collect();
        let (mut g, mut jg, mut a, mut ja) = (Vec4::zeros(), Matrix4::zeros(), Vec4::zeros(), Matrix4::zeros());
        for &(i0, w0, d0) in &st[0] {
            for &(i1, w1, d1) in &st[1] {
                for &(i2, w2, d2) in &st[2] {
                    for &(i3, w3, d3) in &st[3] {
                        let site = lat.site_index(&[i0, i1, i2, i3]);
                        let w = w0 * w1 * w2 * w3;
                        let dw = Vec4::new(d0 * w1 * w2 * w3, w0 * d1 * w2 * w3, w0 * w1 * d2 * w3, w0 * w1 * w2 * d3) / h;
                        g += self.g_sites[site] * w;
                        a += self.a_sites[site] * w;
                        jg += self.g_sites[site] * dw.transpose();
                        ja += self.a_sites[site] * dw.transpose();
                    }
                }
            }
        }
        (g, jg, a, ja)
    }
}

impl ActionField for LatticeFlowSampler {
    fn mass_weight(&self, x: &Point4) -> Result<(f64, Vec4)> {
        let (g, jg, _, _) = self.sample(x);
        let norm = g.norm();
        if norm == 0.0 {
            return Err(FlowError::Singularity("gravitational part vanishes".into()));
        }
        let c = vacuum().norm();
        Ok((norm / c, jg.transpose() * g / (norm * c)))
    }

    fn charge_covector(&self, x: &Point4) -> Result<(Vec4, Matrix4<f64>)> {
        let (_, _, a, ja) = self.sample(x);
        Ok((a, ja))
    }

    /// `<dB, dB>` over the lattice box.
    fn field_energy(&self) -> Result<Option<f64>> {
        let db = ext_d(&self.perturbation)?;
        Ok(Some(form_inner(&db, &db)?))
    }
}

/// L2 energies of a lattice flow and its parts. The curvature energies
/// `<dB, dB>` and `<dA, dA>` agree because `dG = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldEnergySplit {
    pub total: f64,
    pub em: f64,
    pub grav: f64,
    pub cross: f64,
    pub curvature_total: f64,
    pub curvature_em: f64,
}

/// Splits `B = G + A` with `G` a gradient and `A` co-closed (the constant
/// mode belongs to `A`) and reports `<B,B>`, `<A,A>`, `<G,G>` and the
/// remainder `total - em - grav`, which vanishes by orthogonality.
pub fn field_energy_split(b: &LatticeForm) -> Result<FieldEnergySplit> {
    if b.lattice().boundary() != Boundary::Periodic {
        return Err(FlowError::Domain("energy split needs a periodic lattice".into()));
    }
    let split = helmholtz_split(&remove_component_means(b))?;
    let g = split.gradient;
    let a = b.combine(1.0, &g, -1.0)?;
    let total = form_inner(b, b)?;
    let em = form_inner(&a, &a)?;
    let grav = form_inner(&g, &g)?;
    let db = ext_d(b)?;
    let da = ext_d(&a)?;
    Ok(FieldEnergySplit {
        total,
        em,
        grav,
        cross: total - em - grav,
        curvature_total: form_inner(&db, &db)?,
        curvature_em: form_inner(&da, &da)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{action_gradient, Endpoints};
    use crate::statics::embed;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rustfft::FftPlanner;

    #[test]
    fn m4_partition_of_unity_and_derivative() {
        for k in 0..50 {
            let t = -3.0 + 0.137 * k as f64;
            let s: f64 = stencil(t, 16).iter().map(|x| x.1).sum();
            let ds: f64 = stencil(t, 16).iter().map(|x| x.2).sum();
            assert!((s - 1.0).abs() < 1e-14 && ds.abs() < 1e-14);
            let (_, d) = m4_weight(t / 2.0);
            let fd = (m4_weight(t / 2.0 + 1e-6).0 - m4_weight(t / 2.0 - 1e-6).0) / 2e-6;
            assert!((d - fd).abs() < 1e-8);
        }
    }

    fn static_charge(q: Vec3, extent: f64, charge: f64, n: usize) -> StringPath {
        let nodes = (0..=n).map(|k| embed(&q, extent * k as f64 / n as f64)).collect();
        StringPath::new(nodes, 2.0 * extent / n as f64, 0.0, charge, Endpoints::Fixed).unwrap()
    }

    /// Oracle: periodic Poisson solve by FFT with the symbol of the 7-point
    /// Laplacian, source deposited independently.
    fn fft_poisson(lat: &Lattice, density: &[f64]) -> Vec<f64> {
        let n = lat.dims()[0];
        let h = lat.spacing();
        let mut data: Vec<Complex64> = density.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let idx = |i: usize, j: usize, k: usize| i + n * (j + n * k);
        let pass = |data: &mut Vec<Complex64>, plan: &std::sync::Arc<dyn rustfft::Fft<f64>>| {
            for axis in 0..3 {
                for a in 0..n {
                    for b in 0..n {
                        let ids: Vec<usize> = (0..n)
                            .map(|t| match axis {
                                0 => idx(t, a, b),
                                1 => idx(a, t, b),
                                _ => idx(a, b, t),
                            })
                            .collect();
                        let mut line: Vec<Complex64> = ids.iter().map(|&i| data[i]).collect();
                        plan.process(&mut line);
                        for (&i, v) in ids.iter().zip(line) {
                            data[i] = v;
                        }
                    }
                }
            }
        };
        pass(&mut data, &fwd);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let lam: f64 = [i, j, k]
                        .iter()
                        .map(|&m| 4.0 / (h * h) * (std::f64::consts::PI * m as f64 / n as f64).sin().powi(2))
                        .sum();
                    let v = &mut data[idx(i, j, k)];
                    // -Lap phi = -rho  =>  phi_hat = -rho_hat / lam
                    *v = if lam == 0.0 { Complex64::new(0.0, 0.0) } else { -*v / lam };
                }
            }
        }
        pass(&mut data, &inv);
        data.iter().map(|v| v.re / (n * n * n) as f64).collect()
    }

    #[test]
    fn unit_charge_field_matches_fft_poisson() {
        let lat = Lattice::periodic(3, 16, 0.25).unwrap();
        let extent = 2.0;
        let q = Vec3::new(1.93, 2.11, 1.71);
        let s = static_charge(q, extent, 1.0, 8);
        let f = ObserverLatticeField::zero(&lat, extent).unwrap();
        let (f, _) = f.solved_for(&[s]).unwrap();
        // independent deposit: the string's flow advance is `extent`, so the
        // density is the M4 kernel at q scaled to a unit charge
        let h = lat.spacing();
        let mut rho = vec![0.0; lat.num_sites()];
        for site in 0..lat.num_sites() {
            let p = lat.site_position(site);
            let mut w = 1.0;
            for a in 0..3 {
                let mut d = q[a] - p[a];
                let l = 16.0 * h;
                d -= l * (d / l).round();
                w *= m4_weight(d / h).0;
            }
            rho[site] = w / h.powi(3);
        }
        let mean = rho.iter().sum::<f64>() / rho.len() as f64;
        rho.iter_mut().for_each(|v| *v -= mean);
        let oracle = fft_poisson(&lat, &rho);
        let scale = oracle.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = f
            .phi_e()
            .coeffs()
            .iter()
            .zip(&oracle)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err <= 1e-8 * scale, "err {err:e} scale {scale:e}");
        // a unit charge: the potential falls off like -1/(4 pi r) away from it
        assert_eq!(f.phi_g().max_abs(), 0.0);
    }

    #[test]
    fn field_half_step_minimises_action() {
        let lat = Lattice::periodic(3, 8, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let strings: Vec<StringPath> = (0..2)
            .map(|_| {
                let q = Vec3::from_fn(|_, _| rng.gen_range(0.5..3.5));
                let nodes = (0..=6).map(|k| embed(&q, 0.5 * k as f64)).collect();
                StringPath::new(nodes, 1.0, 0.05, 0.3, Endpoints::Fixed).unwrap()
            })
            .collect();
        let f0 = ObserverLatticeField::zero(&lat, 3.0).unwrap();
        let (f, _) = f0.solved_for(&strings).unwrap();
        let s_min = action_value(&strings, &f).unwrap().s_total;
        for _ in 0..5 {
            let mut g = f.clone();
            for c in g.phi_e.coeffs_mut() {
                *c += 1e-3 * rng.gen_range(-1.0..1.0);
            }
            let mean = g.phi_e.coeffs().iter().sum::<f64>() / lat.num_sites() as f64;
            g.phi_e.coeffs_mut().iter_mut().for_each(|c| *c -= mean);
            assert!(action_value(&strings, &g).unwrap().s_total >= s_min - 1e-12);
        }
    }

    fn fd_worst(strings: &[StringPath], field: &dyn ActionField) -> f64 {
        let grad = action_gradient(strings, field).unwrap();
        let mut worst: f64 = 0.0;
        for (j, s) in strings.iter().enumerate() {
            for k in s.movable() {
                for a in 0..4 {
                    let bump = |d: f64| {
                        let mut nodes = s.nodes().to_vec();
                        nodes[k][a] += d;
                        let mut set = strings.to_vec();
                        set[j] = s.with_nodes(nodes).unwrap();
                        action_value(&set, field).unwrap().s_total
                    };
                    let fd = (bump(1e-5) - bump(-1e-5)) / 2e-5;
                    worst = worst.max((fd - grad[j][k][a]).abs() / grad[j][k][a].abs().max(1.0));
                }
            }
        }
        worst
    }

    #[test]
    fn lattice_fields_have_consistent_gradients() {
        let lat = Lattice::periodic(3, 8, 0.5).unwrap();
        let q = Vec3::new(1.3, 2.2, 0.9);
        let src = static_charge(q, 3.0, 1.0, 6).with_coupling(0.2, 1.0).unwrap();
        let (f, _) = ObserverLatticeField::zero(&lat, 3.0).unwrap().solved_for(&[src]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let probe: Vec<Point4> = (0..=5)
            .map(|k| embed(&Vec3::new(2.5, 0.7, 3.1), 0.4 * k as f64) + Vec4::from_fn(|_, _| rng.gen_range(-0.05..0.05)))
            .collect();
        let probe = StringPath::new(probe, 0.8, 0.7, -0.4, Endpoints::Fixed).unwrap();
        assert!(fd_worst(std::slice::from_ref(&probe), &f) <= 1e-6);

        let l4 = Lattice::periodic(4, 4, 0.5).unwrap();
        let pert = LatticeForm::from_fn(&l4, 1, |s, m| {
            let p = l4.site_position(s);
            0.05 * (p[0] * 1.57 + m as f64).sin() * (p[2] * 1.57).cos()
        })
        .unwrap();
        let sampler = LatticeFlowSampler::new(&FlowField::lattice(pert).unwrap()).unwrap();
        assert!(fd_worst(&[probe], &sampler) <= 1e-6);
        assert!(sampler.field_energy().unwrap().unwrap() > 0.0);
    }

    #[test]
    fn no_sources_is_a_fixed_point() {
        let problem = AlternateProblem {
            lattice: Lattice::periodic(3, 8, 0.5).unwrap(),
            flow_extent: 2.0,
            strings: vec![],
            relax: RelaxOptions::default(),
            rounds: 2,
            tolerance: 1e-8,
        };
        let out = alternate_relax(&problem).unwrap();
        assert!(out.trace.iter().all(|b| b.s_total == 0.0));
        assert_eq!(out.field.phi_g().max_abs(), 0.0);
    }

    #[test]
    fn alternation_is_monotone_and_idempotent_at_convergence() {
        let lat = Lattice::periodic(3, 8, 0.5).unwrap();
        let a = embed(&Vec3::new(1.0, 2.0, 2.0), 0.0);
        let b = embed(&Vec3::new(3.0, 2.0, 2.0), 3.0);
        let mass = StringPath::straight(a, b, 6, 0.1, 0.0).unwrap();
        let c = embed(&Vec3::new(2.0, 1.0, 2.5), 0.0);
        let d = embed(&Vec3::new(2.0, 3.0, 1.5), 3.0);
        let charge = StringPath::straight(c, d, 6, 0.1, 0.2).unwrap();
        let problem = AlternateProblem {
            lattice: lat,
            flow_extent: 3.0,
            strings: vec![mass, charge],
            relax: RelaxOptions { max_iters: 5000, tol: 1e-9 },
            rounds: 6,
            tolerance: 1e-8,
        };
        let out = alternate_relax(&problem).unwrap();
        for w in out.trace.windows(2) {
            assert!(w[1].s_total <= w[0].s_total + 1e-8 * w[0].s_total.abs().max(1.0));
        }
        let again = alternate_relax(&AlternateProblem {
            strings: out.strings.clone(),
            rounds: 1,
            ..problem.clone()
        })
        .unwrap();
        // restarting from zero field re-solves the same field in one half-step
        let last = out.trace.last().unwrap().s_total;
        let redo = again.trace.last().unwrap().s_total;
        assert!((redo - last).abs() <= 1e-8 * last.abs().max(1.0), "{redo} vs {last}");
    }

    fn random_form(lat: &Lattice, seed: u64) -> LatticeForm {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        LatticeForm::from_fn(lat, 1, |_, _| rng.gen_range(-1.0..1.0)).unwrap()
    }

    #[test]
    fn energy_split_cases() {
        let lat = Lattice::periodic(3, 16, 0.5).unwrap();
        // pure gradient
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let phi = LatticeForm::from_fn(&lat, 0, |_, _| rng.gen_range(-1.0..1.0)).unwrap();
        let g = ext_d(&phi).unwrap();
        let s = field_energy_split(&g).unwrap();
        assert!(s.em <= 1e-8 * s.total);
        // random
        let b = random_form(&lat, 15);
        let s = field_energy_split(&b).unwrap();
        assert!(s.cross.abs() <= 1e-6 * s.total);
        assert!((s.curvature_total - s.curvature_em).abs() <= 1e-8 * s.curvature_total);
        // divergence-free: remainder of a random field
        let split = helmholtz_split(&remove_component_means(&b)).unwrap();
        let s = field_energy_split(&split.remainder).unwrap();
        assert!(s.grav <= 1e-8 * s.total);
    }

    #[test]
    fn energy_split_divergence_free_fourier_oracle() {
        // a transverse plane wave: B = (0, sin(2 pi x0 / L), 0) is co-closed
        let lat = Lattice::periodic(3, 8, 0.5).unwrap();
        let l = 8.0 * 0.5;
        let b = LatticeForm::from_fn(&lat, 1, |s, m| {
            let p = lat.site_position(s);
            if m == 0b010 {
                (2.0 * std::f64::consts::PI * p[0] / l).sin()
            } else {
                0.0
            }
        })
        .unwrap();
        let s = field_energy_split(&b).unwrap();
        assert!(s.grav <= 1e-8 * s.total);
        assert!((s.em - s.total).abs() <= 1e-8 * s.total);
    }
}
