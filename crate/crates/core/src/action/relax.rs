//! Deterministic descent on the node positions of fixed-endpoint strings.
//!
//! Nodes move inside their flow slices: the flow coordinate `<n, x^k>` of
//! every node is held at its initial value, which fixes the string
//! parameter (the homogeneity gauge). Without this gauge the midpoint rule
//! lets nodes slide along the string until segments collapse.

use serde::{Deserialize, Serialize};

use super::{action_gradient, action_value, ActionField, Endpoints, StringPath};
use crate::error::{FlowError, Result};
use crate::exterior::Vec4;
use crate::statics::unit_flow;

const ARMIJO: f64 = 1e-4;
const SHRINK: f64 = 0.5;
const MAX_BACKTRACK: usize = 60;
/// Rounding level of `S_total`, in units of `eps * max(1, |S|)`.
const NOISE_ULPS: f64 = 16.0;
/// Stored curvature pairs.
const MEMORY: usize = 8;
/// Pairs with `s.y` below this fraction of `|s| |y|` are discarded.
const CURVATURE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaxOptions {
    pub max_iters: usize,
    /// Target for the largest interior node gradient norm.
    pub tol: f64,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        RelaxOptions {
            max_iters: 20_000,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RelaxOutcome {
    pub strings: Vec<StringPath>,
    /// Largest interior node gradient norm of the returned state, with the
    /// flow component removed.
    pub residual: f64,
    /// Largest flow component `|<n, dS/dx^k>|` of an interior node gradient;
    /// the reparametrization defect of the discretisation, not minimised.
    pub flow_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `S_total` after every accepted step, starting with the initial value.
    pub trace: Vec<f64>,
}

/// Interior node gradients projected onto the flow slices, flattened.
fn flatten(grad: &[Vec<Vec4>], strings: &[StringPath]) -> Vec<f64> {
    let n = unit_flow();
    let mut out = Vec::new();
    for (g, s) in grad.iter().zip(strings) {
        for k in s.movable() {
            out.extend((g[k] - n * n.dot(&g[k])).iter());
        }
    }
    out
}

fn max_node_norm(flat: &[f64]) -> f64 {
    flat.chunks(4).map(|c| dot(c, c).sqrt()).fold(0.0, f64::max)
}

fn max_flow_component(grad: &[Vec<Vec4>], strings: &[StringPath]) -> f64 {
    let n = unit_flow();
    grad.iter()
        .zip(strings)
        .flat_map(|(g, s)| s.movable().map(move |k| n.dot(&g[k]).abs()))
        .fold(0.0, f64::max)
}

fn step(strings: &[StringPath], dir: &[f64], alpha: f64) -> Result<Vec<StringPath>> {
    let mut it = dir.iter();
    strings
        .iter()
        .map(|s| {
            let mut nodes = s.nodes().to_vec();
            for k in s.movable() {
                for a in 0..4 {
                    nodes[k][a] -= alpha * it.next().expect("direction sized by movable nodes");
                }
            }
            s.with_nodes(nodes)
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Limited-memory BFGS search direction `H g` from the stored pairs
/// `(s_i, y_i)`, oldest first.
fn lbfgs_direction(g: &[f64], pairs: &std::collections::VecDeque<(Vec<f64>, Vec<f64>)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut coef = Vec::with_capacity(pairs.len());
    for (sv, yv) in pairs.iter().rev() {
        let rho = 1.0 / dot(yv, sv);
        let a = rho * dot(sv, &q);
        q.iter_mut().zip(yv).for_each(|(qi, yi)| *qi -= a * yi);
        coef.push((rho, a));
    }
    if let Some((sv, yv)) = pairs.back() {
        let gamma = dot(sv, yv) / dot(yv, yv);
        q.iter_mut().for_each(|qi| *qi *= gamma);
    }
    for ((sv, yv), (rho, a)) in pairs.iter().zip(coef.into_iter().rev()) {
        let b = rho * dot(yv, &q);
        q.iter_mut().zip(sv).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q
}

/// Line-search descent along limited-memory quasi-Newton directions with
/// Armijo backtracking (shrink 0.5). Every accepted step leaves `S_total`
/// non-increasing up to its rounding level; once the Armijo decrease drops
/// below that level a step is accepted when it lowers the largest node
/// gradient instead. Trial states that break the direction condition or hit
/// a singularity are treated as rejected. At the iteration cap the best
/// state is returned with `converged = false`.
pub fn relax_strings(strings: &[StringPath], field: &dyn ActionField, opts: &RelaxOptions) -> Result<RelaxOutcome> {
    if let Some(s) = strings.iter().find(|s| s.endpoints() != Endpoints::Fixed) {
        return Err(FlowError::Domain(format!(
            "relaxation needs fixed endpoints (string with {} nodes has free ends)",
            s.nodes().len()
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(FlowError::Config("relaxation tolerance must be positive".into()));
    }
    let mut cur = strings.to_vec();
    let mut s_cur = action_value(&cur, field)?.s_total;
    let mut grad = action_gradient(&cur, field)?;
    let mut g = flatten(&grad, &cur);
    let mut residual = max_node_norm(&g);
    let mut trace = vec![s_cur];
    let mut pairs = std::collections::VecDeque::with_capacity(MEMORY);
    let mut iterations = 0;

    while residual > opts.tol && iterations < opts.max_iters {
        iterations += 1;
        let mut dir = lbfgs_direction(&g, &pairs);
        let mut slope = dot(&g, &dir);
        if !(slope > 0.0) {
            pairs.clear();
            dir = g.clone();
            slope = dot(&g, &g);
        }
        let mut t = if pairs.is_empty() {
            let gmax = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            (0.1 / gmax).min(1.0)
        } else {
            1.0
        };
        let noise = NOISE_ULPS * f64::EPSILON * s_cur.abs().max(1.0);
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACK {
            if let Ok(next) = step(&cur, &dir, t) {
                if let Ok(b) = action_value(&next, field) {
                    let s_new = b.s_total;
                    let decrease = ARMIJO * t * slope;
                    if s_new <= s_cur - decrease {
                        accepted = Some((next, s_new, None));
                        break;
                    }
                    // below the rounding level of S progress is judged by the gradient
                    if decrease <= noise && s_new <= s_cur + noise {
                        let grad_new = action_gradient(&next, field)?;
                        if max_node_norm(&flatten(&grad_new, &next)) < residual {
                            accepted = Some((next, s_new, Some(grad_new)));
                            break;
                        }
                    }
                }
            }
            t *= SHRINK;
        }
        let Some((next, s_new, grad_new)) = accepted else {
            if pairs.is_empty() {
                break;
            }
            // retry from a steepest-descent direction before giving up
            pairs.clear();
            continue;
        };
        let grad_new = match grad_new {
            Some(g) => g,
            None => action_gradient(&next, field)?,
        };
        let g_new = flatten(&grad_new, &next);
        let sv: Vec<f64> = dir.iter().map(|d| -t * d).collect();
        let yv: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&sv, &yv);
        if sy > CURVATURE_FLOOR * dot(&sv, &sv).sqrt() * dot(&yv, &yv).sqrt() {
            if pairs.len() == MEMORY {
                pairs.pop_front();
            }
            pairs.push_back((sv, yv));
        }
        cur = next;
        s_cur = s_new;
        grad = grad_new;
        g = g_new;
        residual = max_node_norm(&g);
        trace.push(s_cur);
    }
    Ok(RelaxOutcome {
        flow_residual: max_flow_component(&grad, &cur),
        strings: cur,
        residual,
        iterations,
        converged: residual <= opts.tol,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::FlatField;
    use crate::exterior::Point4;
    use nalgebra::Matrix4;

    fn chord_deviation(s: &StringPath) -> f64 {
        let a = s.nodes()[0];
        let b = *s.nodes().last().unwrap();
        let u = (b - a).normalize();
        s.nodes()
            .iter()
            .map(|p| {
                let d = p - a;
                (d - u * d.dot(&u)).norm()
            })
            .fold(0.0, f64::max)
    }

    fn bent(n: usize) -> StringPath {
        let a = Point4::zeros();
        let b = Point4::new(1.0, 0.6, 0.2, 0.4);
        let s = StringPath::straight(a, b, n, 1.0, 0.0).unwrap();
        let nodes = s
            .nodes()
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let t = k as f64 / n as f64;
                p + Vec4::new(0.0, 0.3, -0.2, 0.1) * (std::f64::consts::PI * t).sin()
            })
            .collect();
        s.with_nodes(nodes).unwrap()
    }

    #[test]
    fn bent_string_relaxes_to_chord() {
        let out = relax_strings(&[bent(16)], &FlatField, &RelaxOptions::default()).unwrap();
        assert!(out.converged, "residual {}", out.residual);
        assert!(chord_deviation(&out.strings[0]) <= 1e-6);
        assert!(out.trace.windows(2).all(|w| w[1] <= w[0] + 16.0 * f64::EPSILON * w[0].abs().max(1.0)));
    }

    #[test]
    fn converged_input_takes_no_steps() {
        let s = StringPath::straight(Point4::zeros(), Point4::new(1.0, 1.0, 0.0, 0.0), 8, 1.0, 0.0).unwrap();
        let out = relax_strings(&[s], &FlatField, &RelaxOptions::default()).unwrap();
        assert_eq!(out.iterations, 0);
        assert!(out.converged);
    }

    #[test]
    fn iteration_cap_flags_non_convergence() {
        let opts = RelaxOptions { max_iters: 2, tol: 1e-14 };
        let out = relax_strings(&[bent(16)], &FlatField, &opts).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 2);
        assert!(out.trace[2] <= out.trace[0]);
    }

    #[test]
    fn free_endpoints_rejected() {
        let s = bent(4);
        let free = StringPath::new(s.nodes().to_vec(), 1.0, 1.0, 0.0, Endpoints::Free).unwrap();
        assert!(relax_strings(&[free], &FlatField, &RelaxOptions::default()).is_err());
    }

    #[test]
    fn sourced_relaxation_keeps_flow_slices_and_segments() {
        use crate::exterior::Vec3;
        use crate::statics::{observer_axis, static_flow, Particle, ParticleSet};
        let field = static_flow(&ParticleSet::new(vec![Particle::new(Vec3::zeros(), 1.0, 1.0)]).unwrap());
        let s = StringPath::straight(Point4::new(0.0, 1.0, 1.0, 0.0), Point4::new(2.0, 2.0, 1.5, 1.0), 16, 1.0, 0.0).unwrap();
        let nodes = s
            .nodes()
            .iter()
            .enumerate()
            .map(|(k, p)| p + observer_axis(0) * (0.2 * (std::f64::consts::PI * k as f64 / 16.0).sin()))
            .collect();
        let s = s.with_nodes(nodes).unwrap();
        let out = relax_strings(std::slice::from_ref(&s), &field, &RelaxOptions::default()).unwrap();
        assert!(out.converged, "residual {}", out.residual);
        let n = unit_flow();
        for (a, b) in s.nodes().iter().zip(out.strings[0].nodes()) {
            assert!((n.dot(a) - n.dot(b)).abs() <= 1e-12);
        }
        // no segment collapses
        let before = s.direction_report();
        for (x, y) in before.iter().zip(out.strings[0].direction_report()) {
            assert!((x - y).abs() <= 1e-12);
        }
        assert!(out.flow_residual.is_finite());
    }

    /// `G = 1 + eps * x1`.
    struct Tilted(f64);

    impl ActionField for Tilted {
        fn mass_weight(&self, x: &crate::exterior::Point4) -> Result<(f64, Vec4)> {
            Ok((1.0 + self.0 * x[1], Vec4::new(0.0, self.0, 0.0, 0.0)))
        }

        fn charge_covector(&self, _: &crate::exterior::Point4) -> Result<(Vec4, Matrix4<f64>)> {
            Ok((Vec4::zeros(), Matrix4::zeros()))
        }
    }

    /// Geodesic of `G^2 |dx|^2` by shooting: `x'' = (|x'|^2 grad G - (grad G . x') x') / G`
    /// on `t in [0, 1]`, RK4, Newton on the initial velocity.
    fn shoot(eps: f64, a: Vec4, b: Vec4, steps: usize) -> Vec<Vec4> {
        let grad = Vec4::new(0.0, eps, 0.0, 0.0);
        let rhs = |x: &Vec4, v: &Vec4| -> (Vec4, Vec4) {
            let g = 1.0 + eps * x[1];
            (*v, (grad * v.norm_squared() - v * grad.dot(v)) / g)
        };
        let integrate = |v0: Vec4| -> Vec<Vec4> {
            let dt = 1.0 / steps as f64;
            let (mut x, mut v) = (a, v0);
            let mut out = vec![x];
            for _ in 0..steps {
                let k1 = rhs(&x, &v);
                let k2 = rhs(&(x + k1.0 * dt / 2.0), &(v + k1.1 * dt / 2.0));
                let k3 = rhs(&(x + k2.0 * dt / 2.0), &(v + k2.1 * dt / 2.0));
                let k4 = rhs(&(x + k3.0 * dt), &(v + k3.1 * dt));
                x += (k1.0 + k2.0 * 2.0 + k3.0 * 2.0 + k4.0) * dt / 6.0;
                v += (k1.1 + k2.1 * 2.0 + k3.1 * 2.0 + k4.1) * dt / 6.0;
                out.push(x);
            }
            out
        };
        let mut v0 = b - a;
        for _ in 0..20 {
            let miss = *integrate(v0).last().unwrap() - b;
            if miss.amax() < 1e-14 {
                break;
            }
            let mut jac = Matrix4::zeros();
            for j in 0..4 {
                let mut dv = v0;
                dv[j] += 1e-7;
                let col = (*integrate(dv).last().unwrap() - b - miss) / 1e-7;
                jac.set_column(j, &col);
            }
            v0 -= jac.try_inverse().unwrap() * miss;
        }
        integrate(v0)
    }

    #[test]
    fn tilted_weight_matches_shooting_oracle() {
        let eps = 0.01;
        let a = Point4::zeros();
        let b = Point4::new(1.0, 0.2, 0.8, 0.5);
        let n = 32;
        let init = StringPath::straight(a, b, n, 1.0, 0.0).unwrap();
        let out = relax_strings(&[init], &Tilted(eps), &RelaxOptions::default()).unwrap();
        assert!(out.converged, "residual {}", out.residual);
        let curve = shoot(eps, a, b, 4000);
        // distance from every relaxed node to the densely sampled oracle curve
        let worst = out.strings[0]
            .nodes()
            .iter()
            .map(|p| {
                curve
                    .windows(2)
                    .map(|w| {
                        let d = w[1] - w[0];
                        let t = ((p - w[0]).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
                        (p - w[0] - d * t).norm()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        // the oracle curve bends away from the chord; the comparison is meaningful
        let bend = curve.iter().map(|p| {
            let u = (b - a).normalize();
            (p - u * p.dot(&u)).norm()
        });
        assert!(bend.fold(0.0, f64::max) > 1e-3);
        assert!(worst <= 1e-4, "node distance {worst:e}");
    }
}
