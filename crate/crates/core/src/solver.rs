//! Linear solves on periodic lattices.

use crate::error::{FlowError, Result};
use crate::exterior::{codiff, ext_d, Boundary, Lattice, LatticeForm};

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// Final `||r|| / ||b||`.
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

/// Conjugate gradients for a symmetric positive semi-definite operator whose
/// null space is the constants. Iterates are kept mean-free.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    rhs: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let mut b = rhs.to_vec();
    remove_mean(&mut b);
    let bnorm = dot(&b, &b).sqrt();
    let mut x = vec![0.0; b.len()];
    if bnorm == 0.0 {
        return Ok(CgOutcome {
            solution: x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for it in 1..=max_iter {
        let mut ap = apply(&p);
        remove_mean(&mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(FlowError::numerical(format!(
                "conjugate gradient breakdown at iteration {it} (p.Ap = {pap:e})"
            )));
        }
        let alpha = rr / pap;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.iter_mut().zip(&ap).for_each(|(ri, api)| *ri -= alpha * api);
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= tol * bnorm {
            // recompute the true residual before declaring convergence
            let mut ax = apply(&x);
            remove_mean(&mut ax);
            let true_res = ax.iter().zip(&b).map(|(a, bi)| (bi - a).powi(2)).sum::<f64>().sqrt() / bnorm;
            if true_res <= tol {
                remove_mean(&mut x);
                return Ok(CgOutcome {
                    solution: x,
                    iterations: it,
                    relative_residual: true_res,
                });
            }
            r = b.iter().zip(&ax).map(|(bi, a)| bi - a).collect();
            p = r.clone();
            rr = dot(&r, &r);
            continue;
        }
        let beta = rr_new / rr;
        p.iter_mut().zip(&r).for_each(|(pi, ri)| *pi = ri + beta * *pi);
        rr = rr_new;
    }
    Err(FlowError::numerical(format!(
        "conjugate gradient did not reach relative residual {tol:e} in {max_iter} iterations"
    )))
}

/// Solves `codiff(ext_d(phi)) = rhs` for a 0-form on a periodic lattice.
/// `rhs` must have zero sum up to rounding; the mean-free solution is returned.
pub fn solve_poisson(lattice: &Lattice, rhs: &LatticeForm, tol: f64, max_iter: usize) -> Result<(LatticeForm, CgOutcome)> {
    if lattice.boundary() != Boundary::Periodic {
        return Err(FlowError::Domain("Poisson solve requires a periodic lattice".into()));
    }
    if rhs.degree() != 0 {
        return Err(FlowError::Degree("Poisson right-hand side must be a 0-form".into()));
    }
    let apply = |v: &[f64]| -> Vec<f64> {
        let f = LatticeForm::from_coeffs(lattice, 0, v.to_vec()).expect("shape fixed by lattice");
        let df = ext_d(&f).expect("0-form is differentiable");
        codiff(&df).expect("1-form has a codifferential").coeffs().to_vec()
    };
    let out = conjugate_gradient(apply, rhs.coeffs(), tol, max_iter)?;
    let phi = LatticeForm::from_coeffs(lattice, 0, out.solution.clone())?;
    Ok((phi, out))
}
