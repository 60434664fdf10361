//! Points, lattices and discrete exterior calculus on regular lattices.
//!
//! Forms are stored as cochains: the coefficient attached to a p-cell is the
//! integral of the form over that cell. With this storage the exterior
//! derivative is the signed boundary sum and Stokes' theorem holds exactly.
//!
//! A p-cell is addressed by its base site and a bitmask of the p axes it
//! spans. Orientation is the coordinate order `(x0, x1, x2, x3)`.

use nalgebra::{Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::quadrature::gauss_legendre;

pub type Point4 = Vector4<f64>;
pub type Vec4 = Vector4<f64>;
pub type Vec3 = Vector3<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Open,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Signature {
    Euclidean,
    /// `diag(+1, -1, -1, -1)`; axis 0 is the timelike one.
    Minkowski,
}

impl Signature {
    fn axis_sign(self, axis: usize) -> f64 {
        match (self, axis) {
            (Signature::Euclidean, _) => 1.0,
            (Signature::Minkowski, 0) => 1.0,
            (Signature::Minkowski, _) => -1.0,
        }
    }
}

/// A regular 3-D or 4-D lattice with uniform spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    dims: Vec<usize>,
    spacing: f64,
    boundary: Boundary,
    signature: Signature,
    strides: Vec<usize>,
}

impl Lattice {
    pub fn new(dims: &[usize], spacing: f64, boundary: Boundary, signature: Signature) -> Result<Self> {
        if !(3..=4).contains(&dims.len()) {
            return Err(FlowError::Shape(format!(
                "lattice must be 3-D or 4-D, got {} axes",
                dims.len()
            )));
        }
        if let Some(d) = dims.iter().find(|&&d| d < 4) {
            return Err(FlowError::Shape(format!("every axis needs at least 4 sites, got {d}")));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(FlowError::Domain(format!("lattice spacing must be positive, got {spacing}")));
        }
        let mut strides = Vec::with_capacity(dims.len());
        let mut acc = 1;
        for &d in dims {
            strides.push(acc);
            acc *= d;
        }
        Ok(Lattice {
            dims: dims.to_vec(),
            spacing,
            boundary,
            signature,
            strides,
        })
    }

    /// Periodic Euclidean lattice with the same extent on every axis.
    pub fn periodic(ndim: usize, n: usize, spacing: f64) -> Result<Self> {
        Self::new(&vec![n; ndim], spacing, Boundary::Periodic, Signature::Euclidean)
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn signature(&self) -> Signature {
        self.signature
    }

    pub fn with_signature(&self, signature: Signature) -> Self {
        Lattice {
            signature,
            ..self.clone()
        }
    }

    pub fn num_sites(&self) -> usize {
        self.dims.iter().product()
    }

    /// Number of basis p-forms, `C(n, p)`.
    pub fn basis_len(&self, degree: usize) -> usize {
        binomial(self.ndim(), degree)
    }

    pub fn site_coords(&self, site: usize) -> [usize; 4] {
        let mut c = [0; 4];
        let mut rest = site;
        for (a, &d) in self.dims.iter().enumerate() {
            c[a] = rest % d;
            rest /= d;
        }
        c
    }

    pub fn site_index(&self, coords: &[usize]) -> usize {
        coords.iter().zip(&self.strides).map(|(c, s)| c * s).sum()
    }

    /// Neighbour one step along `axis` in direction `forward`; `None` when an
    /// open boundary is crossed.
    pub fn shift(&self, site: usize, axis: usize, forward: bool) -> Option<usize> {
        let d = self.dims[axis];
        let c = (site / self.strides[axis]) % d;
        let stride = self.strides[axis];
        match (forward, self.boundary) {
            (true, _) if c + 1 < d => Some(site + stride),
            (true, Boundary::Periodic) => Some(site + stride - d * stride),
            (false, _) if c > 0 => Some(site - stride),
            (false, Boundary::Periodic) => Some(site + (d - 1) * stride),
            _ => None,
        }
    }

    /// Whether the cell at `site` spanning the axes in `mask` lies inside the
    /// box. Always true for periodic lattices.
    pub fn cell_is_valid(&self, site: usize, mask: u8) -> bool {
        if self.boundary == Boundary::Periodic {
            return true;
        }
        let c = self.site_coords(site);
        (0..self.ndim()).all(|a| mask & (1 << a) == 0 || c[a] + 1 < self.dims[a])
    }

    /// Volume weight of a p-cell in the form pairing, `h^(n - 2p)`.
    pub fn cell_weight(&self, degree: usize) -> f64 {
        self.spacing.powi(self.ndim() as i32 - 2 * degree as i32)
    }

    fn metric_sign(&self, mask: u8) -> f64 {
        (0..self.ndim())
            .filter(|a| mask & (1 << a) != 0)
            .map(|a| self.signature.axis_sign(a))
            .product()
    }

    /// Physical position of a site, `h * coords`.
    pub fn site_position(&self, site: usize) -> Vec<f64> {
        let c = self.site_coords(site);
        (0..self.ndim()).map(|a| c[a] as f64 * self.spacing).collect()
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Axis bitmasks of degree `p` in lexicographic axis order.
pub fn basis_masks(ndim: usize, degree: usize) -> Vec<u8> {
    let mut out: Vec<u8> = (0u8..(1 << ndim))
        .filter(|m| m.count_ones() as usize == degree)
        .collect();
    out.sort_by_key(|m| {
        let axes: Vec<usize> = (0..ndim).filter(|a| m & (1 << a) != 0).collect();
        axes
    });
    out
}

/// `(-1)^(number of axes in mask below axis)`.
fn axis_sign_in(mask: u8, axis: usize) -> f64 {
    if (mask & ((1u8 << axis) - 1)).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Parity of the permutation that sorts `mask ++ complement`.
fn shuffle_sign(mask: u8, ndim: usize) -> f64 {
    let mut inversions = 0;
    for a in (0..ndim).filter(|a| mask & (1 << a) != 0) {
        inversions += (0..a).filter(|b| mask & (1 << b) == 0).count();
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// A p-cochain on a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeForm {
    lattice: Lattice,
    degree: usize,
    masks: Vec<u8>,
    coeffs: Vec<f64>,
}

impl LatticeForm {
    pub fn zeros(lattice: &Lattice, degree: usize) -> Result<Self> {
        if degree > lattice.ndim() {
            return Err(FlowError::Degree(format!(
                "degree {degree} exceeds lattice dimension {}",
                lattice.ndim()
            )));
        }
        let masks = basis_masks(lattice.ndim(), degree);
        let coeffs = vec![0.0; lattice.num_sites() * masks.len()];
        Ok(LatticeForm {
            lattice: lattice.clone(),
            degree,
            masks,
            coeffs,
        })
    }

    /// Builds a form from a cell function `(site, mask) -> coefficient`.
    /// Cells outside an open box are left at zero.
    pub fn from_fn(lattice: &Lattice, degree: usize, mut f: impl FnMut(usize, u8) -> f64) -> Result<Self> {
        let mut form = Self::zeros(lattice, degree)?;
        let nb = form.masks.len();
        for site in 0..lattice.num_sites() {
            for b in 0..nb {
                let mask = form.masks[b];
                if lattice.cell_is_valid(site, mask) {
                    form.coeffs[site * nb + b] = f(site, mask);
                }
            }
        }
        Ok(form)
    }

    pub fn from_coeffs(lattice: &Lattice, degree: usize, coeffs: Vec<f64>) -> Result<Self> {
        let mut form = Self::zeros(lattice, degree)?;
        if coeffs.len() != form.coeffs.len() {
            return Err(FlowError::Shape(format!(
                "expected {} coefficients, got {}",
                form.coeffs.len(),
                coeffs.len()
            )));
        }
        form.coeffs = coeffs;
        Ok(form)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn masks(&self) -> &[u8] {
        &self.masks
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    fn slot(&self, mask: u8) -> usize {
        self.masks
            .iter()
            .position(|&m| m == mask)
            .expect("mask degree does not match form degree")
    }

    pub fn get(&self, site: usize, mask: u8) -> f64 {
        self.coeffs[site * self.masks.len() + self.slot(mask)]
    }

    pub fn set(&mut self, site: usize, mask: u8, value: f64) {
        let nb = self.masks.len();
        let slot = self.slot(mask);
        self.coeffs[site * nb + slot] = value;
    }

    fn check_compatible(&self, other: &LatticeForm) -> Result<()> {
        if self.lattice != other.lattice {
            return Err(FlowError::Shape("forms live on different lattices".into()));
        }
        if self.degree != other.degree {
            return Err(FlowError::Shape(format!(
                "degree mismatch: {} vs {}",
                self.degree, other.degree
            )));
        }
        Ok(())
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &LatticeForm, b: f64) -> Result<LatticeForm> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (o, (x, y)) in out.coeffs.iter_mut().zip(self.coeffs.iter().zip(&other.coeffs)) {
            *o = a * x + b * y;
        }
        Ok(out)
    }

    pub fn scaled(&self, a: f64) -> LatticeForm {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= a);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Euclidean L2 norm from [`form_inner`]; only meaningful for Euclidean
    /// signature.
    pub fn norm(&self) -> f64 {
        form_inner(self, self).expect("form is compatible with itself").abs().sqrt()
    }
}

/// Exterior derivative: the signed boundary sum over each (p+1)-cell.
pub fn ext_d(f: &LatticeForm) -> Result<LatticeForm> {
    let lat = &f.lattice;
    if f.degree >= lat.ndim() {
        return Err(FlowError::Degree(format!(
            "cannot differentiate a {}-form on a {}-D lattice",
            f.degree,
            lat.ndim()
        )));
    }
    let mut out = LatticeForm::zeros(lat, f.degree + 1)?;
    let nb_in = f.masks.len();
    let nb_out = out.masks.len();
    // face slot lookup per (output mask, axis)
    let face_slot: Vec<Vec<Option<usize>>> = out
        .masks
        .iter()
        .map(|&m| {
            (0..lat.ndim())
                .map(|a| (m & (1 << a) != 0).then(|| f.slot(m & !(1 << a))))
                .collect()
        })
        .collect();
    for site in 0..lat.num_sites() {
        for (b, &mask) in out.masks.iter().enumerate() {
            if !lat.cell_is_valid(site, mask) {
                continue;
            }
            let mut acc = 0.0;
            for (a, slot) in face_slot[b].iter().enumerate() {
                let Some(slot) = slot else { continue };
                let fwd = lat.shift(site, a, true).expect("valid cell has forward neighbour");
                acc += axis_sign_in(mask, a) * (f.coeffs[fwd * nb_in + slot] - f.coeffs[site * nb_in + slot]);
            }
            out.coeffs[site * nb_out + b] = acc;
        }
    }
    Ok(out)
}

/// Adjoint of [`ext_d`] with respect to [`form_inner`]: maps a q-form to a
/// (q-1)-form so that `<d f, g> = <f, codiff g>` for every f.
pub fn codiff(g: &LatticeForm) -> Result<LatticeForm> {
    let lat = &g.lattice;
    if g.degree == 0 {
        return Err(FlowError::Degree("codifferential of a 0-form".into()));
    }
    let mut out = LatticeForm::zeros(lat, g.degree - 1)?;
    let nb_in = g.masks.len();
    let nb_out = out.masks.len();
    let ratio = lat.cell_weight(g.degree) / lat.cell_weight(g.degree - 1);
    for site in 0..lat.num_sites() {
        for (b, &mask) in out.masks.iter().enumerate() {
            if !lat.cell_is_valid(site, mask) {
                continue;
            }
            let mut acc = 0.0;
            for a in (0..lat.ndim()).filter(|a| mask & (1 << a) == 0) {
                let up = mask | (1 << a);
                let slot = g.slot(up);
                let s = axis_sign_in(up, a) * lat.metric_sign(up);
                if let Some(prev) = lat.shift(site, a, false) {
                    if lat.cell_is_valid(prev, up) {
                        acc += s * g.coeffs[prev * nb_in + slot];
                    }
                }
                if lat.cell_is_valid(site, up) {
                    acc -= s * g.coeffs[site * nb_in + slot];
                }
            }
            out.coeffs[site * nb_out + b] = ratio * acc / lat.metric_sign(mask);
        }
    }
    Ok(out)
}

/// Hodge star: `*(dx_M) = sign * dx_{M^c}` on the same base site, with the
/// sign from the shuffle parity and the metric, and the cochain rescaled by
/// `h^(n - 2p)`.
pub fn hodge(f: &LatticeForm) -> Result<LatticeForm> {
    hodge_signed(f, 1.0)
}

/// [`hodge`] with an extra global sign. Exposed to the self-test so that a
/// deliberately corrupted convention can be injected.
pub(crate) fn hodge_signed(f: &LatticeForm, extra_sign: f64) -> Result<LatticeForm> {
    let lat = &f.lattice;
    let n = lat.ndim();
    let full: u8 = ((1u16 << n) - 1) as u8;
    let mut out = LatticeForm::zeros(lat, n - f.degree)?;
    let scale = lat.cell_weight(f.degree) * extra_sign;
    let nb_in = f.masks.len();
    let nb_out = out.masks.len();
    let plan: Vec<(usize, f64)> = f
        .masks
        .iter()
        .map(|&m| {
            let comp = full & !m;
            (out.slot(comp), shuffle_sign(m, n) * lat.metric_sign(m))
        })
        .collect();
    for site in 0..lat.num_sites() {
        for (b, &(slot, sign)) in plan.iter().enumerate() {
            if lat.cell_is_valid(site, out.masks[slot]) {
                out.coeffs[site * nb_out + slot] = sign * scale * f.coeffs[site * nb_in + b];
            }
        }
    }
    Ok(out)
}

/// Cell-weighted pairing `sum_cells h^(n-2p) * metric_sign * f * g`.
pub fn form_inner(f: &LatticeForm, g: &LatticeForm) -> Result<f64> {
    f.check_compatible(g)?;
    let lat = &f.lattice;
    let nb = f.masks.len();
    let signs: Vec<f64> = f.masks.iter().map(|&m| lat.metric_sign(m)).collect();
    let mut acc = 0.0;
    for site in 0..lat.num_sites() {
        for b in 0..nb {
            if lat.cell_is_valid(site, f.masks[b]) {
                let i = site * nb + b;
                acc += signs[b] * f.coeffs[i] * g.coeffs[i];
            }
        }
    }
    Ok(acc * lat.cell_weight(f.degree))
}

/// A covector field on E(3) that can be sampled pointwise.
pub trait CovectorField3 {
    fn covector(&self, x: &Vec3) -> Result<Vec3>;

    /// Points where the field is singular; used to reject surfaces that pass
    /// through a source.
    fn singularities(&self) -> Vec<Vec3> {
        Vec::new()
    }
}

/// Adapter for closures.
pub struct FnField3<F>(pub F);

impl<F: Fn(&Vec3) -> Vec3> CovectorField3 for FnField3<F> {
    fn covector(&self, x: &Vec3) -> Result<Vec3> {
        Ok((self.0)(x))
    }
}

/// A sphere in E(3) with a tensor-product quadrature: Gauss–Legendre in
/// `cos(theta)` and the periodic trapezoid rule in azimuth.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereChart {
    center: Vec3,
    radius: f64,
    n_polar: usize,
    n_azimuth: usize,
}

/// One quadrature node on a sphere.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceNode {
    pub point: Vec3,
    pub normal: Vec3,
    pub weight: f64,
}

impl SphereChart {
    pub fn new(center: Vec3, radius: f64, n_polar: usize, n_azimuth: usize) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(FlowError::Domain(format!("sphere radius must be positive, got {radius}")));
        }
        if n_polar < 8 || n_azimuth < 16 {
            return Err(FlowError::Domain(format!(
                "quadrature orders too small: ({n_polar}, {n_azimuth}); need at least (8, 16)"
            )));
        }
        Ok(SphereChart {
            center,
            radius,
            n_polar,
            n_azimuth,
        })
    }

    pub fn center(&self) -> Vec3 {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn orders(&self) -> (usize, usize) {
        (self.n_polar, self.n_azimuth)
    }

    pub fn nodes(&self) -> Vec<SurfaceNode> {
        let (mu, w) = gauss_legendre(self.n_polar);
        let dphi = 2.0 * std::f64::consts::PI / self.n_azimuth as f64;
        let r2 = self.radius * self.radius;
        let mut out = Vec::with_capacity(self.n_polar * self.n_azimuth);
        for (&ct, &wt) in mu.iter().zip(&w) {
            let st = (1.0 - ct * ct).max(0.0).sqrt();
            for j in 0..self.n_azimuth {
                let phi = j as f64 * dphi;
                let normal = Vec3::new(st * phi.cos(), st * phi.sin(), ct);
                out.push(SurfaceNode {
                    point: self.center + self.radius * normal,
                    normal,
                    weight: r2 * wt * dphi,
                });
            }
        }
        out
    }

    /// Whether `p` is strictly inside the sphere.
    pub fn encloses(&self, p: &Vec3) -> bool {
        (p - self.center).norm() < self.radius
    }
}

/// Outward flux of the Hodge dual of `field` through the sphere, i.e.
/// `integral <field, n> dA`.
pub fn surface_flux(field: &dyn CovectorField3, surface: &SphereChart) -> Result<f64> {
    for s in field.singularities() {
        let gap = ((s - surface.center).norm() - surface.radius).abs();
        if gap < 1e-6 * surface.radius {
            return Err(FlowError::Singularity(format!(
                "source at distance {gap:e} from the integration sphere"
            )));
        }
    }
    let mut acc = 0.0;
    for node in surface.nodes() {
        acc += node.weight * field.covector(&node.point)?.dot(&node.normal);
    }
    Ok(acc)
}
