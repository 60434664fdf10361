//! Evolution of the flow 1-form under `(d^2/dtau^2 - Laplacian) B = 0`.
//!
//! Each component of the 1-cochain is advanced as a scalar field with the
//! second-difference Laplacian (`2n + 1` point stencil) by the kick-drift-kick
//! Störmer–Verlet scheme. Evolution runs on periodic lattices only.

use crate::error::{FlowError, Result};
use crate::exterior::{ext_d, form_inner, Boundary, Lattice, LatticeForm};

#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    field: LatticeForm,
    rate: LatticeForm,
    tau: f64,
    dtau: f64,
}

impl WaveState {
    /// Largest admissible step for a lattice of spacing `h`.
    pub fn max_step(h: f64) -> f64 {
        0.5 * h
    }

    pub fn new(field: LatticeForm, rate: LatticeForm, dtau: f64) -> Result<Self> {
        if field.degree() != 1 || rate.degree() != 1 {
            return Err(FlowError::Degree("wave state holds 1-forms".into()));
        }
        if field.lattice() != rate.lattice() {
            return Err(FlowError::Shape("field and rate live on different lattices".into()));
        }
        let lat = field.lattice();
        if lat.boundary() != Boundary::Periodic {
            return Err(FlowError::Config("wave evolution needs a periodic lattice".into()));
        }
        check_cfl(lat.spacing(), dtau)?;
        Ok(WaveState {
            field,
            rate,
            tau: 0.0,
            dtau,
        })
    }

    /// State at rest with the given field.
    pub fn at_rest(field: LatticeForm, dtau: f64) -> Result<Self> {
        let rate = LatticeForm::zeros(field.lattice(), 1)?;
        Self::new(field, rate, dtau)
    }

    pub fn field(&self) -> &LatticeForm {
        &self.field
    }

    pub fn rate(&self) -> &LatticeForm {
        &self.rate
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn dtau(&self) -> f64 {
        self.dtau
    }

    pub fn lattice(&self) -> &Lattice {
        self.field.lattice()
    }

    /// Same configuration with the rate negated; evolving this state undoes a
    /// previous evolution.
    pub fn reversed(&self) -> WaveState {
        WaveState {
            rate: self.rate.scaled(-1.0),
            ..self.clone()
        }
    }

    /// `a * self + b * other` on field and rate.
    pub fn combine(&self, a: f64, other: &WaveState, b: f64) -> Result<WaveState> {
        Ok(WaveState {
            field: self.field.combine(a, &other.field, b)?,
            rate: self.rate.combine(a, &other.rate, b)?,
            ..self.clone()
        })
    }
}

/// Rejects steps above `h / 2`.
pub fn check_cfl(h: f64, dtau: f64) -> Result<()> {
    if !(dtau.is_finite() && dtau > 0.0) {
        return Err(FlowError::Config(format!("step must be positive, got {dtau}")));
    }
    if dtau > WaveState::max_step(h) {
        return Err(FlowError::Config(format!(
            "step {dtau} violates the stability bound dtau <= h/2 = {}",
            WaveState::max_step(h)
        )));
    }
    Ok(())
}

/// Componentwise lattice Laplacian of a 1-cochain.
pub fn laplacian(f: &LatticeForm) -> LatticeForm {
    let lat = f.lattice();
    let nb = f.masks().len();
    let inv_h2 = 1.0 / (lat.spacing() * lat.spacing());
    let c = f.coeffs();
    let mut out = f.clone();
    let o = out.coeffs_mut();
    for site in 0..lat.num_sites() {
        let base = site * nb;
        for b in 0..nb {
            o[base + b] = 0.0;
        }
        // differences keep the Laplacian of a constant exactly zero
        for axis in 0..lat.ndim() {
            let fwd = lat.shift(site, axis, true).expect("periodic") * nb;
            let bwd = lat.shift(site, axis, false).expect("periodic") * nb;
            for b in 0..nb {
                o[base + b] += (c[fwd + b] - c[base + b]) + (c[bwd + b] - c[base + b]);
            }
        }
        for b in 0..nb {
            o[base + b] *= inv_h2;
        }
    }
    out
}

fn axpy(y: &mut LatticeForm, a: f64, x: &LatticeForm) {
    y.coeffs_mut().iter_mut().zip(x.coeffs()).for_each(|(yi, xi)| *yi += a * xi);
}

/// Advances the state by `steps` Störmer–Verlet steps.
pub fn evolve_wave(s: &WaveState, steps: usize) -> Result<WaveState> {
    check_cfl(s.lattice().spacing(), s.dtau)?;
    if steps == 0 {
        return Err(FlowError::Config("number of steps must be positive".into()));
    }
    let dt = s.dtau;
    let mut out = s.clone();
    let mut acc = laplacian(&out.field);
    for _ in 0..steps {
        axpy(&mut out.rate, 0.5 * dt, &acc);
        axpy(&mut out.field, dt, &out.rate.clone());
        acc = laplacian(&out.field);
        axpy(&mut out.rate, 0.5 * dt, &acc);
        out.tau += dt;
    }
    Ok(out)
}

/// Squared norm of the componentwise gradient: each component, read as a
/// pointwise 0-form, is differentiated and paired with itself.
fn gradient_energy(f: &LatticeForm) -> Result<f64> {
    let lat = f.lattice();
    let nb = f.masks().len();
    let h = lat.spacing();
    let mut total = 0.0;
    for b in 0..nb {
        let comp: Vec<f64> = f.coeffs().iter().skip(b).step_by(nb).map(|c| c / h).collect();
        let scalar = LatticeForm::from_coeffs(lat, 0, comp)?;
        let grad = ext_d(&scalar)?;
        total += form_inner(&grad, &grad)?;
    }
    Ok(total)
}

/// Discrete energy conserved by the scheme:
/// `1/2 <rate, rate> + 1/2 <grad B, grad B> - dtau^2/8 <Lap B, Lap B>`.
///
/// The last term is the leapfrog correction; it equals the energy evaluated
/// with the half-step rate and is non-negative under the step bound.
pub fn wave_energy(s: &WaveState) -> Result<f64> {
    let kinetic = form_inner(&s.rate, &s.rate)?;
    let potential = gradient_energy(&s.field)?;
    let lap = laplacian(&s.field);
    let correction = form_inner(&lap, &lap)?;
    Ok(0.5 * kinetic + 0.5 * potential - s.dtau * s.dtau / 8.0 * correction)
}

/// Single Fourier mode `cos(k . x)` in every component of a 1-cochain,
/// scaled so each coefficient is `h * amplitude * cos(k . x)`.
pub fn fourier_mode(lattice: &Lattice, wavenumbers: &[usize], amplitude: f64) -> Result<LatticeForm> {
    if wavenumbers.len() != lattice.ndim() {
        return Err(FlowError::Shape("one wavenumber per axis".into()));
    }
    let h = lattice.spacing();
    LatticeForm::from_fn(lattice, 1, |site, _| {
        let c = lattice.site_coords(site);
        let phase: f64 = (0..lattice.ndim())
            .map(|a| 2.0 * std::f64::consts::PI * (wavenumbers[a] * c[a]) as f64 / lattice.dims()[a] as f64)
            .sum();
        h * amplitude * phase.cos()
    })
}

/// Eigenvalue of `-Laplacian` for the mode with the given integer wavenumbers.
pub fn mode_eigenvalue(lattice: &Lattice, wavenumbers: &[usize]) -> f64 {
    let h = lattice.spacing();
    (0..lattice.ndim())
        .map(|a| {
            let kh = 2.0 * std::f64::consts::PI * wavenumbers[a] as f64 / lattice.dims()[a] as f64;
            4.0 / (h * h) * (0.5 * kh).sin().powi(2)
        })
        .sum()
}

/// Angular frequency of a mode under the scheme: `2/dtau asin(dtau/2 sqrt(lambda))`.
pub fn discrete_frequency(lambda: f64, dtau: f64) -> f64 {
    2.0 / dtau * (0.5 * dtau * lambda.sqrt()).asin()
}

/// Measures the angular frequency of a mode started at rest: steps until
/// its amplitude first falls to 1/2 or below, then inverts
/// `a_n = cos(n omega dtau)`.
pub fn measured_mode_frequency(lattice: &Lattice, wavenumbers: &[usize], dtau: f64) -> Result<f64> {
    let mode = fourier_mode(lattice, wavenumbers, 1.0)?;
    let norm = form_inner(&mode, &mode)?;
    if mode_eigenvalue(lattice, wavenumbers) == 0.0 {
        return Err(FlowError::Domain("the constant mode does not oscillate".into()));
    }
    let mut s = WaveState::at_rest(mode.clone(), dtau)?;
    for n in 1..=100_000usize {
        s = evolve_wave(&s, 1)?;
        let a = form_inner(&s.field, &mode)? / norm;
        if a <= 0.5 {
            return Ok(a.acos() / (n as f64 * dtau));
        }
    }
    Err(FlowError::numerical("mode amplitude did not decay to 1/2"))
}
