//! Probability densities on the circle and their complex amplitude
//! `P = int_0^{2 pi} rho(phi) e^{i phi} dphi`.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{FlowError, Result};
use crate::quantization::canonical_angle;

pub const DEFAULT_GRID: usize = 256;
pub const MIN_GRID: usize = 64;
/// Allowed deviation of `int rho` from 1.
pub const NORMALIZATION_TOL: f64 = 1e-6;

type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum CircularDensity {
    /// Values at `phi_j = 2 pi j / n`.
    Grid(Vec<f64>),
    /// Closed form, integrated on a grid of `n` points.
    Analytic { f: DensityFn, n: usize },
    /// Equal-weight point masses.
    Samples(Vec<f64>),
}

impl fmt::Debug for CircularDensity {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CircularDensity::Grid(v) => fm.debug_tuple("Grid").field(&v.len()).finish(),
            CircularDensity::Analytic { n, .. } => fm.debug_struct("Analytic").field("n", n).finish(),
            CircularDensity::Samples(s) => fm.debug_tuple("Samples").field(&s.len()).finish(),
        }
    }
}

impl CircularDensity {
    pub fn grid(values: Vec<f64>) -> Result<Self> {
        if values.len() < MIN_GRID {
            return Err(FlowError::Shape(format!(
                "density grid needs at least {MIN_GRID} points, got {}",
                values.len()
            )));
        }
        Ok(CircularDensity::Grid(values))
    }

    pub fn analytic(f: impl Fn(f64) -> f64 + Send + Sync + 'static, n: usize) -> Result<Self> {
        if n < MIN_GRID {
            return Err(FlowError::Shape(format!("quadrature grid needs at least {MIN_GRID} points")));
        }
        Ok(CircularDensity::Analytic { f: Arc::new(f), n })
    }

    pub fn uniform() -> Self {
        CircularDensity::Analytic {
            f: Arc::new(|_| 1.0 / TAU),
            n: DEFAULT_GRID,
        }
    }

    pub fn point_mass(phi0: f64) -> Self {
        CircularDensity::Samples(vec![canonical_angle(phi0)])
    }

    /// `(1 + cos phi) / 2 pi`.
    pub fn raised_cosine() -> Self {
        CircularDensity::Analytic {
            f: Arc::new(|phi: f64| (1.0 + phi.cos()) / TAU),
            n: DEFAULT_GRID,
        }
    }

    /// `e^{kappa cos(phi - mu)}` normalised by quadrature on `n` points.
    pub fn von_mises(kappa: f64, mu: f64, n: usize) -> Result<Self> {
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(FlowError::Domain(format!("concentration must be nonnegative, got {kappa}")));
        }
        let raw: Vec<f64> = grid_points(n).map(|phi| (kappa * ((phi - mu).cos() - 1.0)).exp()).collect();
        let z = TAU / n as f64 * raw.iter().sum::<f64>();
        Self::grid(raw.into_iter().map(|v| v / z).collect())
    }

    /// Density shifted by `delta`: `rho(phi - delta)`. Grids shift by whole
    /// cells only.
    pub fn rotated(&self, delta: f64) -> Result<Self> {
        Ok(match self {
            CircularDensity::Grid(v) => {
                let n = v.len();
                let cells = delta / (TAU / n as f64);
                if (cells - cells.round()).abs() > 1e-9 {
                    return Err(FlowError::Domain("grid densities rotate by whole cells".into()));
                }
                let s = (cells.round() as i64).rem_euclid(n as i64) as usize;
                CircularDensity::Grid((0..n).map(|j| v[(j + n - s) % n]).collect())
            }
            CircularDensity::Analytic { f, n } => {
                let f = f.clone();
                CircularDensity::Analytic {
                    f: Arc::new(move |phi| f(phi - delta)),
                    n: *n,
                }
            }
            CircularDensity::Samples(s) => CircularDensity::Samples(s.iter().map(|p| canonical_angle(p + delta)).collect()),
        })
    }

    /// Values on the quadrature grid; not defined for sample lists.
    pub fn grid_values(&self) -> Option<Vec<f64>> {
        match self {
            CircularDensity::Grid(v) => Some(v.clone()),
            CircularDensity::Analytic { f, n } => Some(grid_points(*n).map(|p| f(p)).collect()),
            CircularDensity::Samples(_) => None,
        }
    }

    /// `lambda a + (1 - lambda) b` on a common grid.
    pub fn mixture(lambda: f64, a: &CircularDensity, b: &CircularDensity) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(FlowError::Domain(format!("mixture weight must lie in [0, 1], got {lambda}")));
        }
        let (Some(va), Some(vb)) = (a.grid_values(), b.grid_values()) else {
            return Err(FlowError::Domain("mixtures need grid or analytic densities".into()));
        };
        if va.len() != vb.len() {
            return Err(FlowError::Shape("mixture components use different grids".into()));
        }
        Self::grid(va.iter().zip(&vb).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect())
    }

    /// Trapezoid integral of `rho`.
    pub fn integral(&self) -> f64 {
        match self {
            CircularDensity::Samples(_) => 1.0,
            _ => {
                let v = self.grid_values().expect("grid-backed density");
                TAU / v.len() as f64 * v.iter().sum::<f64>()
            }
        }
    }

    /// Rejects negative values and integrals away from 1.
    pub fn validate(&self) -> Result<()> {
        match self {
            CircularDensity::Samples(s) => {
                if s.is_empty() {
                    return Err(FlowError::Domain("empty sample list".into()));
                }
                if s.iter().any(|p| !p.is_finite()) {
                    return Err(FlowError::Domain("samples must be finite".into()));
                }
            }
            _ => {
                let v = self.grid_values().expect("grid-backed density");
                if let Some((j, x)) = v.iter().enumerate().find(|(_, &x)| !(x >= 0.0)) {
                    return Err(FlowError::Domain(format!("density is {x} at grid point {j}")));
                }
                let measured = self.integral();
                if (measured - 1.0).abs() > NORMALIZATION_TOL {
                    return Err(FlowError::Normalization { measured });
                }
            }
        }
        Ok(())
    }
}

fn grid_points(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |j| TAU * j as f64 / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmplitudeP {
    pub re: f64,
    pub im: f64,
    /// `|P|`, reported as `mod P`.
    pub modulus: f64,
    /// `arg P` in `[0, 2 pi)`; 0 when `P = 0`.
    pub argument: f64,
}

impl AmplitudeP {
    pub fn from_complex(p: Complex64) -> Result<Self> {
        let modulus = p.norm();
        if modulus > 1.0 + 1e-12 {
            return Err(FlowError::Invariant(format!("amplitude modulus {modulus} exceeds 1")));
        }
        Ok(AmplitudeP {
            re: p.re,
            im: p.im,
            modulus,
            argument: canonical_angle(p.arg()),
        })
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

pub fn amplitude_p(rho: &CircularDensity) -> Result<AmplitudeP> {
    rho.validate()?;
    let p = match rho {
        CircularDensity::Samples(s) => mean_phase(s),
        _ => {
            let v = rho.grid_values().expect("grid-backed density");
            let dphi = TAU / v.len() as f64;
            grid_points(v.len())
                .zip(&v)
                .map(|(phi, r)| Complex64::from_polar(*r, phi))
                .sum::<Complex64>()
                * dphi
        }
    };
    AmplitudeP::from_complex(p)
}

fn mean_phase(samples: &[f64]) -> Complex64 {
    let sum: Complex64 = samples.iter().map(|&p| Complex64::new(p.cos(), p.sin())).sum();
    sum / samples.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleEstimate {
    pub amplitude: AmplitudeP,
    pub count: usize,
    /// `sqrt((1 - |P|^2) / N)`, the spread of the mean of `e^{i phi}`.
    pub standard_error: f64,
}

/// Empirical amplitude `(1/N) sum e^{i phi_n}`.
pub fn sample_amplitude(samples: &[f64]) -> Result<SampleEstimate> {
    if samples.is_empty() {
        return Err(FlowError::Domain("no samples".into()));
    }
    let reduced: Vec<f64> = samples.iter().map(|&p| canonical_angle(p)).collect();
    let amplitude = amplitude_p(&CircularDensity::Samples(reduced))?;
    let n = samples.len() as f64;
    Ok(SampleEstimate {
        amplitude,
        count: samples.len(),
        standard_error: ((1.0 - amplitude.modulus.powi(2)).max(0.0) / n).sqrt(),
    })
}

/// `n` uniform phases from a seeded ChaCha stream.
pub fn uniform_samples(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(0.0..TAU)).collect()
}

/// `n` phases drawn from `rho` with a seeded ChaCha stream. Grid densities
/// are sampled as piecewise constant on cells centred on their grid points;
/// sample lists are resampled with replacement.
pub fn draw_samples(rho: &CircularDensity, n: usize, seed: u64) -> Result<Vec<f64>> {
    rho.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if let CircularDensity::Samples(s) = rho {
        return Ok((0..n).map(|_| s[rng.gen_range(0..s.len())]).collect());
    }
    let v = rho.grid_values().expect("grid-backed density");
    let width = TAU / v.len() as f64;
    let cumulative: Vec<f64> = v
        .iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect();
    let total = *cumulative.last().expect("nonempty grid");
    Ok((0..n)
        .map(|_| {
            let u = rng.gen_range(0.0..total);
            let j = cumulative.partition_point(|&c| c <= u).min(v.len() - 1);
            canonical_angle(width * (j as f64 + rng.gen_range(-0.5..0.5)))
        })
        .collect())
}

/// Histogram density on `bins` cells centred on the grid points
/// `2 pi j / bins`. Moving each sample to its cell centre shifts the
/// amplitude by at most `pi / bins`.
pub fn histogram(samples: &[f64], bins: usize) -> Result<CircularDensity> {
    if samples.is_empty() {
        return Err(FlowError::Domain("no samples".into()));
    }
    let width = TAU / bins as f64;
    let mut counts = vec![0.0; bins];
    for &p in samples {
        let j = ((canonical_angle(p) / width).round() as usize) % bins;
        counts[j] += 1.0;
    }
    let scale = 1.0 / (samples.len() as f64 * width);
    CircularDensity::grid(counts.into_iter().map(|c| c * scale).collect())
}
