//! Epistemic states in the wave-function chart and the `(rho, phi)` chart, and
//! factories for the states the test suites use.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use statrs::function::erf::erf;

use crate::error::{EdError, Result};
use crate::grid::GridSpec;
use crate::system::ParticleSystem;

/// Tolerance on `|integral(rho) - 1|` accepted by constructors.
pub const NORM_TOLERANCE: f64 = 1e-10;
/// Minimum `min(rho) / max(rho)` for the `(rho, phi)` chart to be regular.
pub const NODE_FLOOR: f64 = 1e-10;

/// Complex amplitude field on the configuration grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: GridSpec,
    amplitudes: Vec<Complex64>,
    time: f64,
}

impl WaveFunction {
    /// Wraps raw amplitudes. No normalization is applied.
    pub fn new(grid: GridSpec, amplitudes: Vec<Complex64>, time: f64) -> Result<Self> {
        if amplitudes.len() != grid.len() {
            return Err(EdError::InvalidState(format!(
                "{} amplitudes for a grid of {} points",
                amplitudes.len(),
                grid.len()
            )));
        }
        if amplitudes.iter().any(|z| !z.is_finite()) {
            return Err(EdError::InvalidState("amplitudes must be finite".into()));
        }
        Ok(Self { grid, amplitudes, time })
    }

    /// Samples `f` at every grid point and normalizes.
    pub fn from_fn<F>(grid: &GridSpec, time: f64, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Complex64 + Sync,
    {
        let dim = grid.config_dim();
        let amplitudes = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let p = grid.point(idx);
                f(&p[..dim])
            })
            .collect();
        Self::new(grid.clone(), amplitudes, time)?.normalized()
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, time: f64) {
        self.time = time;
    }

    pub fn with_amplitudes(&self, amplitudes: Vec<Complex64>, time: f64) -> Self {
        debug_assert_eq!(amplitudes.len(), self.amplitudes.len());
        Self { grid: self.grid.clone(), amplitudes, time }
    }

    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }

    /// `integral |psi|^2`.
    pub fn norm_squared(&self) -> f64 {
        self.grid.cell_volume() * self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let norm = self.norm_squared();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(EdError::InvalidState(format!("cannot normalize a state of norm {norm}")));
        }
        let scale = norm.sqrt().recip();
        self.amplitudes.iter_mut().for_each(|z| *z *= scale);
        Ok(self)
    }

    pub fn check_normalized(&self, tol: f64) -> Result<()> {
        let norm = self.norm_squared();
        if (norm - 1.0).abs() > tol {
            return Err(EdError::NotNormalized { norm });
        }
        Ok(())
    }

    /// `<self|other>` by Riemann sum.
    pub fn inner(&self, other: &WaveFunction) -> Result<Complex64> {
        if self.grid != other.grid {
            return Err(EdError::GridMismatch);
        }
        Ok(inner_raw(&self.grid, &self.amplitudes, &other.amplitudes))
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &WaveFunction) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Pure-state trace distance `sqrt(1 - fidelity)`.
    pub fn trace_distance(&self, other: &WaveFunction) -> Result<f64> {
        Ok((1.0 - self.fidelity(other)?).max(0.0).sqrt())
    }

    /// L2 distance `||self - other||`.
    pub fn distance(&self, other: &WaveFunction) -> Result<f64> {
        if self.grid != other.grid {
            return Err(EdError::GridMismatch);
        }
        let sum: f64 = self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        Ok((sum * self.grid.cell_volume()).sqrt())
    }

    /// Largest density found within `cells` grid cells of any box face.
    pub fn edge_density(&self, cells: usize) -> f64 {
        let g = &self.grid;
        let mut max = 0.0f64;
        for (idx, z) in self.amplitudes.iter().enumerate() {
            let index = g.unravel(idx);
            let near = (0..g.config_dim())
                .any(|a| index[a] < cells || index[a] + cells >= g.points()[a]);
            if near {
                max = max.max(z.norm_sqr());
            }
        }
        max
    }

    /// Multiplies every amplitude by `exp(i theta)`.
    pub fn with_global_phase(mut self, theta: f64) -> Self {
        let p = Complex64::from_polar(1.0, theta);
        self.amplitudes.iter_mut().for_each(|z| *z *= p);
        self
    }
}

/// `h^D sum conj(a) b` with fixed summation order.
pub fn inner_raw(grid: &GridSpec, a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let sum: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    sum * grid.cell_volume()
}

/// Probability density and phase (units of action) on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EpistemicState {
    grid: GridSpec,
    rho: Vec<f64>,
    phi: Vec<f64>,
    time: f64,
}

impl EpistemicState {
    pub fn new(grid: GridSpec, rho: Vec<f64>, phi: Vec<f64>, time: f64) -> Result<Self> {
        if rho.len() != grid.len() || phi.len() != grid.len() {
            return Err(EdError::InvalidState("field lengths do not match the grid".into()));
        }
        if rho.iter().any(|&r| !(r >= 0.0 && r.is_finite())) || phi.iter().any(|p| !p.is_finite()) {
            return Err(EdError::InvalidState("rho must be finite and nonnegative, phi finite".into()));
        }
        let norm = grid.integrate(&rho);
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(EdError::NotNormalized { norm });
        }
        Ok(Self { grid, rho, phi, time })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Normalization defect `N = 1 - integral(rho)`.
    pub fn norm_defect(&self) -> f64 {
        1.0 - self.grid.integrate(&self.rho)
    }

    /// `min(rho) / max(rho)`.
    pub fn density_ratio(&self) -> f64 {
        density_ratio(&self.rho)
    }

    pub fn check_nodeless(&self) -> Result<()> {
        check_nodeless(&self.rho)
    }
}

fn density_ratio(rho: &[f64]) -> f64 {
    let max = rho.iter().copied().fold(0.0, f64::max);
    let min = rho.iter().copied().fold(f64::INFINITY, f64::min);
    if max > 0.0 { min / max } else { 0.0 }
}

pub(crate) fn check_nodeless(rho: &[f64]) -> Result<()> {
    let ratio = density_ratio(rho);
    if ratio > NODE_FLOOR {
        Ok(())
    } else {
        Err(EdError::NodeError { ratio })
    }
}

fn wrap_angle(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y >= PI { y - 2.0 * PI } else { y }
}

/// Maps `psi` to `(rho, phi)` with `phi = hbar arg(psi)` unwrapped.
///
/// The sweep visits points in row-major order; each point is unwrapped
/// against its predecessor along the fastest axis with a nonzero index, so the
/// first grid point keeps its principal value in `[-pi hbar, pi hbar)`.
pub fn wf_to_epistemic(psi: &WaveFunction, hbar: f64) -> Result<EpistemicState> {
    let rho = psi.density();
    check_nodeless(&rho)?;
    let g = psi.grid();
    let dim = g.config_dim();
    let amps = psi.amplitudes();
    let mut theta = vec![0.0; g.len()];
    for idx in 0..g.len() {
        let raw = amps[idx].arg();
        if idx == 0 {
            theta[0] = wrap_angle(raw);
            continue;
        }
        let index = g.unravel(idx);
        let axis = (0..dim).rev().find(|&a| index[a] > 0).expect("nonzero index");
        let prev = theta[idx - g.stride(axis)];
        theta[idx] = prev + wrap_angle(raw - prev);
    }
    let phi = theta.into_iter().map(|t| hbar * t).collect();
    EpistemicState::new(g.clone(), rho, phi, psi.time())
}

/// Maps `psi` to `(rho, phi)` keeping the principal value of the phase. No
/// nodeless requirement; only `epistemic_to_wf` round trips are meaningful.
pub fn wf_to_epistemic_wrapped(psi: &WaveFunction, hbar: f64) -> Result<EpistemicState> {
    let rho = psi.density();
    let phi = psi.amplitudes().iter().map(|z| hbar * z.arg()).collect();
    EpistemicState::new(psi.grid().clone(), rho, phi, psi.time())
}

/// `psi = rho^(1/2) exp(i phi / hbar)`.
pub fn epistemic_to_wf(state: &EpistemicState, hbar: f64) -> WaveFunction {
    let amplitudes = state
        .rho
        .iter()
        .zip(&state.phi)
        .map(|(&r, &p)| Complex64::from_polar(r.sqrt(), p / hbar))
        .collect();
    WaveFunction { grid: state.grid.clone(), amplitudes, time: state.time }
}

/// Product Gaussian `prod exp(-(x-c)^2 / 4 sigma^2 + i k x)`, normalized.
///
/// `centers` holds one position per particle; `widths` and `wavevectors` hold
/// one value per configuration axis. `sigma` is the standard deviation of the
/// density.
pub fn gaussian_packet(
    grid: &GridSpec,
    system: &ParticleSystem,
    centers: &[Vec<f64>],
    widths: &[f64],
    wavevectors: &[f64],
) -> Result<WaveFunction> {
    system.check_particles(grid.particle_count())?;
    let dim = grid.config_dim();
    let d = grid.spatial_dim();
    if centers.len() != grid.particle_count() || centers.iter().any(|c| c.len() != d) {
        return Err(EdError::DimensionError(format!(
            "expected {} centers with {d} components",
            grid.particle_count()
        )));
    }
    if widths.len() != dim || wavevectors.len() != dim {
        return Err(EdError::DimensionError(format!(
            "expected {dim} widths and wavevectors, got {} and {}",
            widths.len(),
            wavevectors.len()
        )));
    }
    let center: Vec<f64> = centers.iter().flatten().copied().collect();
    for axis in 0..dim {
        let min = 4.0 * grid.spacing(axis);
        if !(widths[axis] >= min) {
            return Err(EdError::UnresolvableWidth { axis, width: widths[axis], min });
        }
    }
    // density mass outside the central half [-L/4, L/4] of every axis
    let inside: f64 = (0..dim)
        .map(|a| {
            let q = grid.lengths()[a] / 4.0;
            let s = widths[a] * std::f64::consts::SQRT_2;
            0.5 * (erf((q - center[a]) / s) + erf((q + center[a]) / s))
        })
        .product();
    let outside = 1.0 - inside;
    if outside > 1e-10 {
        return Err(EdError::BoundaryLeak { outside });
    }
    WaveFunction::from_fn(grid, 0.0, |x| {
        let mut exponent = Complex64::new(0.0, 0.0);
        for a in 0..dim {
            let dx = x[a] - center[a];
            exponent += Complex64::new(-dx * dx / (4.0 * widths[a] * widths[a]), wavevectors[a] * x[a]);
        }
        exponent.exp()
    })
}

/// Planar vortex `(x + i sgn(q) y)^|q| exp(-r^2 / 2 w^2)` for one particle in
/// two dimensions.
pub fn vortex_state(grid: &GridSpec, width: f64, charge: i32) -> Result<WaveFunction> {
    if grid.spatial_dim() != 2 || grid.particle_count() != 1 {
        return Err(EdError::DimensionError("vortex states need one particle in 2D".into()));
    }
    if !(width > 0.0) {
        return Err(EdError::InvalidParameter(format!("vortex width {width}")));
    }
    let sign = if charge < 0 { -1.0 } else { 1.0 };
    let power = charge.unsigned_abs() as i32;
    WaveFunction::from_fn(grid, 0.0, |x| {
        let z = Complex64::new(x[0], sign * x[1]);
        let r2 = x[0] * x[0] + x[1] * x[1];
        z.powi(power) * (-r2 / (2.0 * width * width)).exp()
    })
}

/// Normalized plane wave `exp(i sum_A k_A x_A)` with integer mode numbers.
pub fn plane_wave(grid: &GridSpec, modes: &[i64]) -> Result<WaveFunction> {
    if modes.len() != grid.config_dim() {
        return Err(EdError::DimensionError("one mode number per axis is required".into()));
    }
    let k: Vec<f64> = modes
        .iter()
        .zip(grid.lengths())
        .map(|(&m, &l)| 2.0 * PI * m as f64 / l)
        .collect();
    WaveFunction::from_fn(grid, 0.0, |x| {
        let phase: f64 = x.iter().zip(&k).map(|(xi, ki)| xi * ki).sum();
        Complex64::from_polar(1.0, phase)
    })
}

/// Smooth, periodic and nodeless random state
/// `exp(sum c e^(i q m x_a) + sum c' e^(i q (x_a - x_b)))` with complex
/// coefficients drawn uniformly from `[-amplitude, amplitude]^2` for the
/// lowest `modes` harmonics of every axis and one coupling harmonic per axis
/// pair.
pub fn random_smooth_state<R: rand::Rng + ?Sized>(
    grid: &GridSpec,
    modes: usize,
    amplitude: f64,
    rng: &mut R,
) -> Result<WaveFunction> {
    let dim = grid.config_dim();
    let mut draw = || Complex64::new(rng.random_range(-amplitude..=amplitude), rng.random_range(-amplitude..=amplitude));
    let single: Vec<Vec<Complex64>> = (0..dim).map(|_| (0..modes).map(|_| draw()).collect()).collect();
    let pairs: Vec<(usize, usize, Complex64)> =
        (0..dim).flat_map(|a| (a + 1..dim).map(move |b| (a, b))).map(|(a, b)| (a, b, draw())).collect();
    let q: Vec<f64> = grid.lengths().iter().map(|l| 2.0 * PI / l).collect();
    WaveFunction::from_fn(grid, 0.0, |x| {
        let mut e = Complex64::new(0.0, 0.0);
        for (a, cs) in single.iter().enumerate() {
            for (m, c) in cs.iter().enumerate() {
                e += c * Complex64::from_polar(1.0, q[a] * (m + 1) as f64 * x[a]);
            }
        }
        for (a, b, c) in &pairs {
            e += c * Complex64::from_polar(1.0, q[*a] * x[*a] - q[*b] * x[*b]);
        }
        e.exp()
    })
}

/// Nodeless periodic packet `prod_A exp(kappa cos(q (x_A - c_A)) / 2 + i k_A sin(q (x_A - c_A)) / q)`,
/// `q = 2 pi / L_A`. Localized around `c` for large `kappa` with density
/// ratio `exp(-2 kappa)`, so it stays inside the chart where a Gaussian on the
/// same box would not.
pub fn periodic_packet(grid: &GridSpec, centers: &[f64], kappa: f64, wavevectors: &[f64]) -> Result<WaveFunction> {
    let dim = grid.config_dim();
    if centers.len() != dim || wavevectors.len() != dim {
        return Err(EdError::DimensionError(format!("expected {dim} centers and wavevectors")));
    }
    if !(kappa.is_finite() && kappa >= 0.0) {
        return Err(EdError::InvalidParameter(format!("concentration must be finite and non-negative, got {kappa}")));
    }
    let q: Vec<f64> = grid.lengths().iter().map(|l| 2.0 * PI / l).collect();
    WaveFunction::from_fn(grid, 0.0, |x| {
        let mut e = Complex64::new(0.0, 0.0);
        for a in 0..dim {
            let u = q[a] * (x[a] - centers[a]);
            e += Complex64::new(0.5 * kappa * u.cos(), wavevectors[a] * u.sin() / q[a]);
        }
        e.exp()
    })
}
