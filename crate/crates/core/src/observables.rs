//! Expectation functionals and the current velocity field.
//!
//! Rotational quantities are taken about the coordinate origin and embedded in
//! three dimensions (a planar system only has `L_z` and an inertia tensor with
//! `z` as the normal axis). Reductions are sequential so values do not depend
//! on the thread count.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EdError, Result};
use crate::hamiltonian::Hamiltonian;
use crate::potential::PotentialSpec;
use crate::shift::ShiftVelocity;
use crate::spectral::Spectral;
use crate::state::{check_nodeless, epistemic_to_wf, EpistemicState, WaveFunction};
use crate::system::ParticleSystem;

/// Normalization tolerance accepted by the expectation functionals.
pub const EXPECTATION_NORM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableReport {
    pub time: f64,
    pub spatial_dim: usize,
    pub norm: f64,
    /// `1 - integral(rho)`.
    pub norm_defect: f64,
    pub energy: f64,
    pub energy_imag: f64,
    pub momentum: [f64; 3],
    pub angular_momentum: [f64; 3],
    pub inertia: [[f64; 3]; 3],
    pub center_of_mass: [f64; 3],
}

impl ObservableReport {
    /// All functionals at once, sharing one set of spectral derivatives.
    pub fn compute(h: &Hamiltonian, psi: &WaveFunction, system: &ParticleSystem) -> Result<Self> {
        let g = psi.grid();
        if g != h.grid() {
            return Err(EdError::GridMismatch);
        }
        system.check_particles(g.particle_count())?;
        let amps = psi.amplitudes();
        let dpsi = gradients(h.spectral(), amps);
        let hbar = system.hbar();
        let dv = g.cell_volume();
        let d = g.spatial_dim();
        let dim = g.config_dim();
        let axis_masses = h.axis_masses();

        let norm = psi.norm_squared();
        // <p_A>, kinetic part and shift cross term
        let mut momentum = [0.0; 3];
        let mut kinetic = 0.0;
        let mut cross = Complex64::new(0.0, 0.0);
        for a in 0..dim {
            let mut pa = Complex64::new(0.0, 0.0);
            let mut k2 = 0.0;
            for (p, dp) in amps.iter().zip(&dpsi[a]) {
                pa += p.conj() * dp;
                k2 += dp.norm_sqr();
            }
            momentum[a % d] += (pa * Complex64::new(0.0, -hbar) * dv).re;
            kinetic += hbar * hbar / (2.0 * axis_masses[a]) * k2 * dv;
            if let Some(field) = h.shift_field().get(a) {
                let mut c = Complex64::new(0.0, 0.0);
                for ((p, dp), x) in amps.iter().zip(&dpsi[a]).zip(field) {
                    c += p.conj() * dp * x;
                }
                cross += c * Complex64::new(0.0, -hbar) * dv;
            }
        }
        let scalar: f64 = amps.iter().zip(h.scalar_field()).map(|(p, w)| p.norm_sqr() * w).sum::<f64>() * dv;
        let energy = kinetic + scalar - cross.re;
        let energy_imag = -cross.im;

        let mut angular_momentum = [0.0; 3];
        let mut inertia = [[0.0; 3]; 3];
        let mut center = [0.0; 3];
        if d >= 2 {
            for n in 0..g.particle_count() {
                let m = system.mass(n);
                let mut ang = [Complex64::new(0.0, 0.0); 3];
                let mut second = [[0.0; 3]; 3];
                for (idx, p) in amps.iter().enumerate() {
                    let point = g.point(idx);
                    let mut x = [0.0; 3];
                    x[..d].copy_from_slice(&point[n * d..n * d + d]);
                    let mut dp = [Complex64::new(0.0, 0.0); 3];
                    for a in 0..d {
                        dp[a] = dpsi[n * d + a][idx];
                    }
                    let pc = p.conj();
                    ang[0] += pc * (x[1] * dp[2] - x[2] * dp[1]);
                    ang[1] += pc * (x[2] * dp[0] - x[0] * dp[2]);
                    ang[2] += pc * (x[0] * dp[1] - x[1] * dp[0]);
                    let rho = p.norm_sqr();
                    for a in 0..3 {
                        for b in a..3 {
                            second[a][b] += rho * x[a] * x[b];
                        }
                    }
                }
                for a in 0..3 {
                    angular_momentum[a] += (ang[a] * Complex64::new(0.0, -hbar) * dv).re;
                }
                let r2 = (second[0][0] + second[1][1] + second[2][2]) * dv;
                for a in 0..3 {
                    for b in a..3 {
                        let delta = if a == b { r2 } else { 0.0 };
                        inertia[a][b] += m * (delta - second[a][b] * dv);
                    }
                }
            }
            for a in 0..3 {
                for b in 0..a {
                    inertia[a][b] = inertia[b][a];
                }
            }
        }
        let total_mass = system.total_mass();
        for (idx, p) in amps.iter().enumerate() {
            let point = g.point(idx);
            let rho = p.norm_sqr();
            for n in 0..g.particle_count() {
                for a in 0..d {
                    center[a] += system.mass(n) * rho * point[n * d + a];
                }
            }
        }
        center.iter_mut().for_each(|c| *c *= dv / total_mass);

        Ok(Self {
            time: psi.time(),
            spatial_dim: d,
            norm,
            norm_defect: 1.0 - norm,
            energy,
            energy_imag,
            momentum,
            angular_momentum,
            inertia,
            center_of_mass: center,
        })
    }

    /// `|P - M lambda_dot|`.
    pub fn momentum_residual(&self, total_mass: f64, shift: &ShiftVelocity) -> f64 {
        let lam = shift.lambda_dot3();
        (0..3).map(|a| (self.momentum[a] - total_mass * lam[a]).powi(2)).sum::<f64>().sqrt()
    }

    /// `|L - I zeta_dot|`; zero for line systems.
    pub fn angular_residual(&self, shift: &ShiftVelocity) -> f64 {
        if self.spatial_dim < 2 {
            return 0.0;
        }
        let z = shift.zeta_dot();
        (0..3)
            .map(|a| {
                let iz: f64 = (0..3).map(|b| self.inertia[a][b] * z[b]).sum();
                (self.angular_momentum[a] - iz).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Spectral gradient `d_A psi` for every configuration axis.
pub fn gradients(spectral: &Spectral, psi: &[Complex64]) -> Vec<Vec<Complex64>> {
    (0..spectral.grid().config_dim()).map(|a| spectral.derivative(psi, a)).collect()
}

fn check_norm(psi: &WaveFunction) -> Result<()> {
    psi.check_normalized(EXPECTATION_NORM_TOL)
}

/// `<H_xi>` for a normalized state (real part).
pub fn hamiltonian_expectation(
    psi: &WaveFunction,
    system: &ParticleSystem,
    potential: &PotentialSpec,
    shift: &ShiftVelocity,
) -> Result<f64> {
    Ok(hamiltonian_expectation_complex(psi, system, potential, shift)?.re)
}

/// `<psi|H_xi|psi>` with its (diagnostic) imaginary part.
pub fn hamiltonian_expectation_complex(
    psi: &WaveFunction,
    system: &ParticleSystem,
    potential: &PotentialSpec,
    shift: &ShiftVelocity,
) -> Result<Complex64> {
    check_norm(psi)?;
    let h = Hamiltonian::new(psi.grid(), system, potential, shift)?;
    Ok(h.expectation(psi.amplitudes()))
}

/// Total momentum `sum_n <(hbar/i) d_na>`, one component per spatial axis.
pub fn momentum_expectation(psi: &WaveFunction, system: &ParticleSystem) -> Result<Vec<f64>> {
    check_norm(psi)?;
    let g = psi.grid();
    system.check_particles(g.particle_count())?;
    let spectral = Spectral::new(g);
    let d = g.spatial_dim();
    let mut p = vec![0.0; d];
    for axis in 0..g.config_dim() {
        let dpsi = spectral.derivative(psi.amplitudes(), axis);
        let s: Complex64 = psi.amplitudes().iter().zip(&dpsi).map(|(a, b)| a.conj() * b).sum();
        p[axis % d] += (s * Complex64::new(0.0, -system.hbar()) * g.cell_volume()).re;
    }
    Ok(p)
}

fn full_report(psi: &WaveFunction, system: &ParticleSystem) -> Result<ObservableReport> {
    check_norm(psi)?;
    let g = psi.grid();
    let h = Hamiltonian::new(g, system, &PotentialSpec::Free, &ShiftVelocity::zero(g.spatial_dim()))?;
    ObservableReport::compute(&h, psi, system)
}

fn require_planar_or_higher(psi: &WaveFunction) -> Result<()> {
    if psi.grid().spatial_dim() < 2 {
        return Err(EdError::DimensionError("rotational quantities need d >= 2".into()));
    }
    Ok(())
}

/// Total angular momentum about the origin, embedded in three dimensions.
pub fn angular_momentum_expectation(psi: &WaveFunction, system: &ParticleSystem) -> Result<[f64; 3]> {
    require_planar_or_higher(psi)?;
    Ok(full_report(psi, system)?.angular_momentum)
}

/// Inertia tensor about the origin, embedded in three dimensions.
pub fn inertia_expectation(psi: &WaveFunction, system: &ParticleSystem) -> Result<[[f64; 3]; 3]> {
    require_planar_or_higher(psi)?;
    Ok(full_report(psi, system)?.inertia)
}

/// Expected center of mass.
pub fn center_of_mass(psi: &WaveFunction, system: &ParticleSystem) -> Result<[f64; 3]> {
    Ok(full_report(psi, system)?.center_of_mass)
}

/// `sum_n (m_n / 2) <|xi_dot_n|^2>`.
pub fn shift_quadratic_expectation(
    psi: &WaveFunction,
    system: &ParticleSystem,
    shift: &ShiftVelocity,
) -> Result<f64> {
    let g = psi.grid();
    let fields = shift.config_field(g)?;
    let masses = system.axis_masses(g.spatial_dim());
    let sum: f64 = psi
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(idx, p)| {
            let q: f64 = fields.iter().zip(&masses).map(|(f, m)| 0.5 * m * f[idx] * f[idx]).sum();
            p.norm_sqr() * q
        })
        .sum();
    Ok(sum * g.cell_volume())
}

/// Phase gradient `d_A phi = hbar Im(psi* d_A psi) / rho` per axis, computed in
/// the wave-function chart so an unwrapped phase never needs to be periodic.
pub fn phase_gradient(spectral: &Spectral, psi: &[Complex64], hbar: f64) -> Vec<Vec<f64>> {
    gradients(spectral, psi)
        .into_iter()
        .map(|dpsi| {
            psi.par_iter()
                .zip(dpsi.par_iter())
                .map(|(p, dp)| hbar * (p.conj() * dp).im / p.norm_sqr())
                .collect()
        })
        .collect()
}

/// Current velocity `v^A = m^AB d_B phi - xi_dot^A`.
pub fn current_velocity(
    state: &EpistemicState,
    system: &ParticleSystem,
    shift: &ShiftVelocity,
) -> Result<Vec<Vec<f64>>> {
    check_nodeless(state.rho())?;
    let g = state.grid();
    system.check_particles(g.particle_count())?;
    let psi = epistemic_to_wf(state, system.hbar());
    let spectral = Spectral::new(g);
    let grad = phase_gradient(&spectral, psi.amplitudes(), system.hbar());
    let xi = shift.config_field(g)?;
    let masses = system.axis_masses(g.spatial_dim());
    Ok(grad
        .into_iter()
        .zip(xi)
        .zip(masses)
        .map(|((gphi, field), m)| gphi.iter().zip(&field).map(|(gp, x)| gp / m - x).collect())
        .collect())
}

/// Probability flux `rho v^A = (hbar/m_A) Im(psi* d_A psi) - rho xi_dot^A`.
/// Regular at nodes.
pub fn probability_flux(
    spectral: &Spectral,
    psi: &[Complex64],
    system: &ParticleSystem,
    shift: &ShiftVelocity,
) -> Result<Vec<Vec<f64>>> {
    let g = spectral.grid();
    let xi = shift.config_field(g)?;
    let masses = system.axis_masses(g.spatial_dim());
    let hbar = system.hbar();
    Ok(gradients(spectral, psi)
        .into_iter()
        .zip(xi)
        .zip(masses)
        .map(|((dpsi, field), m)| {
            psi.iter()
                .zip(&dpsi)
                .zip(&field)
                .map(|((p, dp), x)| hbar / m * (p.conj() * dp).im - p.norm_sqr() * x)
                .collect()
        })
        .collect())
}

/// Spectral divergence of a vector field given per configuration axis.
pub fn divergence(spectral: &Spectral, field: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; spectral.grid().len()];
    for (a, f) in field.iter().enumerate() {
        let d = spectral.derivative_real(f, a);
        out.iter_mut().zip(&d).for_each(|(o, v)| *o += v);
    }
    out
}

/// Observable report for a state without a prebuilt Hamiltonian.
pub fn report_for(
    psi: &WaveFunction,
    system: &ParticleSystem,
    potential: &PotentialSpec,
    shift: &ShiftVelocity,
) -> Result<ObservableReport> {
    let h = Hamiltonian::new(psi.grid(), system, potential, shift)?;
    ObservableReport::compute(&h, psi, system)
}
