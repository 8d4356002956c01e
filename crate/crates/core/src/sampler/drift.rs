use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{EdError, Result};
use crate::grid::GridSpec;
use crate::observables::{current_velocity, gradients};
use crate::shift::ShiftVelocity;
use crate::spectral::Spectral;
use crate::state::{wf_to_epistemic, WaveFunction};
use crate::system::ParticleSystem;

/// Relative density floor for the osmotic term.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// Drift `m^AB d_B varphi` with `varphi = phi + eta log rho^(1/2)`, sampled on
/// the grid together with the density used to detect near-node positions.
///
/// In the wave-function chart
/// `d_A varphi = (hbar Im(psi* d_A psi) + eta Re(psi* d_A psi)) / rho`,
/// which needs no unwrapped phase.
#[derive(Debug, Clone)]
pub struct DriftField {
    grid: GridSpec,
    drift: Vec<Vec<f64>>,
    rho: Vec<f64>,
    floor: f64,
    axis_masses: Vec<f64>,
    eta: f64,
}

impl DriftField {
    pub fn new(psi: &WaveFunction, system: &ParticleSystem) -> Result<Self> {
        let g = psi.grid();
        system.check_particles(g.particle_count())?;
        let rho = psi.density();
        let max = rho.iter().copied().fold(0.0, f64::max);
        if !(max > 0.0) {
            return Err(EdError::InvalidState("state has no density".into()));
        }
        let floor = DENSITY_FLOOR * max;
        let spectral = Spectral::new(g);
        let axis_masses = system.axis_masses(g.spatial_dim());
        let (hbar, eta) = (system.hbar(), system.eta());
        let amps = psi.amplitudes();
        let drift = gradients(&spectral, amps)
            .into_iter()
            .zip(&axis_masses)
            .map(|(dpsi, &m)| {
                amps.par_iter()
                    .zip(dpsi.par_iter())
                    .map(|(p, dp): (&Complex64, &Complex64)| {
                        let c = p.conj() * dp;
                        (hbar * c.im + eta * c.re) / (m * p.norm_sqr().max(floor))
                    })
                    .collect()
            })
            .collect();
        Ok(Self { grid: g.clone(), drift, rho, floor, axis_masses, eta })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Drift per configuration axis on the grid.
    pub fn drift(&self) -> &[Vec<f64>] {
        &self.drift
    }

    pub fn axis_masses(&self) -> &[f64] {
        &self.axis_masses
    }

    /// Diffusion constant of the fluctuations.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Replaces the diffusion constant of the fluctuations while keeping the
    /// drift. Only useful as a deliberately inconsistent control.
    pub fn with_noise_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    /// Multilinear interpolation of the drift at an off-grid configuration.
    /// Returns `false` when the interpolated density is below the floor; the
    /// drift is then the floored-density value.
    pub fn eval(&self, x: &[f64], out: &mut [f64]) -> bool {
        let g = &self.grid;
        let dim = g.config_dim();
        let mut base = [0usize; 4];
        let mut frac = [0.0f64; 4];
        for a in 0..dim {
            let n = g.points()[a];
            let s = (g.wrap(a, x[a]) + 0.5 * g.lengths()[a]) / g.spacing(a);
            let i = s.floor();
            frac[a] = s - i;
            base[a] = (i as usize) % n;
        }
        out[..dim].iter_mut().for_each(|o| *o = 0.0);
        let mut rho = 0.0;
        for corner in 0..(1usize << dim) {
            let mut w = 1.0;
            let mut idx = 0;
            for a in 0..dim {
                let up = (corner >> a) & 1 == 1;
                let n = g.points()[a];
                let i = if up { (base[a] + 1) % n } else { base[a] };
                w *= if up { frac[a] } else { 1.0 - frac[a] };
                idx += i * g.stride(a);
            }
            if w == 0.0 {
                continue;
            }
            rho += w * self.rho[idx];
            for a in 0..dim {
                out[a] += w * self.drift[a][idx];
            }
        }
        rho >= self.floor
    }

    /// `max |m^AB d_B varphi - (v^A + xi_dot^A + (eta/2) m^AB d_B log rho)|`
    /// over grid points with density above `relative_cutoff * max rho`,
    /// assembling the right side from the current velocity and a spectral
    /// derivative of the density.
    pub fn decomposition_defect(
        &self,
        psi: &WaveFunction,
        system: &ParticleSystem,
        shift: &ShiftVelocity,
        relative_cutoff: f64,
    ) -> Result<f64> {
        let g = psi.grid();
        if g != &self.grid {
            return Err(EdError::GridMismatch);
        }
        let state = wf_to_epistemic(psi, system.hbar())?;
        let v = current_velocity(&state, system, shift)?;
        let xi = shift.config_field(g)?;
        let spectral = Spectral::new(g);
        let max = self.rho.iter().copied().fold(0.0, f64::max);
        let cutoff = relative_cutoff * max;
        let mut defect = 0.0f64;
        for a in 0..g.config_dim() {
            let drho = spectral.derivative_real(&self.rho, a);
            let m = self.axis_masses[a];
            for i in 0..g.len() {
                if self.rho[i] < cutoff {
                    continue;
                }
                let osmotic = 0.5 * self.eta * drho[i] / (m * self.rho[i]);
                let rhs = v[a][i] + xi[a][i] + osmotic;
                defect = defect.max((self.drift[a][i] - rhs).abs());
            }
        }
        Ok(defect)
    }
}
