use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{EdError, Result};

/// Particle masses and the action/diffusion constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleSystem {
    masses: Vec<f64>,
    hbar: f64,
    eta: f64,
}

impl ParticleSystem {
    /// New system with `eta = hbar`.
    pub fn new(masses: Vec<f64>, hbar: f64) -> Result<Self> {
        Self::with_eta(masses, hbar, hbar)
    }

    pub fn with_eta(masses: Vec<f64>, hbar: f64, eta: f64) -> Result<Self> {
        if masses.is_empty() {
            return Err(EdError::InvalidSystem("at least one particle is required".into()));
        }
        if let Some(m) = masses.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
            return Err(EdError::InvalidSystem(format!("masses must be positive, got {m}")));
        }
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(EdError::InvalidSystem(format!("hbar must be positive, got {hbar}")));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(EdError::InvalidSystem(format!("eta must be positive, got {eta}")));
        }
        Ok(Self { masses, hbar, eta })
    }

    /// Unit masses, `hbar = eta = 1`.
    pub fn unit(particles: usize) -> Self {
        Self { masses: vec![1.0; particles], hbar: 1.0, eta: 1.0 }
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mass(&self, particle: usize) -> f64 {
        self.masses[particle]
    }

    pub fn particle_count(&self) -> usize {
        self.masses.len()
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn min_mass(&self) -> f64 {
        self.masses.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Mass attached to every configuration axis, `m_A = m_n` for `A = (n, a)`.
    pub fn axis_masses(&self, spatial_dim: usize) -> Vec<f64> {
        self.masses
            .iter()
            .flat_map(|&m| std::iter::repeat_n(m, spatial_dim))
            .collect()
    }

    /// Mass tensor `m_AB = m_n delta_AB`.
    pub fn mass_tensor(&self, spatial_dim: usize) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.axis_masses(spatial_dim).into())
    }

    /// Inverse mass tensor `m^AB = delta^AB / m_n`.
    pub fn inverse_mass_tensor(&self, spatial_dim: usize) -> DMatrix<f64> {
        let inv: Vec<f64> = self.axis_masses(spatial_dim).iter().map(|m| 1.0 / m).collect();
        DMatrix::from_diagonal(&inv.into())
    }

    /// Drift multiplier `alpha' = 1 / eta`.
    pub fn alpha_prime(&self) -> f64 {
        1.0 / self.eta
    }

    /// Prior width multipliers `alpha_n = m_n / (eta dt)`.
    pub fn alpha(&self, dt: f64) -> Vec<f64> {
        self.masses.iter().map(|m| m / (self.eta * dt)).collect()
    }

    pub fn check_particles(&self, particles: usize) -> Result<()> {
        if particles != self.masses.len() {
            return Err(EdError::InvalidSystem(format!(
                "grid has {particles} particles but the system has {} masses",
                self.masses.len()
            )));
        }
        Ok(())
    }
}
