//! The shifted Hamiltonian operator on the grid.
//!
//! With `xi_dot^A` independent of `x_A` (a rigid motion never moves a
//! coordinate along itself) the minimal-coupling kinetic term expands as
//!
//! ```text
//! |(hbar/i) d_A - m_A xi_dot^A|^2 / 2m_A = p_A^2/2m_A - xi_dot^A p_A + m_A (xi_dot^A)^2 / 2
//! ```
//!
//! so `H = K0 - lambda_dot.P - zeta_dot.L + W` with the scalar field
//! `W = V + sum_n m_n |xi_dot_n|^2 / 2`. Each piece is Hermitian on the
//! periodic grid.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::Result;
use crate::grid::GridSpec;
use crate::potential::PotentialSpec;
use crate::shift::ShiftVelocity;
use crate::spectral::Spectral;
use crate::state::inner_raw;
use crate::system::ParticleSystem;

#[derive(Clone)]
pub struct Hamiltonian {
    grid: GridSpec,
    spectral: Arc<Spectral>,
    hbar: f64,
    axis_masses: Vec<f64>,
    shift: ShiftVelocity,
    potential: Arc<Vec<f64>>,
    /// `sum_A hbar^2 k_A^2 / 2 m_A` on the Fourier grid.
    kinetic: Arc<Vec<f64>>,
    /// `xi_dot^A(x)` per axis; empty for a zero shift.
    xi: Vec<Vec<f64>>,
    /// `V + sum m |xi_dot|^2 / 2`.
    scalar: Vec<f64>,
}

impl Hamiltonian {
    pub fn new(
        grid: &GridSpec,
        system: &ParticleSystem,
        potential: &PotentialSpec,
        shift: &ShiftVelocity,
    ) -> Result<Self> {
        let spectral = Arc::new(Spectral::new(grid));
        let v = Arc::new(potential.evaluate(grid, system)?);
        let axis_masses = system.axis_masses(grid.spatial_dim());
        let weights: Vec<f64> = axis_masses
            .iter()
            .map(|m| system.hbar() * system.hbar() / (2.0 * m))
            .collect();
        let kinetic = Arc::new(spectral.weighted_k_squared(&weights));
        Self::assemble(grid, spectral, system.hbar(), axis_masses, v, kinetic, shift)
    }

    fn assemble(
        grid: &GridSpec,
        spectral: Arc<Spectral>,
        hbar: f64,
        axis_masses: Vec<f64>,
        potential: Arc<Vec<f64>>,
        kinetic: Arc<Vec<f64>>,
        shift: &ShiftVelocity,
    ) -> Result<Self> {
        shift.check_grid(grid)?;
        let (xi, scalar) = if shift.is_zero() {
            (Vec::new(), potential.as_ref().clone())
        } else {
            let xi = shift.config_field(grid)?;
            let scalar = (0..grid.len())
                .map(|idx| {
                    let q: f64 = xi
                        .iter()
                        .zip(&axis_masses)
                        .map(|(field, m)| 0.5 * m * field[idx] * field[idx])
                        .sum();
                    potential[idx] + q
                })
                .collect();
            (xi, scalar)
        };
        Ok(Self {
            grid: grid.clone(),
            spectral,
            hbar,
            axis_masses,
            shift: *shift,
            potential,
            kinetic,
            xi,
            scalar,
        })
    }

    /// Same system and potential with a different shift.
    pub fn with_shift(&self, shift: &ShiftVelocity) -> Result<Self> {
        Self::assemble(
            &self.grid,
            self.spectral.clone(),
            self.hbar,
            self.axis_masses.clone(),
            self.potential.clone(),
            self.kinetic.clone(),
            shift,
        )
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn shift(&self) -> &ShiftVelocity {
        &self.shift
    }

    pub fn axis_masses(&self) -> &[f64] {
        &self.axis_masses
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// `K0` diagonal in Fourier space.
    pub fn kinetic_diagonal(&self) -> &[f64] {
        &self.kinetic
    }

    /// Fourier diagonal of `K0 - lambda_dot . P`.
    pub fn translated_kinetic_diagonal(&self) -> Vec<f64> {
        let lam = self.shift.lambda_dot3();
        let d = self.grid.spatial_dim();
        let g = &self.grid;
        let hbar = self.hbar;
        let spectral = &self.spectral;
        self.kinetic
            .par_iter()
            .enumerate()
            .map(|(idx, &k0)| {
                let index = g.unravel(idx);
                let drift: f64 = (0..g.config_dim())
                    .map(|a| hbar * spectral.wavenumbers(a)[index[a]] * lam[a % d])
                    .sum();
                k0 - drift
            })
            .collect()
    }

    /// `V + sum m |xi_dot|^2 / 2` on the grid.
    pub fn scalar_field(&self) -> &[f64] {
        &self.scalar
    }

    pub fn shift_field(&self) -> &[Vec<f64>] {
        &self.xi
    }

    /// `H psi`.
    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let mut out = psi.to_vec();
        let kinetic = Arc::clone(&self.kinetic);
        self.spectral.forward_all(&mut out);
        out.par_iter_mut().zip(kinetic.par_iter()).for_each(|(v, k)| *v *= k);
        self.spectral.inverse_all(&mut out);
        out.par_iter_mut()
            .zip(psi.par_iter())
            .zip(self.scalar.par_iter())
            .for_each(|((o, p), w)| *o += p * w);
        // - xi^A p_A psi = i hbar xi^A d_A psi
        for (axis, field) in self.xi.iter().enumerate() {
            let dpsi = self.spectral.derivative(psi, axis);
            let ih = Complex64::new(0.0, self.hbar);
            out.par_iter_mut()
                .zip(dpsi.par_iter())
                .zip(field.par_iter())
                .for_each(|((o, dp), x)| *o += ih * x * dp);
        }
        out
    }

    /// `<psi|H|psi>` including any spurious imaginary part.
    pub fn expectation(&self, psi: &[Complex64]) -> Complex64 {
        let h = self.apply(psi);
        inner_raw(&self.grid, psi, &h)
    }
}
