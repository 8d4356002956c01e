//! Residual of the continuity equation `d_t rho + d_A(rho v^A) = 0` between
//! two recorded instants.

use crate::error::{EdError, Result};
use crate::observables::{divergence, probability_flux};
use crate::shift::ShiftVelocity;
use crate::spectral::Spectral;
use crate::state::{check_nodeless, epistemic_to_wf, EpistemicState};
use crate::system::ParticleSystem;

/// L2 norm of `(rho_1 - rho_0)/dt + (div J_0 + div J_1)/2`, with
/// `dt = t_1 - t_0` and `J = rho v` built from the phase gradient in the
/// wave-function chart. The trapezoidal midpoint makes the residual of an
/// exact solution `O(dt^2)`.
pub fn continuity_residual(
    state0: &EpistemicState,
    state1: &EpistemicState,
    system: &ParticleSystem,
    shift: &ShiftVelocity,
) -> Result<f64> {
    if state0.grid() != state1.grid() {
        return Err(EdError::GridMismatch);
    }
    check_nodeless(state0.rho())?;
    check_nodeless(state1.rho())?;
    let dt = state1.time() - state0.time();
    if !(dt > 0.0) {
        return Err(EdError::InvalidParameter(format!("instants must be increasing, dt = {dt}")));
    }
    let grid = state0.grid();
    let spectral = Spectral::new(grid);
    let hbar = system.hbar();
    let psi0 = epistemic_to_wf(state0, hbar);
    let psi1 = epistemic_to_wf(state1, hbar);
    let div0 = divergence(&spectral, &probability_flux(&spectral, psi0.amplitudes(), system, shift)?);
    let div1 = divergence(&spectral, &probability_flux(&spectral, psi1.amplitudes(), system, shift)?);
    let sum: f64 = (0..grid.len())
        .map(|i| {
            let r = (state1.rho()[i] - state0.rho()[i]) / dt + 0.5 * (div0[i] + div1[i]);
            r * r
        })
        .sum();
    Ok((sum * grid.cell_volume()).sqrt())
}
