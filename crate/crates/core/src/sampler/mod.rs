//! Ontic trajectories: Euler–Maruyama sampling of the short-step transition
//! kernel against a co-evolving epistemic state, plus the numerical
//! maximum-entropy check of the kernel itself.

mod compare;
mod drift;
mod ensemble;
mod maxent;

pub use compare::{compare_positions, ensemble_density_compare, two_sample_compare, DensityComparison, MIN_EXPECTED_COUNT};
pub use drift::{DriftField, DENSITY_FLOOR};
pub use ensemble::{
    draw_initial, sample_ensemble, sample_step, SamplerOptions, TrajectoryEnsemble, MAX_CLAMP_FRACTION,
};
pub use maxent::{maxent_transition_oracle, MaxEntProblem, MaxEntSolution};
