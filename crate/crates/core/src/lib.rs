//! Relational entropic dynamics on periodic configuration-space grids.
//!
//! The crate evolves few-particle wave functions under a Schrödinger equation
//! carrying rigid shift (translation and rotation) gauge terms, computes
//! best-matching shifts, samples ontic trajectories from the short-step
//! transition kernel and checks the geometric identities of the epistemic
//! phase space.

pub mod best_match;
pub mod error;
pub mod evolution;
pub mod geometry;
pub mod grid;
pub mod hamiltonian;
pub mod io;
pub mod observables;
pub mod potential;
pub mod sampler;
pub mod shift;
pub mod spectral;
pub mod state;
pub mod system;

pub use error::{EdError, Result};
pub use grid::GridSpec;
pub use num_complex::Complex64;
pub use observables::ObservableReport;
pub use potential::PotentialSpec;
pub use shift::ShiftVelocity;
pub use state::{EpistemicState, WaveFunction};
pub use system::ParticleSystem;
