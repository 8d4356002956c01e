//! Time stepping of the shifted Schrödinger equation.

pub mod continuity;
pub mod crank_nicolson;
pub mod parametrized;
pub mod split_step;

use serde::{Deserialize, Serialize};

use crate::error::{EdError, Result};
use crate::hamiltonian::Hamiltonian;
use crate::observables::ObservableReport;
use crate::potential::PotentialSpec;
use crate::shift::ShiftVelocity;
use crate::state::WaveFunction;
use crate::system::ParticleSystem;

pub use continuity::continuity_residual;
pub use crank_nicolson::{CrankNicolson, SolveStats};
pub use parametrized::{parametrized_evolve, LapseKind, LapseProfile, ParametrizedRun};
pub use split_step::SplitStep;

/// Density threshold near the box faces above which a rotating run warns.
pub const EDGE_DENSITY_WARNING: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    #[serde(alias = "cn")]
    CrankNicolson,
    #[serde(alias = "split")]
    SplitStep,
}

impl std::str::FromStr for Backend {
    type Err = EdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cn" | "crank-nicolson" => Ok(Backend::CrankNicolson),
            "split" | "split-step" => Ok(Backend::SplitStep),
            other => Err(EdError::InvalidParameter(format!("unknown backend {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub dt: f64,
    pub backend: Backend,
    pub steps: usize,
    /// Relative residual for the implicit solve.
    pub tolerance: f64,
    pub record_stride: usize,
}

impl SolverParams {
    pub fn new(dt: f64, steps: usize, backend: Backend) -> Self {
        Self { dt, backend, steps, tolerance: 1e-13, record_stride: 1 }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(EdError::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(EdError::InvalidParameter(format!("solver tolerance {}", self.tolerance)));
        }
        if self.record_stride == 0 {
            return Err(EdError::InvalidParameter("record stride must be at least 1".into()));
        }
        Ok(())
    }

    /// `dt hbar / (h^2 m_min)`. Values well above one mean the split-step
    /// kinetic phase wraps many times per step on the finest modes.
    pub fn cfl_ratio(&self, grid: &crate::grid::GridSpec, system: &ParticleSystem) -> f64 {
        let h = grid.min_spacing();
        self.dt * system.hbar() / (h * h * system.min_mass())
    }
}

/// One-step propagator for a fixed Hamiltonian and step.
pub enum Stepper {
    Split(SplitStep),
    CrankNicolson(CrankNicolson),
}

impl Stepper {
    pub fn new(hamiltonian: &Hamiltonian, dt: f64, backend: Backend, tolerance: f64) -> Self {
        match backend {
            Backend::SplitStep => Stepper::Split(SplitStep::new(hamiltonian, dt)),
            Backend::CrankNicolson => Stepper::CrankNicolson(CrankNicolson::new(hamiltonian, dt, tolerance)),
        }
    }

    pub fn step(&self, psi: &mut [num_complex::Complex64]) -> Result<SolveStats> {
        match self {
            Stepper::Split(s) => {
                s.step(psi);
                Ok(SolveStats::default())
            }
            Stepper::CrankNicolson(c) => c.step(psi),
        }
    }
}

fn check_inputs(psi: &WaveFunction, system: &ParticleSystem, shift: &ShiftVelocity) -> Result<()> {
    system.check_particles(psi.grid().particle_count())?;
    shift.check_grid(psi.grid())?;
    psi.check_normalized(crate::observables::EXPECTATION_NORM_TOL)
}

fn warn_edge(psi: &WaveFunction, shift: &ShiftVelocity) {
    if shift.is_rotating() {
        let edge = psi.edge_density(2);
        if edge > EDGE_DENSITY_WARNING {
            log::warn!("density {edge:e} within two cells of the box edge in a rotating frame");
        }
    }
}

/// Advances `psi` by one step of `params.dt`.
pub fn step_schrodinger(
    psi: &WaveFunction,
    system: &ParticleSystem,
    potential: &PotentialSpec,
    shift: &ShiftVelocity,
    params: &SolverParams,
) -> Result<WaveFunction> {
    params.validate()?;
    check_inputs(psi, system, shift)?;
    warn_edge(psi, shift);
    let h = Hamiltonian::new(psi.grid(), system, potential, shift)?;
    let stepper = Stepper::new(&h, params.dt, params.backend, params.tolerance);
    let mut amps = psi.amplitudes().to_vec();
    stepper.step(&mut amps)?;
    Ok(psi.with_amplitudes(amps, psi.time() + params.dt))
}

/// A recorded instant of an evolution.
#[derive(Debug, Clone)]
pub struct Record {
    pub step: usize,
    pub state: WaveFunction,
    pub report: ObservableReport,
    pub shift: ShiftVelocity,
}

#[derive(Debug, Clone, Default)]
pub struct Series {
    pub records: Vec<Record>,
    pub solver_iterations: usize,
}

impl Series {
    pub fn final_state(&self) -> Option<&WaveFunction> {
        self.records.last().map(|r| &r.state)
    }

    pub fn reports(&self) -> Vec<ObservableReport> {
        self.records.iter().map(|r| r.report).collect()
    }
}

/// Fixed-shift evolution; records step 0 and every `record_stride` steps
/// (plus the last step).
pub fn evolve(
    psi: &WaveFunction,
    system: &ParticleSystem,
    potential: &PotentialSpec,
    shift: &ShiftVelocity,
    params: &SolverParams,
) -> Result<Series> {
    let fixed = *shift;
    evolve_with_policy(psi, system, potential, params, |_| Ok(fixed))
}

/// Evolution with the shift chosen by `policy` from the current state before
/// every step (held constant during the step).
pub fn evolve_with_policy<F>(
    psi: &WaveFunction,
    system: &ParticleSystem,
    potential: &PotentialSpec,
    params: &SolverParams,
    mut policy: F,
) -> Result<Series>
where
    F: FnMut(&WaveFunction) -> Result<ShiftVelocity>,
{
    params.validate()?;
    let mut state = psi.clone();
    let mut shift = policy(&state)?;
    check_inputs(&state, system, &shift)?;
    let mut h = Hamiltonian::new(state.grid(), system, potential, &shift)?;
    let mut stepper = Stepper::new(&h, params.dt, params.backend, params.tolerance);
    let mut series = Series::default();
    series.records.push(Record {
        step: 0,
        report: ObservableReport::compute(&h, &state, system)?,
        state: state.clone(),
        shift,
    });
    let mut amps = state.amplitudes().to_vec();
    for step in 1..=params.steps {
        if step > 1 {
            let next = policy(&state)?;
            if next != shift {
                shift = next;
                h = h.with_shift(&shift)?;
                stepper = Stepper::new(&h, params.dt, params.backend, params.tolerance);
            }
        }
        warn_edge(&state, &shift);
        let stats = stepper.step(&mut amps)?;
        series.solver_iterations += stats.iterations;
        // accumulate time as a product so repeated runs agree bit for bit
        state = state.with_amplitudes(amps.clone(), psi.time() + step as f64 * params.dt);
        if step % params.record_stride == 0 || step == params.steps {
            series.records.push(Record {
                step,
                report: ObservableReport::compute(&h, &state, system)?,
                state: state.clone(),
                shift,
            });
        }
    }
    Ok(series)
}

/// `||U(dt)^(2n) psi - U(2 dt)^n psi||`, the composition defect of the
/// short-step update.
pub fn composition_defect(
    psi: &WaveFunction,
    system: &ParticleSystem,
    potential: &PotentialSpec,
    shift: &ShiftVelocity,
    params: &SolverParams,
) -> Result<f64> {
    let fine = SolverParams { steps: 2 * params.steps, record_stride: usize::MAX, ..*params };
    let coarse = SolverParams { dt: 2.0 * params.dt, record_stride: usize::MAX, ..*params };
    let a = evolve(psi, system, potential, shift, &fine)?;
    let b = evolve(psi, system, potential, shift, &coarse)?;
    a.final_state().expect("recorded").distance(b.final_state().expect("recorded"))
}

/// Phase-aligned distance `min_theta ||a - exp(i theta) b||`, computed without
/// the cancellation of `1 - |<a|b>|`.
pub fn aligned_distance(a: &WaveFunction, b: &WaveFunction) -> Result<f64> {
    let overlap = b.inner(a)?;
    let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { num_complex::Complex64::new(1.0, 0.0) };
    let sum: f64 = a
        .amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| (x - phase * y).norm_sqr())
        .sum();
    Ok((sum * a.grid().cell_volume()).sqrt())
}
