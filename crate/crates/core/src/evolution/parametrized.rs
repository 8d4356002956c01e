//! Evolution in an arbitrary label time `x0` with entropic time
//! `t(x0) = integral beta dx0` set by a lapse function `beta`.

use serde::{Deserialize, Serialize};

use crate::error::{EdError, Result};
use crate::hamiltonian::Hamiltonian;
use crate::observables::ObservableReport;
use crate::potential::PotentialSpec;
use crate::shift::ShiftVelocity;
use crate::state::WaveFunction;
use crate::system::ParticleSystem;

use super::{Backend, Stepper};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LapseKind {
    Constant { beta: f64 },
    /// `base + amplitude sin(frequency x0 + phase)`.
    Sinusoidal { base: f64, amplitude: f64, frequency: f64, phase: f64 },
    /// Piecewise-linear interpolation through `(labels, values)`.
    Tabulated { labels: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LapseProfile {
    pub start: f64,
    pub end: f64,
    #[serde(flatten)]
    pub kind: LapseKind,
}

impl LapseProfile {
    pub fn constant(start: f64, end: f64, beta: f64) -> Self {
        Self { start, end, kind: LapseKind::Constant { beta } }
    }

    pub fn sinusoidal(start: f64, end: f64, base: f64, amplitude: f64, frequency: f64, phase: f64) -> Self {
        Self { start, end, kind: LapseKind::Sinusoidal { base, amplitude, frequency, phase } }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.end.is_finite() && self.end > self.start) {
            return Err(EdError::InvalidParameter(format!(
                "label domain [{}, {}] is empty",
                self.start, self.end
            )));
        }
        match &self.kind {
            LapseKind::Constant { beta } => {
                if !beta.is_finite() {
                    return Err(EdError::InvalidParameter("lapse must be finite".into()));
                }
                if *beta < 0.0 {
                    return Err(EdError::NegativeLapse { label: self.start, value: *beta });
                }
            }
            LapseKind::Sinusoidal { base, amplitude, frequency, phase } => {
                if ![base, amplitude, frequency, phase].iter().all(|v| v.is_finite()) {
                    return Err(EdError::InvalidParameter("lapse parameters must be finite".into()));
                }
                if base - amplitude.abs() < 0.0 {
                    let samples = 100_000;
                    for i in 0..=samples {
                        let x = self.start + (self.end - self.start) * i as f64 / samples as f64;
                        let v = self.value(x);
                        if v < 0.0 {
                            return Err(EdError::NegativeLapse { label: x, value: v });
                        }
                    }
                }
            }
            LapseKind::Tabulated { labels, values } => {
                if labels.len() < 2 || labels.len() != values.len() {
                    return Err(EdError::InvalidParameter(
                        "tabulated lapse needs matching labels and values (at least two)".into(),
                    ));
                }
                if labels.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(EdError::InvalidParameter("tabulated labels must increase".into()));
                }
                if labels[0] > self.start || labels[labels.len() - 1] < self.end {
                    return Err(EdError::InvalidParameter("table does not cover the label domain".into()));
                }
                if let Some((x, v)) = labels.iter().zip(values).find(|(_, v)| !(**v >= 0.0)) {
                    return Err(EdError::NegativeLapse { label: *x, value: *v });
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, x: f64) -> f64 {
        match &self.kind {
            LapseKind::Constant { beta } => *beta,
            LapseKind::Sinusoidal { base, amplitude, frequency, phase } => {
                base + amplitude * (frequency * x + phase).sin()
            }
            LapseKind::Tabulated { labels, values } => {
                let j = labels.partition_point(|&l| l <= x).clamp(1, labels.len() - 1);
                let (x0, x1) = (labels[j - 1], labels[j]);
                let w = (x - x0) / (x1 - x0);
                values[j - 1] + w * (values[j] - values[j - 1])
            }
        }
    }

    /// Exact `integral_a^b beta dx0`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        match &self.kind {
            LapseKind::Constant { beta } => beta * (b - a),
            LapseKind::Sinusoidal { base, amplitude, frequency, phase } => {
                let anti = |x: f64| {
                    if *frequency == 0.0 {
                        amplitude * phase.sin() * x
                    } else {
                        -amplitude / frequency * (frequency * x + phase).cos()
                    }
                };
                base * (b - a) + anti(b) - anti(a)
            }
            LapseKind::Tabulated { labels, .. } => {
                let mut knots = vec![a];
                knots.extend(labels.iter().copied().filter(|&l| l > a && l < b));
                knots.push(b);
                knots.windows(2).map(|w| 0.5 * (self.value(w[0]) + self.value(w[1])) * (w[1] - w[0])).sum()
            }
        }
    }

    /// Total entropic duration `integral beta` over the label domain.
    pub fn duration(&self) -> f64 {
        self.integral(self.start, self.end)
    }

    /// Entropic step of label interval `k` out of `steps`.
    pub fn step_duration(&self, k: usize, steps: usize) -> f64 {
        let dx = (self.end - self.start) / steps as f64;
        match &self.kind {
            LapseKind::Constant { beta } => beta * dx,
            _ => {
                let a = self.start + k as f64 * dx;
                let b = if k + 1 == steps { self.end } else { self.start + (k + 1) as f64 * dx };
                self.integral(a, b)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParametrizedRun {
    pub final_state: WaveFunction,
    /// `(x0, t(x0))` at every label step.
    pub clock: Vec<(f64, f64)>,
    pub energies: Vec<f64>,
    /// Momentum conjugate to `t`, `pi_0 = -H(0)`.
    pub pi0: f64,
    /// `max |pi_0 + H(x0)|`.
    pub super_hamiltonian_residual: f64,
    pub reports: Vec<ObservableReport>,
}

/// Integrates over the label domain in `label_steps` equal label increments,
/// each advancing entropic time by the lapse integral over the increment.
#[allow(clippy::too_many_arguments)]
pub fn parametrized_evolve(
    psi: &WaveFunction,
    system: &ParticleSystem,
    potential: &PotentialSpec,
    shift: &ShiftVelocity,
    lapse: &LapseProfile,
    label_steps: usize,
    backend: Backend,
    tolerance: f64,
) -> Result<ParametrizedRun> {
    lapse.validate()?;
    if label_steps == 0 {
        return Err(EdError::InvalidParameter("at least one label step is required".into()));
    }
    super::check_inputs(psi, system, shift)?;
    let h = Hamiltonian::new(psi.grid(), system, potential, shift)?;
    let first = ObservableReport::compute(&h, psi, system)?;
    let pi0 = -first.energy;
    let mut reports = vec![first];
    let mut energies = vec![first.energy];
    let mut clock = vec![(lapse.start, psi.time())];
    let mut residual = 0.0f64;
    let mut amps = psi.amplitudes().to_vec();
    let mut time = psi.time();
    let mut cached: Option<(f64, Stepper)> = None;
    let dx = (lapse.end - lapse.start) / label_steps as f64;
    let mut state = psi.clone();
    for k in 0..label_steps {
        let dt = lapse.step_duration(k, label_steps);
        if dt > 0.0 {
            let reuse = matches!(&cached, Some((c, _)) if *c == dt);
            if !reuse {
                cached = Some((dt, Stepper::new(&h, dt, backend, tolerance)));
            }
            let (_, stepper) = cached.as_ref().expect("stepper");
            stepper.step(&mut amps)?;
        }
        time += dt;
        state = state.with_amplitudes(amps.clone(), time);
        let report = ObservableReport::compute(&h, &state, system)?;
        residual = residual.max((pi0 + report.energy).abs());
        energies.push(report.energy);
        reports.push(report);
        let label = if k + 1 == label_steps { lapse.end } else { lapse.start + (k + 1) as f64 * dx };
        clock.push((label, time));
    }
    Ok(ParametrizedRun {
        final_state: state,
        clock,
        energies,
        pi0,
        super_hamiltonian_residual: residual,
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinusoidal_integral_matches_quadrature() {
        let l = LapseProfile::sinusoidal(0.0, 3.0, 1.0, 0.5, 1.0, 0.0);
        let n = 200_000;
        let h = 3.0 / n as f64;
        let quad: f64 = (0..n).map(|i| l.value((i as f64 + 0.5) * h) * h).sum();
        assert!((quad - l.duration()).abs() < 1e-9);
    }

    #[test]
    fn step_durations_sum_to_duration() {
        let l = LapseProfile::sinusoidal(0.0, 2.0, 1.0, 0.5, 2.0, 0.3);
        let total: f64 = (0..37).map(|k| l.step_duration(k, 37)).sum();
        assert!((total - l.duration()).abs() < 1e-13);
    }

    #[test]
    fn negative_lapse_rejected() {
        let l = LapseProfile::sinusoidal(0.0, 6.0, 0.2, 0.5, 1.0, 0.0);
        assert!(matches!(l.validate(), Err(EdError::NegativeLapse { .. })));
        assert!(matches!(LapseProfile::constant(0.0, 1.0, -1.0).validate(), Err(EdError::NegativeLapse { .. })));
    }

    #[test]
    fn tabulated_integral_is_trapezoid() {
        let l = LapseProfile {
            start: 0.0,
            end: 2.0,
            kind: LapseKind::Tabulated { labels: vec![0.0, 1.0, 2.0], values: vec![1.0, 3.0, 1.0] },
        };
        assert!((l.duration() - 4.0).abs() < 1e-15);
        assert!((l.integral(0.5, 1.5) - 2.5).abs() < 1e-15);
    }
}
