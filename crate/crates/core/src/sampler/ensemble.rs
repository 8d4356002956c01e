use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EdError, Result};
use crate::shift::ShiftVelocity;
use crate::state::WaveFunction;
use crate::system::ParticleSystem;

use super::drift::DriftField;

/// Runs whose drift was clamped in more than this fraction of chain steps are
/// flagged.
pub const MAX_CLAMP_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerOptions {
    pub chains: usize,
    pub seed: u64,
    /// Record positions every `record_stride` steps (the first and last
    /// instants are always recorded).
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    /// Overrides the diffusion constant of the fluctuations (negative
    /// controls only).
    #[serde(default)]
    pub noise_eta: Option<f64>,
}

fn default_stride() -> usize {
    1
}

impl SamplerOptions {
    pub fn new(chains: usize, seed: u64) -> Self {
        Self { chains, seed, record_stride: 1, noise_eta: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(EdError::InvalidParameter("chains must be at least 1".into()));
        }
        if self.record_stride == 0 {
            return Err(EdError::InvalidParameter("record_stride must be at least 1".into()));
        }
        if let Some(e) = self.noise_eta {
            if !(e > 0.0 && e.is_finite()) {
                return Err(EdError::InvalidParameter(format!("noise_eta must be positive, got {e}")));
            }
        }
        Ok(())
    }
}

/// One Euler–Maruyama step
/// `dx^A = dt m^AB d_B varphi - dt xi_dot^A + dw^A`, `<dw dw> = eta dt m^AB`.
/// Positions are wrapped into the box. Returns `false` if the drift had to be
/// clamped at a near-node position.
pub fn sample_step<R: Rng + ?Sized>(
    x: &mut [f64],
    field: &DriftField,
    shift: &ShiftVelocity,
    dt: f64,
    rng: &mut R,
) -> bool {
    let g = field.grid();
    let dim = g.config_dim();
    let d = g.spatial_dim();
    let mut drift = [0.0; 4];
    let ok = field.eval(x, &mut drift);
    let mut xi = [0.0; 4];
    if !shift.is_zero() {
        for (n, chunk) in x[..dim].chunks(d).enumerate() {
            let v = shift.velocity_at(chunk);
            xi[n * d..(n + 1) * d].copy_from_slice(&v[..d]);
        }
    }
    let eta = field.eta();
    for a in 0..dim {
        let z: f64 = rng.sample(StandardNormal);
        let sigma = (eta * dt / field.axis_masses()[a]).sqrt();
        x[a] = g.wrap(a, x[a] + dt * (drift[a] - xi[a]) + sigma * z);
    }
    ok
}

/// Inverse-CDF sampler for a gridded density: axis by axis from the
/// conditional marginals, then uniformly within the chosen cell.
struct DensitySampler {
    /// Per axis, cumulative sums within each row of the prefix marginal.
    cumulative: Vec<Vec<f64>>,
}

impl DensitySampler {
    fn new(psi: &WaveFunction) -> Self {
        let g = psi.grid();
        let dim = g.config_dim();
        let mut marginals = vec![psi.density()];
        for a in (1..dim).rev() {
            let n = g.points()[a];
            let next: Vec<f64> = marginals[0].chunks(n).map(|row| row.iter().sum()).collect();
            marginals.insert(0, next);
        }
        let cumulative = marginals
            .into_iter()
            .enumerate()
            .map(|(a, m)| {
                let n = g.points()[a];
                let mut out = Vec::with_capacity(m.len());
                for row in m.chunks(n) {
                    let mut acc = 0.0;
                    for v in row {
                        acc += v;
                        out.push(acc);
                    }
                }
                out
            })
            .collect();
        Self { cumulative }
    }

    fn draw<R: Rng + ?Sized>(&self, psi: &WaveFunction, rng: &mut R) -> Vec<f64> {
        let g = psi.grid();
        let mut prefix = 0usize;
        let mut x = Vec::with_capacity(g.config_dim());
        for (a, cum) in self.cumulative.iter().enumerate() {
            let n = g.points()[a];
            let row = &cum[prefix * n..(prefix + 1) * n];
            let target = rng.random::<f64>() * row[n - 1];
            let j = row.partition_point(|&c| c <= target).min(n - 1);
            let jitter: f64 = rng.random::<f64>() - 0.5;
            x.push(g.wrap(a, g.coordinate(a, j) + jitter * g.spacing(a)));
            prefix = prefix * n + j;
        }
        x
    }
}

/// Draws one configuration from `|psi|^2`.
pub fn draw_initial<R: Rng + ?Sized>(psi: &WaveFunction, rng: &mut R) -> Vec<f64> {
    DensitySampler::new(psi).draw(psi, rng)
}

/// Sampled ontic paths, recorded at a subset of instants.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    pub chains: usize,
    /// Configuration dimension `D`.
    pub dim: usize,
    pub seed: u64,
    /// ChaCha stream of each chain (the chain index).
    pub streams: Vec<u64>,
    /// Step of the first interval.
    pub dt: f64,
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    /// Chain-major positions (`chains * dim`) at each recorded instant.
    pub positions: Vec<Vec<f64>>,
    pub clamps: u64,
    pub chain_steps: u64,
}

impl TrajectoryEnsemble {
    pub fn final_positions(&self) -> &[f64] {
        self.positions.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn clamp_fraction(&self) -> f64 {
        if self.chain_steps == 0 { 0.0 } else { self.clamps as f64 / self.chain_steps as f64 }
    }

    pub fn flagged(&self) -> bool {
        self.clamp_fraction() > MAX_CLAMP_FRACTION
    }

    pub fn check_clamps(&self) -> Result<()> {
        if self.flagged() {
            Err(EdError::DriftClamped { clamps: self.clamps, steps: self.chain_steps })
        } else {
            Ok(())
        }
    }

    /// Mean configuration at a recorded instant (plain average, no
    /// minimum-image correction).
    pub fn mean(&self, instant: usize) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for c in self.positions[instant].chunks(self.dim) {
            m.iter_mut().zip(c).for_each(|(a, b)| *a += b);
        }
        m.iter_mut().for_each(|a| *a /= self.chains as f64);
        m
    }
}

/// Samples `chains` paths against a state series recorded at every sampler
/// step: initial positions from `|psi_0|^2`, then one kernel step per
/// interval using the state at its start. Every chain owns a ChaCha8 stream
/// keyed by its index, so results do not depend on the thread count.
pub fn sample_ensemble(
    states: &[WaveFunction],
    system: &ParticleSystem,
    shift: &ShiftVelocity,
    options: &SamplerOptions,
) -> Result<TrajectoryEnsemble> {
    options.validate()?;
    let first = states.first().ok_or_else(|| EdError::InvalidParameter("empty state series".into()))?;
    let g = first.grid();
    shift.check_grid(g)?;
    system.check_particles(g.particle_count())?;
    if states.iter().any(|s| s.grid() != g) {
        return Err(EdError::GridMismatch);
    }
    if states.windows(2).any(|w| !(w[1].time() > w[0].time())) {
        return Err(EdError::InvalidParameter("state series must have increasing time stamps".into()));
    }
    let dim = g.config_dim();
    let chains = options.chains;
    let streams: Vec<u64> = (0..chains as u64).collect();
    let mut rngs: Vec<ChaCha8Rng> = streams
        .iter()
        .map(|&s| {
            let mut r = ChaCha8Rng::seed_from_u64(options.seed);
            r.set_stream(s);
            r
        })
        .collect();
    let initial = DensitySampler::new(first);
    let mut x = vec![0.0; chains * dim];
    x.par_chunks_mut(dim).zip(rngs.par_iter_mut()).for_each(|(c, r)| {
        c.copy_from_slice(&initial.draw(first, r));
    });
    let mut steps = vec![0];
    let mut times = vec![first.time()];
    let mut positions = vec![x.clone()];
    let mut clamps = 0u64;
    let intervals = states.len() - 1;
    for k in 0..intervals {
        let dt = states[k + 1].time() - states[k].time();
        let mut field = DriftField::new(&states[k], system)?;
        if let Some(e) = options.noise_eta {
            field = field.with_noise_eta(e);
        }
        clamps += x
            .par_chunks_mut(dim)
            .zip(rngs.par_iter_mut())
            .map(|(c, r)| u64::from(!sample_step(c, &field, shift, dt, r)))
            .sum::<u64>();
        if (k + 1) % options.record_stride == 0 || k + 1 == intervals {
            steps.push(k + 1);
            times.push(states[k + 1].time());
            positions.push(x.clone());
        }
    }
    let dt = if intervals > 0 { states[1].time() - states[0].time() } else { 0.0 };
    Ok(TrajectoryEnsemble {
        chains,
        dim,
        seed: options.seed,
        streams,
        dt,
        steps,
        times,
        positions,
        clamps,
        chain_steps: (chains * intervals) as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::state::gaussian_packet;

    #[test]
    fn initial_draw_matches_moments() {
        let g = GridSpec::uniform(2, 1, 128, 32.0).unwrap();
        let sys = ParticleSystem::unit(1);
        let psi = gaussian_packet(&g, &sys, &[vec![0.5, -0.5]], &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        let s = DensitySampler::new(&psi);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 40_000;
        let draws: Vec<Vec<f64>> = (0..n).map(|_| s.draw(&psi, &mut rng)).collect();
        let mean = |a: usize| draws.iter().map(|d| d[a]).sum::<f64>() / n as f64;
        let var = |a: usize, m: f64| draws.iter().map(|d| (d[a] - m).powi(2)).sum::<f64>() / n as f64;
        let (m0, m1) = (mean(0), mean(1));
        assert!((m0 - 0.5).abs() < 4.0 / (n as f64).sqrt());
        assert!((m1 + 0.5).abs() < 4.0 / (n as f64).sqrt());
        // cell jitter adds h^2 / 12
        let h2 = g.spacing(0).powi(2) / 12.0;
        assert!((var(0, m0) - 1.0 - h2).abs() < 5.0 * (2.0 / n as f64).sqrt());
        assert!((var(1, m1) - 1.0 - h2).abs() < 5.0 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn streams_are_keyed_by_chain() {
        let stream = |s: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(3);
            r.set_stream(s);
            r.random::<u64>()
        };
        assert_eq!(stream(5), stream(5));
        assert_ne!(stream(5), stream(4));
    }
}
