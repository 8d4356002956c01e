//! Built-in potential families evaluated on the configuration grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EdError, Result};
use crate::grid::GridSpec;
use crate::system::ParticleSystem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum PotentialSpec {
    Free,
    /// `sum_{n<m} (k/2) |x_n - x_m|^2`.
    PairSpring { spring: f64 },
    /// `sum_{n<m} -depth exp(-|x_n - x_m|^2 / 2 width^2)`.
    PairGaussian { depth: f64, width: f64 },
    /// `sum_n (1/2) m_n omega^2 |x_n|^2`. Not relational.
    ExternalHarmonic { omega: f64 },
}

impl Default for PotentialSpec {
    fn default() -> Self {
        PotentialSpec::Free
    }
}

impl PotentialSpec {
    /// True when the potential depends only on interparticle distances.
    pub fn is_relational(&self) -> bool {
        !matches!(self, PotentialSpec::ExternalHarmonic { .. })
    }

    /// True for potentials invariant under global rotations about the origin.
    pub fn is_isotropic(&self) -> bool {
        true
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            PotentialSpec::Free => true,
            PotentialSpec::PairSpring { spring } => spring.is_finite() && spring >= 0.0,
            PotentialSpec::PairGaussian { depth, width } => depth.is_finite() && width > 0.0 && width.is_finite(),
            PotentialSpec::ExternalHarmonic { omega } => omega.is_finite() && omega >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(EdError::InvalidParameter(format!("invalid potential parameters {self:?}")))
        }
    }

    /// Potential at one configuration point. Pair separations use the minimum
    /// image of the periodic box.
    pub fn value_at(&self, grid: &GridSpec, system: &ParticleSystem, x: &[f64]) -> f64 {
        let d = grid.spatial_dim();
        let n = grid.particle_count();
        match *self {
            PotentialSpec::Free => 0.0,
            PotentialSpec::PairSpring { spring } => {
                pair_sum(grid, x, n, d, |r2| 0.5 * spring * r2)
            }
            PotentialSpec::PairGaussian { depth, width } => {
                pair_sum(grid, x, n, d, |r2| -depth * (-r2 / (2.0 * width * width)).exp())
            }
            PotentialSpec::ExternalHarmonic { omega } => (0..n)
                .map(|p| {
                    let r2: f64 = x[p * d..(p + 1) * d].iter().map(|v| v * v).sum();
                    0.5 * system.mass(p) * omega * omega * r2
                })
                .sum(),
        }
    }

    /// Potential sampled at every grid point.
    pub fn evaluate(&self, grid: &GridSpec, system: &ParticleSystem) -> Result<Vec<f64>> {
        self.validate()?;
        system.check_particles(grid.particle_count())?;
        let dim = grid.config_dim();
        Ok((0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let p = grid.point(idx);
                self.value_at(grid, system, &p[..dim])
            })
            .collect())
    }
}

fn pair_sum(grid: &GridSpec, x: &[f64], n: usize, d: usize, f: impl Fn(f64) -> f64) -> f64 {
    let mut total = 0.0;
    for p in 0..n {
        for q in p + 1..n {
            let r2: f64 = (0..d)
                .map(|a| {
                    let axis = grid.axis_of(p, a);
                    let dx = grid.min_image(axis, x[p * d + a] - x[q * d + a]);
                    dx * dx
                })
                .sum();
            total += f(r2);
        }
    }
    total
}
