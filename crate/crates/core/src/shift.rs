//! Rigid shift velocities `(lambda_dot, zeta_dot)` and the configuration-space
//! field `xi_dot^A(x) = (zeta_dot x x_n)^a + lambda_dot^a` they generate.

use serde::{Deserialize, Serialize};

use crate::error::{EdError, Result};
use crate::grid::GridSpec;
use crate::spectral::Spectral;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftVelocity {
    spatial_dim: usize,
    lambda_dot: [f64; 3],
    zeta_dot: [f64; 3],
}

impl ShiftVelocity {
    pub fn zero(spatial_dim: usize) -> Self {
        Self { spatial_dim, lambda_dot: [0.0; 3], zeta_dot: [0.0; 3] }
    }

    /// General constructor. `zeta_dot` is embedded in three dimensions: a
    /// planar system only accepts a `z` component, a line accepts none.
    pub fn new(spatial_dim: usize, lambda_dot: &[f64], zeta_dot: [f64; 3]) -> Result<Self> {
        if !(1..=3).contains(&spatial_dim) {
            return Err(EdError::DimensionError(format!("spatial dimension {spatial_dim}")));
        }
        if lambda_dot.len() != spatial_dim {
            return Err(EdError::DimensionError(format!(
                "lambda_dot has {} components for spatial dimension {spatial_dim}",
                lambda_dot.len()
            )));
        }
        let forbidden = match spatial_dim {
            1 => &zeta_dot[..],
            2 => &zeta_dot[..2],
            _ => &[][..],
        };
        if forbidden.iter().any(|&z| z != 0.0) {
            return Err(EdError::DimensionError(format!(
                "zeta_dot {zeta_dot:?} has components outside the rotation group of a {spatial_dim}D system"
            )));
        }
        if lambda_dot.iter().chain(&zeta_dot).any(|v| !v.is_finite()) {
            return Err(EdError::InvalidParameter("shift velocity must be finite".into()));
        }
        let mut lam = [0.0; 3];
        lam[..spatial_dim].copy_from_slice(lambda_dot);
        Ok(Self { spatial_dim, lambda_dot: lam, zeta_dot })
    }

    pub fn translation(lambda_dot: &[f64]) -> Result<Self> {
        Self::new(lambda_dot.len(), lambda_dot, [0.0; 3])
    }

    /// Two-dimensional shift with angular velocity `omega` about `z`.
    pub fn planar(lambda_dot: [f64; 2], omega: f64) -> Self {
        Self { spatial_dim: 2, lambda_dot: [lambda_dot[0], lambda_dot[1], 0.0], zeta_dot: [0.0, 0.0, omega] }
    }

    pub fn spatial_dim(&self) -> usize {
        self.spatial_dim
    }

    /// Translation rate, `spatial_dim` components.
    pub fn lambda_dot(&self) -> &[f64] {
        &self.lambda_dot[..self.spatial_dim]
    }

    /// Angular velocity embedded in three dimensions.
    pub fn zeta_dot(&self) -> [f64; 3] {
        self.zeta_dot
    }

    pub fn lambda_dot3(&self) -> [f64; 3] {
        self.lambda_dot
    }

    pub fn is_rotating(&self) -> bool {
        self.zeta_dot.iter().any(|&z| z != 0.0)
    }

    pub fn is_zero(&self) -> bool {
        !self.is_rotating() && self.lambda_dot.iter().all(|&l| l == 0.0)
    }

    pub fn with_lambda(self, lambda_dot: &[f64]) -> Result<Self> {
        Self::new(self.spatial_dim, lambda_dot, self.zeta_dot)
    }

    pub fn with_zeta(self, zeta_dot: [f64; 3]) -> Result<Self> {
        Self::new(self.spatial_dim, self.lambda_dot(), zeta_dot)
    }

    /// Velocity of the rigid motion at a single-particle position (with
    /// `spatial_dim` components).
    pub fn velocity_at(&self, position: &[f64]) -> [f64; 3] {
        let mut x = [0.0; 3];
        x[..position.len()].copy_from_slice(position);
        let z = self.zeta_dot;
        let cross = [z[1] * x[2] - z[2] * x[1], z[2] * x[0] - z[0] * x[2], z[0] * x[1] - z[1] * x[0]];
        [
            cross[0] + self.lambda_dot[0],
            cross[1] + self.lambda_dot[1],
            cross[2] + self.lambda_dot[2],
        ]
    }

    /// `xi_dot^A` at a configuration point (all `D` coordinates).
    pub fn config_velocity(&self, config: &[f64]) -> Vec<f64> {
        let d = self.spatial_dim;
        config
            .chunks(d)
            .flat_map(|x| {
                let v = self.velocity_at(x);
                v.into_iter().take(d)
            })
            .collect()
    }

    /// `xi_dot^A(x)` sampled on the grid, one field per configuration axis.
    pub fn config_field(&self, grid: &GridSpec) -> Result<Vec<Vec<f64>>> {
        self.check_grid(grid)?;
        let dim = grid.config_dim();
        let mut fields = vec![vec![0.0; grid.len()]; dim];
        for idx in 0..grid.len() {
            let p = grid.point(idx);
            let v = self.config_velocity(&p[..dim]);
            for (a, field) in fields.iter_mut().enumerate() {
                field[idx] = v[a];
            }
        }
        Ok(fields)
    }

    pub fn check_grid(&self, grid: &GridSpec) -> Result<()> {
        if grid.spatial_dim() != self.spatial_dim {
            return Err(EdError::DimensionError(format!(
                "shift is {}D but the grid is {}D",
                self.spatial_dim,
                grid.spatial_dim()
            )));
        }
        Ok(())
    }

    /// Rigidity diagnostics of the generated field: the largest spectral
    /// divergence and the largest symmetrized gradient
    /// `d_a xi_b + d_b xi_a` (central differences on interior points, exact for
    /// the linear field).
    pub fn rigidity_defect(&self, grid: &GridSpec) -> Result<(f64, f64)> {
        let fields = self.config_field(grid)?;
        let spectral = Spectral::new(grid);
        let dim = grid.config_dim();
        let mut divergence = vec![0.0; grid.len()];
        for (a, field) in fields.iter().enumerate() {
            let d = spectral.derivative_real(field, a);
            divergence.iter_mut().zip(&d).for_each(|(acc, v)| *acc += v);
        }
        let max_div = divergence.iter().fold(0.0f64, |m, v| m.max(v.abs()));

        let d = grid.spatial_dim();
        let mut max_sym = 0.0f64;
        for idx in 0..grid.len() {
            let index = grid.unravel(idx);
            let interior = (0..dim).all(|a| index[a] > 0 && index[a] + 1 < grid.points()[a]);
            if !interior {
                continue;
            }
            let grad = |field: usize, axis: usize| {
                let s = grid.stride(axis);
                (fields[field][idx + s] - fields[field][idx - s]) / (2.0 * grid.spacing(axis))
            };
            for n in 0..grid.particle_count() {
                for a in 0..d {
                    for b in 0..d {
                        let (ia, ib) = (grid.axis_of(n, a), grid.axis_of(n, b));
                        max_sym = max_sym.max((grad(ib, ia) + grad(ia, ib)).abs());
                    }
                }
            }
        }
        Ok((max_div, max_sym))
    }
}
