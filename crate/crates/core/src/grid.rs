//! Uniform periodic tensor grids over configuration space.
//!
//! Configuration axes are ordered particle-major: axis `A = n * d + a` holds
//! component `a` of particle `n`. Data is stored row-major, the last axis
//! varying fastest. Each axis spans `[-L/2, L/2)` so the coordinate origin sits
//! at grid index `points / 2`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{EdError, Result};

/// Largest configuration dimension `N * d` a dense grid may have.
pub const MAX_CONFIG_DIM: usize = 4;
/// Fewest points allowed on any axis.
pub const MIN_POINTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    spatial_dim: usize,
    particle_count: usize,
    points: Vec<usize>,
    lengths: Vec<f64>,
}

impl GridSpec {
    pub fn new(
        spatial_dim: usize,
        particle_count: usize,
        points: Vec<usize>,
        lengths: Vec<f64>,
    ) -> Result<Self> {
        if !(1..=3).contains(&spatial_dim) {
            return Err(EdError::InvalidGrid(format!(
                "spatial dimension must be 1, 2 or 3, got {spatial_dim}"
            )));
        }
        if particle_count == 0 {
            return Err(EdError::InvalidGrid("particle count must be at least 1".into()));
        }
        let dim = spatial_dim * particle_count;
        if dim > MAX_CONFIG_DIM {
            return Err(EdError::InvalidGrid(format!(
                "configuration dimension {dim} exceeds the dense-grid cap {MAX_CONFIG_DIM}"
            )));
        }
        if points.len() != dim || lengths.len() != dim {
            return Err(EdError::InvalidGrid(format!(
                "expected {dim} axes, got {} point counts and {} lengths",
                points.len(),
                lengths.len()
            )));
        }
        if let Some(&n) = points.iter().find(|&&n| n < MIN_POINTS) {
            return Err(EdError::InvalidGrid(format!(
                "every axis needs at least {MIN_POINTS} points, got {n}"
            )));
        }
        if let Some(&l) = lengths.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
            return Err(EdError::InvalidGrid(format!("axis length must be positive, got {l}")));
        }
        Ok(Self { spatial_dim, particle_count, points, lengths })
    }

    /// Same point count and length on every configuration axis.
    pub fn uniform(spatial_dim: usize, particle_count: usize, points: usize, length: f64) -> Result<Self> {
        let dim = spatial_dim * particle_count;
        Self::new(spatial_dim, particle_count, vec![points; dim], vec![length; dim])
    }

    pub fn spatial_dim(&self) -> usize {
        self.spatial_dim
    }

    pub fn particle_count(&self) -> usize {
        self.particle_count
    }

    /// Configuration dimension `D = N * d`.
    pub fn config_dim(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.points[axis] as f64
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.config_dim()).map(|a| self.spacing(a)).fold(f64::INFINITY, f64::min)
    }

    /// Quadrature weight `h^D` of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        (0..self.config_dim()).map(|a| self.spacing(a)).product()
    }

    /// Configuration axis holding component `component` of particle `particle`.
    pub fn axis_of(&self, particle: usize, component: usize) -> usize {
        particle * self.spatial_dim + component
    }

    /// Row-major stride of an axis.
    pub fn stride(&self, axis: usize) -> usize {
        self.points[axis + 1..].iter().product()
    }

    /// Index along `axis` of the flat grid index `idx`.
    #[inline]
    pub fn axis_index(&self, idx: usize, axis: usize) -> usize {
        (idx / self.stride(axis)) % self.points[axis]
    }

    pub fn unravel(&self, mut idx: usize) -> [usize; MAX_CONFIG_DIM] {
        let mut out = [0; MAX_CONFIG_DIM];
        for axis in (0..self.config_dim()).rev() {
            out[axis] = idx % self.points[axis];
            idx /= self.points[axis];
        }
        out
    }

    pub fn ravel(&self, index: &[usize]) -> usize {
        index
            .iter()
            .zip(&self.points)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    /// Coordinate of point `i` on `axis`.
    #[inline]
    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        -0.5 * self.lengths[axis] + i as f64 * self.spacing(axis)
    }

    /// All coordinates along one axis.
    pub fn axis_coordinates(&self, axis: usize) -> Vec<f64> {
        (0..self.points[axis]).map(|i| self.coordinate(axis, i)).collect()
    }

    /// Coordinates of a flat grid index.
    pub fn point(&self, idx: usize) -> [f64; MAX_CONFIG_DIM] {
        let index = self.unravel(idx);
        let mut out = [0.0; MAX_CONFIG_DIM];
        for axis in 0..self.config_dim() {
            out[axis] = self.coordinate(axis, index[axis]);
        }
        out
    }

    /// Angular wavenumber of FFT bin `j` on `axis`, in standard FFT order.
    ///
    /// The Nyquist bin of an even axis carries `-pi/h`; the same table is used
    /// by every operator so the discrete momentum stays Hermitian and
    /// consistent across backends.
    pub fn wavenumber(&self, axis: usize, j: usize) -> f64 {
        let n = self.points[axis];
        let signed = if j < (n + 1) / 2 { j as i64 } else { j as i64 - n as i64 };
        2.0 * PI * signed as f64 / self.lengths[axis]
    }

    pub fn wavenumbers(&self, axis: usize) -> Vec<f64> {
        (0..self.points[axis]).map(|j| self.wavenumber(axis, j)).collect()
    }

    /// Wraps a coordinate periodically into `[-L/2, L/2)`.
    pub fn wrap(&self, axis: usize, x: f64) -> f64 {
        let l = self.lengths[axis];
        let shifted = (x + 0.5 * l).rem_euclid(l);
        // rem_euclid can return l itself for tiny negative inputs
        if shifted >= l { -0.5 * l } else { shifted - 0.5 * l }
    }

    /// Minimum-image difference along an axis.
    pub fn min_image(&self, axis: usize, dx: f64) -> f64 {
        let l = self.lengths[axis];
        dx - l * (dx / l).round()
    }

    /// Riemann sum `h^D * sum f`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.cell_volume() * values.iter().sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_oversized_and_coarse_grids() {
        assert!(GridSpec::uniform(3, 2, 8, 1.0).is_err());
        assert!(GridSpec::uniform(1, 1, 4, 1.0).is_err());
        assert!(GridSpec::uniform(1, 1, 16, 0.0).is_err());
        assert!(GridSpec::uniform(0, 1, 16, 1.0).is_err());
        assert!(GridSpec::uniform(2, 2, 8, 1.0).is_ok());
    }

    #[test]
    fn origin_is_on_the_grid() {
        let g = GridSpec::uniform(1, 1, 16, 8.0).unwrap();
        assert_eq!(g.coordinate(0, 8), 0.0);
        assert_eq!(g.coordinate(0, 0), -4.0);
        assert_eq!(g.spacing(0), 0.5);
    }

    #[test]
    fn ravel_unravel_are_inverse() {
        let g = GridSpec::new(2, 1, vec![8, 12], vec![1.0, 2.0]).unwrap();
        for idx in 0..g.len() {
            let u = g.unravel(idx);
            assert_eq!(g.ravel(&u[..2]), idx);
            assert_eq!(g.axis_index(idx, 0), u[0]);
            assert_eq!(g.axis_index(idx, 1), u[1]);
        }
    }

    #[test]
    fn wavenumbers_follow_fft_order() {
        let g = GridSpec::uniform(1, 1, 8, 2.0 * PI).unwrap();
        let k: Vec<f64> = g.wavenumbers(0);
        assert_eq!(k, vec![0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0]);
    }

    #[test]
    fn wrap_stays_in_box() {
        let g = GridSpec::uniform(1, 1, 8, 2.0).unwrap();
        assert!((g.wrap(0, 1.5) + 0.5).abs() < 1e-15);
        assert!((g.wrap(0, -1.25) - 0.75).abs() < 1e-15);
        assert_eq!(g.wrap(0, 1.0), -1.0);
        assert!((g.min_image(0, 1.8) + 0.2).abs() < 1e-15);
    }
}
