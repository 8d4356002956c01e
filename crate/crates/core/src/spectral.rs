//! Per-axis discrete Fourier machinery on a [`GridSpec`].
//!
//! Every transform works line by line along one configuration axis: lines are
//! gathered into a contiguous buffer, transformed in parallel chunks and
//! scattered back. All operations are pointwise or per line, so results do not
//! depend on the thread count.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::grid::GridSpec;

const LINES_PER_TASK: usize = 64;

pub struct Spectral {
    grid: GridSpec,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    wavenumbers: Vec<Vec<f64>>,
}

impl Spectral {
    pub fn new(grid: &GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let dim = grid.config_dim();
        let forward = (0..dim).map(|a| planner.plan_fft_forward(grid.points()[a])).collect();
        let inverse = (0..dim).map(|a| planner.plan_fft_inverse(grid.points()[a])).collect();
        let wavenumbers = (0..dim).map(|a| grid.wavenumbers(a)).collect();
        Self { grid: grid.clone(), forward, inverse, wavenumbers }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.wavenumbers[axis]
    }

    fn layout(&self, axis: usize) -> (usize, usize) {
        let n = self.grid.points()[axis];
        (n, self.grid.stride(axis))
    }

    /// Flat index of the first point of line `line` along `axis`.
    #[inline]
    fn line_base(n: usize, inner: usize, line: usize) -> usize {
        let outer = line / inner;
        let i = line % inner;
        outer * n * inner + i
    }

    fn gather(&self, data: &[Complex64], axis: usize) -> Vec<Complex64> {
        let (n, inner) = self.layout(axis);
        if inner == 1 {
            return data.to_vec();
        }
        let mut lines = vec![Complex64::new(0.0, 0.0); data.len()];
        lines.par_chunks_mut(n).enumerate().for_each(|(line, buf)| {
            let base = Self::line_base(n, inner, line);
            for (j, v) in buf.iter_mut().enumerate() {
                *v = data[base + j * inner];
            }
        });
        lines
    }

    fn scatter(&self, lines: Vec<Complex64>, data: &mut [Complex64], axis: usize) {
        let (n, inner) = self.layout(axis);
        if inner == 1 {
            data.copy_from_slice(&lines);
            return;
        }
        data.par_iter_mut().enumerate().for_each(|(idx, v)| {
            let outer = idx / (n * inner);
            let rem = idx % (n * inner);
            let j = rem / inner;
            let i = rem % inner;
            *v = lines[(outer * inner + i) * n + j];
        });
    }

    /// In-place transform along one axis. The inverse is normalized by `1/n`.
    pub fn fft_axis(&self, data: &mut [Complex64], axis: usize, inverse: bool) {
        let (n, _) = self.layout(axis);
        let plan = if inverse { &self.inverse[axis] } else { &self.forward[axis] };
        let mut lines = self.gather(data, axis);
        let scale = 1.0 / n as f64;
        lines.par_chunks_mut(n * LINES_PER_TASK).for_each(|chunk| {
            plan.process(chunk);
            if inverse {
                chunk.iter_mut().for_each(|v| *v *= scale);
            }
        });
        self.scatter(lines, data, axis);
    }

    /// Forward transform over every axis.
    pub fn forward_all(&self, data: &mut [Complex64]) {
        for axis in 0..self.grid.config_dim() {
            self.fft_axis(data, axis, false);
        }
    }

    /// Normalized inverse transform over every axis.
    pub fn inverse_all(&self, data: &mut [Complex64]) {
        for axis in (0..self.grid.config_dim()).rev() {
            self.fft_axis(data, axis, true);
        }
    }

    /// Transforms along `axis`, lets `f(line_base, spectrum)` act on each
    /// line's spectrum (FFT order) and transforms back.
    pub fn transform_lines<F>(&self, data: &mut [Complex64], axis: usize, f: F)
    where
        F: Fn(usize, &mut [Complex64]) + Sync,
    {
        let (n, inner) = self.layout(axis);
        let fwd = &self.forward[axis];
        let inv = &self.inverse[axis];
        let mut lines = self.gather(data, axis);
        let scale = 1.0 / n as f64;
        lines
            .par_chunks_mut(n * LINES_PER_TASK)
            .enumerate()
            .for_each(|(chunk_id, chunk)| {
                fwd.process(chunk);
                for (local, line) in chunk.chunks_mut(n).enumerate() {
                    let base = Self::line_base(n, inner, chunk_id * LINES_PER_TASK + local);
                    f(base, line);
                }
                inv.process(chunk);
                chunk.iter_mut().for_each(|v| *v *= scale);
            });
        self.scatter(lines, data, axis);
    }

    /// Spectral first derivative along one axis.
    pub fn derivative(&self, data: &[Complex64], axis: usize) -> Vec<Complex64> {
        let mut out = data.to_vec();
        let k = &self.wavenumbers[axis];
        self.transform_lines(&mut out, axis, |_, line| {
            for (v, &kj) in line.iter_mut().zip(k) {
                *v *= Complex64::new(0.0, kj);
            }
        });
        out
    }

    /// Spectral first derivative of a real field.
    pub fn derivative_real(&self, data: &[f64], axis: usize) -> Vec<f64> {
        let complex: Vec<Complex64> = data.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.derivative(&complex, axis).into_iter().map(|z| z.re).collect()
    }

    /// Multiplies by a diagonal in the full D-dimensional Fourier space,
    /// `mult[idx]` indexed like the grid with FFT-ordered bins per axis.
    pub fn apply_fourier_diagonal(&self, data: &mut [Complex64], mult: &[Complex64]) {
        self.forward_all(data);
        data.par_iter_mut().zip(mult.par_iter()).for_each(|(v, m)| *v *= m);
        self.inverse_all(data);
    }

    /// `sum_A c_A k_A^2` for every full-grid Fourier bin.
    pub fn weighted_k_squared(&self, weights: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        (0..g.len())
            .into_par_iter()
            .map(|idx| {
                let index = g.unravel(idx);
                (0..g.config_dim())
                    .map(|a| weights[a] * self.wavenumbers[a][index[a]].powi(2))
                    .sum()
            })
            .collect()
    }
}
