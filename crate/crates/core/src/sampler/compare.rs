//! Histogram tests of sampled positions against `|psi|^2` and between two
//! samples.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{EdError, Result};
use crate::grid::GridSpec;
use crate::state::WaveFunction;

use super::ensemble::TrajectoryEnsemble;

/// Minimum expected count of every bin entering the statistics.
pub const MIN_EXPECTED_COUNT: f64 = 100.0;
/// Upper bound on the number of bins; coarser blocks are used until the
/// populated bins fit.
const MAX_BINS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityComparison {
    pub samples: usize,
    /// Grid points per bin along each axis.
    pub coarsening: usize,
    /// Bins used, including the pooled remainder bin.
    pub bins: usize,
    pub total_variation: f64,
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl DensityComparison {
    pub fn passes(&self, tv_bound: f64) -> bool {
        self.total_variation < tv_bound
    }
}

/// Fine-cell index of a configuration; cells are centered on grid points.
fn cell_of(grid: &GridSpec, x: &[f64], coarsening: usize) -> usize {
    let mut idx = 0;
    for (a, &xa) in x.iter().enumerate().take(grid.config_dim()) {
        let n = grid.points()[a];
        let s = (grid.wrap(a, xa) + 0.5 * grid.lengths()[a]) / grid.spacing(a);
        let j = (s.round() as usize) % n;
        idx = idx * (n / coarsening) + j / coarsening;
    }
    idx
}

fn coarsen(grid: &GridSpec, fine: &[f64], c: usize) -> Vec<f64> {
    let dim = grid.config_dim();
    let len: usize = grid.points().iter().map(|n| n / c).product();
    let mut out = vec![0.0; len];
    for (i, v) in fine.iter().enumerate() {
        let u = grid.unravel(i);
        let mut idx = 0;
        for a in 0..dim {
            idx = idx * (grid.points()[a] / c) + u[a] / c;
        }
        out[idx] += v;
    }
    out
}

fn coarsenings(grid: &GridSpec) -> Vec<usize> {
    let max = *grid.points().iter().min().expect("grid has axes");
    let mut c = 1;
    let mut out = Vec::new();
    while c <= max {
        if grid.points().iter().all(|n| n % c == 0) {
            out.push(c);
        }
        c *= 2;
    }
    out
}

/// Partitions bins into those with `weight >= threshold` (kept individually)
/// and a pooled remainder. Returns the bin label of every coarse bin.
fn partition(weights: &[f64], threshold: f64) -> (Vec<usize>, usize) {
    let mut labels = vec![usize::MAX; weights.len()];
    let mut kept = 0;
    for (i, w) in weights.iter().enumerate() {
        if *w >= threshold {
            labels[i] = kept;
            kept += 1;
        }
    }
    let rest: f64 = weights.iter().filter(|w| **w < threshold).sum();
    if rest >= threshold {
        labels.iter_mut().filter(|l| **l == usize::MAX).for_each(|l| *l = kept);
        return (labels, kept + 1);
    }
    // too light on its own: fold the remainder into the lightest kept bin
    let lightest = weights
        .iter()
        .enumerate()
        .filter(|(_, w)| **w >= threshold)
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| labels[i])
        .unwrap_or(0);
    labels.iter_mut().filter(|l| **l == usize::MAX).for_each(|l| *l = lightest);
    (labels, kept.max(1))
}

fn choose_bins(grid: &GridSpec, fine: &[f64], threshold: f64) -> Result<(usize, Vec<usize>, usize)> {
    let mut best = None;
    for c in coarsenings(grid) {
        let coarse = coarsen(grid, fine, c);
        let populated = coarse.iter().filter(|w| **w >= threshold).count();
        best = Some((c, populated));
        if populated <= MAX_BINS {
            break;
        }
    }
    let (c, populated) = best.expect("at least one coarsening");
    if populated < 2 {
        return Err(EdError::UndersampledBins { populated, min_count: MIN_EXPECTED_COUNT });
    }
    let coarse = coarsen(grid, fine, c);
    let (labels, bins) = partition(&coarse, threshold);
    Ok((c, labels, bins))
}

fn histogram(grid: &GridSpec, positions: &[f64], c: usize, labels: &[usize], bins: usize) -> Vec<f64> {
    let mut counts = vec![0.0; bins];
    for x in positions.chunks(grid.config_dim()) {
        counts[labels[cell_of(grid, x, c)]] += 1.0;
    }
    counts
}

fn chi_square_sf(stat: f64, dof: usize) -> f64 {
    ChiSquared::new(dof as f64).map(|d| d.sf(stat)).unwrap_or(f64::NAN)
}

/// Compares chain-major positions with `|psi|^2`.
pub fn compare_positions(positions: &[f64], psi: &WaveFunction) -> Result<DensityComparison> {
    let g = psi.grid();
    let dim = g.config_dim();
    if positions.is_empty() || positions.len() % dim != 0 {
        return Err(EdError::DimensionError(format!("positions do not hold {dim}-dimensional configurations")));
    }
    let n = positions.len() / dim;
    let rho = psi.density();
    let total: f64 = rho.iter().sum();
    let fine: Vec<f64> = rho.iter().map(|r| n as f64 * r / total).collect();
    let (c, labels, bins) = choose_bins(g, &fine, MIN_EXPECTED_COUNT)?;
    let mut expected = vec![0.0; bins];
    for (w, l) in coarsen(g, &fine, c).iter().zip(&labels) {
        expected[*l] += w;
    }
    let observed = histogram(g, positions, c, &labels, bins);
    let total_variation =
        0.5 * observed.iter().zip(&expected).map(|(o, e)| (o - e).abs()).sum::<f64>() / n as f64;
    let chi_square: f64 = observed.iter().zip(&expected).map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = bins - 1;
    Ok(DensityComparison {
        samples: n,
        coarsening: c,
        bins,
        total_variation,
        chi_square,
        dof,
        p_value: chi_square_sf(chi_square, dof),
    })
}

/// Final ensemble positions against `|psi_T|^2`.
pub fn ensemble_density_compare(ensemble: &TrajectoryEnsemble, psi: &WaveFunction) -> Result<DensityComparison> {
    let t = ensemble.times.last().copied().unwrap_or(f64::NAN);
    if (t - psi.time()).abs() > 1e-9 * t.abs().max(1.0) {
        return Err(EdError::InvalidParameter(format!(
            "ensemble ends at t = {t} but the state is at t = {}",
            psi.time()
        )));
    }
    compare_positions(ensemble.final_positions(), psi)
}

/// Two-sample chi-square test between position sets on the grid's cells,
/// binned so that the pooled counts reach the minimum in every bin.
pub fn two_sample_compare(a: &[f64], b: &[f64], grid: &GridSpec) -> Result<DensityComparison> {
    let dim = grid.config_dim();
    let (na, nb) = (a.len() / dim, b.len() / dim);
    if na == 0 || nb == 0 {
        return Err(EdError::InvalidParameter("both samples must be non-empty".into()));
    }
    let mut pooled = vec![0.0; grid.len()];
    for x in a.chunks(dim).chain(b.chunks(dim)) {
        pooled[cell_of(grid, x, 1)] += 1.0;
    }
    let (c, labels, bins) = choose_bins(grid, &pooled, 2.0 * MIN_EXPECTED_COUNT)?;
    let ha = histogram(grid, a, c, &labels, bins);
    let hb = histogram(grid, b, c, &labels, bins);
    let (fa, fb) = (na as f64, nb as f64);
    let (k1, k2) = ((fb / fa).sqrt(), (fa / fb).sqrt());
    let chi_square: f64 = ha.iter().zip(&hb).map(|(x, y)| (k1 * x - k2 * y).powi(2) / (x + y)).sum();
    let total_variation = 0.5 * ha.iter().zip(&hb).map(|(x, y)| (x / fa - y / fb).abs()).sum::<f64>();
    let dof = bins - 1;
    Ok(DensityComparison {
        samples: na + nb,
        coarsening: c,
        bins,
        total_variation,
        chi_square,
        dof,
        p_value: chi_square_sf(chi_square, dof),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn remainder_is_pooled() {
        let (labels, bins) = partition(&[50.0, 200.0, 300.0, 60.0], 100.0);
        assert_eq!(bins, 3);
        assert_eq!(labels, vec![2, 0, 1, 2]);
        let (labels, bins) = partition(&[10.0, 200.0, 300.0], 100.0);
        assert_eq!(bins, 2);
        assert_eq!(labels, vec![0, 0, 1]);
    }

    #[test]
    fn cells_are_centered_on_points() {
        let g = GridSpec::uniform(1, 1, 16, 8.0).unwrap();
        assert_eq!(cell_of(&g, &[-4.0], 1), 0);
        assert_eq!(cell_of(&g, &[-3.76], 1), 0);
        assert_eq!(cell_of(&g, &[-3.74], 1), 1);
        assert_eq!(cell_of(&g, &[3.9], 1), 0);
        assert_eq!(cell_of(&g, &[0.1], 2), 4);
    }
}
