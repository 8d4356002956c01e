//! Symplectic form, information metric and complex structure on the
//! epistemic phase space, in the `(rho, phi)` chart and the wave-function
//! chart.
//!
//! Functional indices become grid points; every integral is a Riemann sum with
//! weight `h^D`. Tangent vectors in the wave-function chart use the layout
//! `(dpsi, i hbar conj(dpsi))`, with component matrices
//! `G = -i [[0, 1], [1, 0]]` and `Omega = [[0, 1], [-1, 0]]` on each fiber.

use nalgebra::Matrix2;
use num_complex::Complex64;

use crate::error::{EdError, Result};
use crate::grid::GridSpec;
use crate::state::{check_nodeless, inner_raw, EpistemicState, WaveFunction};
use crate::system::ParticleSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    RhoPhi,
    Psi,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TangentVector {
    RhoPhi { drho: Vec<f64>, dphi: Vec<f64> },
    /// `second` must equal `i hbar conj(dpsi)`.
    Psi { dpsi: Vec<Complex64>, second: Vec<Complex64> },
}

impl TangentVector {
    pub fn rho_phi(drho: Vec<f64>, dphi: Vec<f64>) -> Self {
        TangentVector::RhoPhi { drho, dphi }
    }

    /// Builds `(dpsi, i hbar conj(dpsi))`.
    pub fn psi(dpsi: Vec<Complex64>, hbar: f64) -> Self {
        let second = dpsi.iter().map(|z| Complex64::new(0.0, hbar) * z.conj()).collect();
        TangentVector::Psi { dpsi, second }
    }

    pub fn chart(&self) -> Chart {
        match self {
            TangentVector::RhoPhi { .. } => Chart::RhoPhi,
            TangentVector::Psi { .. } => Chart::Psi,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TangentVector::RhoPhi { drho, .. } => drho.len(),
            TangentVector::Psi { dpsi, .. } => dpsi.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest `|second - i hbar conj(first)|` of a wave-function chart vector.
    pub fn layout_defect(&self, hbar: f64) -> f64 {
        match self {
            TangentVector::RhoPhi { .. } => 0.0,
            TangentVector::Psi { dpsi, second } => dpsi
                .iter()
                .zip(second)
                .map(|(a, b)| (b - Complex64::new(0.0, hbar) * a.conj()).norm())
                .fold(0.0, f64::max),
        }
    }

    /// `integral(drho)`, zero for vectors tangent to the normalized simplex.
    pub fn density_change(&self, grid: &GridSpec) -> Option<f64> {
        match self {
            TangentVector::RhoPhi { drho, .. } => Some(grid.integrate(drho)),
            TangentVector::Psi { .. } => None,
        }
    }

    /// Components as complex pairs `(V^1, V^2)` per grid point.
    fn components(&self) -> (Vec<Complex64>, Vec<Complex64>) {
        match self {
            TangentVector::RhoPhi { drho, dphi } => (
                drho.iter().map(|&r| Complex64::new(r, 0.0)).collect(),
                dphi.iter().map(|&p| Complex64::new(p, 0.0)).collect(),
            ),
            TangentVector::Psi { dpsi, second } => (dpsi.clone(), second.clone()),
        }
    }
}

/// Base point and constants for geometric evaluations.
#[derive(Debug, Clone)]
pub struct GeometryContext {
    grid: GridSpec,
    hbar: f64,
    rho: Vec<f64>,
    phi: Vec<f64>,
}

impl GeometryContext {
    /// Refuses systems with `eta != hbar`: the metric is defined with `hbar`
    /// and the identities below assume the two agree.
    pub fn new(state: &EpistemicState, system: &ParticleSystem) -> Result<Self> {
        if system.eta() != system.hbar() {
            return Err(EdError::EtaMismatch { eta: system.eta(), hbar: system.hbar() });
        }
        check_nodeless(state.rho())?;
        Ok(Self {
            grid: state.grid().clone(),
            hbar: system.hbar(),
            rho: state.rho().to_vec(),
            phi: state.phi().to_vec(),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    fn check_pair(&self, v: &TangentVector, u: &TangentVector) -> Result<()> {
        if v.chart() != u.chart() {
            return Err(EdError::ChartMismatch);
        }
        self.check_one(v)?;
        self.check_one(u)
    }

    fn check_one(&self, v: &TangentVector) -> Result<()> {
        if v.len() != self.grid.len() {
            return Err(EdError::ChartMismatch);
        }
        Ok(())
    }

    /// `Omega(V, U) = integral (V^1 U^2 - V^2 U^1)`.
    pub fn symplectic_eval(&self, v: &TangentVector, u: &TangentVector) -> Result<f64> {
        self.check_pair(v, u)?;
        let (v1, v2) = v.components();
        let (u1, u2) = u.components();
        let sum: Complex64 = (0..v1.len()).map(|i| v1[i] * u2[i] - v2[i] * u1[i]).sum();
        Ok((sum * self.grid.cell_volume()).re)
    }

    /// `G(V, U)`: `integral [(hbar/2 rho) drho drho + (2 rho/hbar) dphi dphi]`
    /// in the `(rho, phi)` chart, `-i integral (V^1 U^2 + V^2 U^1)` in the
    /// wave-function chart.
    pub fn metric_eval(&self, v: &TangentVector, u: &TangentVector) -> Result<f64> {
        self.check_pair(v, u)?;
        let dv = self.grid.cell_volume();
        match (v, u) {
            (
                TangentVector::RhoPhi { drho: rv, dphi: pv },
                TangentVector::RhoPhi { drho: ru, dphi: pu },
            ) => {
                let h = self.hbar;
                let sum: f64 = (0..rv.len())
                    .map(|i| {
                        let r = self.rho[i];
                        h / (2.0 * r) * rv[i] * ru[i] + 2.0 * r / h * pv[i] * pu[i]
                    })
                    .sum();
                Ok(sum * dv)
            }
            _ => {
                let (v1, v2) = v.components();
                let (u1, u2) = u.components();
                let sum: Complex64 = (0..v1.len()).map(|i| v1[i] * u2[i] + v2[i] * u1[i]).sum();
                Ok((Complex64::new(0.0, -1.0) * sum * dv).re)
            }
        }
    }

    /// `J V`: `(-(2 rho/hbar) dphi, (hbar/2 rho) drho)`, or multiplication of
    /// `dpsi` by `i` in the wave-function chart.
    pub fn complex_structure_apply(&self, v: &TangentVector) -> Result<TangentVector> {
        self.check_one(v)?;
        let h = self.hbar;
        Ok(match v {
            TangentVector::RhoPhi { drho, dphi } => TangentVector::RhoPhi {
                drho: dphi.iter().zip(&self.rho).map(|(p, r)| -2.0 * r / h * p).collect(),
                dphi: drho.iter().zip(&self.rho).map(|(d, r)| h / (2.0 * r) * d).collect(),
            },
            TangentVector::Psi { dpsi, second } => TangentVector::Psi {
                dpsi: dpsi.iter().map(|z| Complex64::new(0.0, 1.0) * z).collect(),
                second: second.iter().map(|z| Complex64::new(0.0, -1.0) * z).collect(),
            },
        })
    }

    /// `dpsi = (drho / 2 rho^(1/2) + i rho^(1/2) dphi / hbar) exp(i phi / hbar)`.
    pub fn to_psi_chart(&self, v: &TangentVector) -> Result<TangentVector> {
        self.check_one(v)?;
        match v {
            TangentVector::Psi { .. } => Ok(v.clone()),
            TangentVector::RhoPhi { drho, dphi } => {
                let h = self.hbar;
                let dpsi = (0..drho.len())
                    .map(|i| {
                        let s = self.rho[i].sqrt();
                        Complex64::new(drho[i] / (2.0 * s), s * dphi[i] / h)
                            * Complex64::from_polar(1.0, self.phi[i] / h)
                    })
                    .collect();
                Ok(TangentVector::psi(dpsi, h))
            }
        }
    }

    /// Inverse of [`Self::to_psi_chart`].
    pub fn to_rho_phi_chart(&self, v: &TangentVector) -> Result<TangentVector> {
        self.check_one(v)?;
        match v {
            TangentVector::RhoPhi { .. } => Ok(v.clone()),
            TangentVector::Psi { dpsi, .. } => {
                let h = self.hbar;
                let mut drho = Vec::with_capacity(dpsi.len());
                let mut dphi = Vec::with_capacity(dpsi.len());
                for i in 0..dpsi.len() {
                    let s = self.rho[i].sqrt();
                    let w = dpsi[i] * Complex64::from_polar(1.0, -self.phi[i] / h);
                    drho.push(2.0 * s * w.re);
                    dphi.push(h * w.im / s);
                }
                Ok(TangentVector::RhoPhi { drho, dphi })
            }
        }
    }

    /// `2 hbar integral |dpsi|^2`.
    pub fn psi_norm_metric(&self, v: &TangentVector) -> Result<f64> {
        match self.to_psi_chart(v)? {
            TangentVector::Psi { dpsi, .. } => {
                Ok(2.0 * self.hbar * self.grid.cell_volume() * dpsi.iter().map(|z| z.norm_sqr()).sum::<f64>())
            }
            TangentVector::RhoPhi { .. } => unreachable!(),
        }
    }

    /// Pointwise fiber blocks `(G, Omega, J)` of the `(rho, phi)` chart at a
    /// grid point. The lattice factor `h^D` is common to `G` and `Omega` and
    /// dropped.
    pub fn fiber_blocks(&self, idx: usize) -> (Matrix2<f64>, Matrix2<f64>, Matrix2<f64>) {
        let r = self.rho[idx];
        let h = self.hbar;
        let g = Matrix2::new(h / (2.0 * r), 0.0, 0.0, 2.0 * r / h);
        let omega = Matrix2::new(0.0, 1.0, -1.0, 0.0);
        let j = Matrix2::new(0.0, -2.0 * r / h, h / (2.0 * r), 0.0);
        (g, omega, j)
    }

    /// Largest entry of `J + G^-1 Omega` over all fiber blocks, both charts.
    pub fn compatibility_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for idx in 0..self.grid.len() {
            let (g, omega, j) = self.fiber_blocks(idx);
            let ginv = g.try_inverse().expect("metric block is positive definite");
            worst = worst.max((j + ginv * omega).amax());
        }
        // wave-function chart blocks are constant
        let i = Complex64::new(0.0, 1.0);
        let zero = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let g = Matrix2::new(zero, -i, -i, zero);
        let omega = Matrix2::new(zero, one, -one, zero);
        let j = Matrix2::new(i, zero, zero, -i);
        let ginv = g.try_inverse().expect("invertible");
        let defect = (j + ginv * omega).iter().map(|z| z.norm()).fold(0.0, f64::max);
        worst.max(defect)
    }
}

/// `<psi|chi> = integral conj(psi) chi`.
pub fn inner_product(psi: &WaveFunction, chi: &WaveFunction) -> Result<Complex64> {
    psi.inner(chi)
}

/// `(1/2 hbar)(G + i Omega)[Psi, X]` with `Psi = (psi, i hbar conj(psi))` and
/// `X = (chi, i hbar conj(chi))`, evaluated from the component matrices.
pub fn assembled_inner_product(psi: &WaveFunction, chi: &WaveFunction, hbar: f64) -> Result<Complex64> {
    if psi.grid() != chi.grid() {
        return Err(EdError::GridMismatch);
    }
    let dv = psi.grid().cell_volume();
    let ih = Complex64::new(0.0, hbar);
    let mut g = Complex64::new(0.0, 0.0);
    let mut omega = Complex64::new(0.0, 0.0);
    for (p, c) in psi.amplitudes().iter().zip(chi.amplitudes()) {
        let (v1, v2) = (*p, ih * p.conj());
        let (u1, u2) = (*c, ih * c.conj());
        g += Complex64::new(0.0, -1.0) * (v1 * u2 + v2 * u1);
        omega += v1 * u2 - v2 * u1;
    }
    let (g, omega) = (g.re * dv, omega.re * dv);
    Ok(Complex64::new(g, omega) / (2.0 * hbar))
}

/// `|assembled - direct|` for one pair of states.
pub fn inner_product_identity_defect(psi: &WaveFunction, chi: &WaveFunction, hbar: f64) -> Result<f64> {
    let direct = inner_raw(psi.grid(), psi.amplitudes(), chi.amplitudes());
    Ok((assembled_inner_product(psi, chi, hbar)? - direct).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::wf_to_epistemic;

    fn context() -> GeometryContext {
        let g = GridSpec::uniform(1, 1, 32, 6.0).unwrap();
        let psi = WaveFunction::from_fn(&g, 0.0, |x| {
            Complex64::new(1.2 + (x[0]).sin(), 0.0) * Complex64::from_polar(1.0, 0.5 * (2.0 * x[0]).cos())
        })
        .unwrap();
        let st = wf_to_epistemic(&psi, 1.0).unwrap();
        GeometryContext::new(&st, &ParticleSystem::unit(1)).unwrap()
    }

    #[test]
    fn constant_phase_shift_metric() {
        let ctx = context();
        let c = 0.7;
        let v = TangentVector::rho_phi(vec![0.0; 32], vec![c; 32]);
        assert!((ctx.metric_eval(&v, &v).unwrap() - 2.0 * c * c).abs() < 1e-12);
    }

    #[test]
    fn symplectic_quadrature() {
        let ctx = context();
        let g = ctx.grid().clone();
        let f: Vec<f64> = g.axis_coordinates(0).iter().map(|x| (x * 0.3).cos()).collect();
        let v = TangentVector::rho_phi(f.clone(), vec![0.0; 32]);
        let u = TangentVector::rho_phi(vec![0.0; 32], vec![1.0; 32]);
        assert!((ctx.symplectic_eval(&v, &u).unwrap() - g.integrate(&f)).abs() < 1e-13);
        assert!(ctx.symplectic_eval(&v, &v).unwrap().abs() < 1e-15);
    }

    #[test]
    fn chart_mismatch() {
        let ctx = context();
        let v = TangentVector::rho_phi(vec![0.0; 32], vec![0.0; 32]);
        let u = TangentVector::psi(vec![Complex64::new(0.0, 0.0); 32], 1.0);
        assert_eq!(ctx.symplectic_eval(&v, &u), Err(EdError::ChartMismatch));
    }

    #[test]
    fn eta_mismatch_is_refused() {
        let g = GridSpec::uniform(1, 1, 16, 4.0).unwrap();
        let st = EpistemicState::new(g, vec![0.25; 16], vec![0.0; 16], 0.0).unwrap();
        let sys = ParticleSystem::with_eta(vec![1.0], 1.0, 0.5).unwrap();
        assert!(matches!(GeometryContext::new(&st, &sys), Err(EdError::EtaMismatch { .. })));
    }

    #[test]
    fn compatibility() {
        assert!(context().compatibility_defect() < 1e-12);
    }
}
