//! Crank–Nicolson propagator `(1 + i tau H) psi' = (1 - i tau H) psi`,
//! `tau = dt / 2 hbar`, solved matrix-free by restarted GMRES with the
//! Fourier-diagonal kinetic factor `(1 + i tau K)^-1` as right preconditioner.
//!
//! The Cayley transform is unitary and a function of `H`, so norm and `<H>`
//! are conserved to solver tolerance and eigenstates stay stationary.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{EdError, Result};
use crate::hamiltonian::Hamiltonian;

const RESTART: usize = 40;
const MAX_RESTARTS: usize = 50;

pub struct CrankNicolson {
    hamiltonian: Hamiltonian,
    tau: f64,
    tolerance: f64,
    /// `(1 + i tau K)^-1` on the Fourier grid.
    preconditioner: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

impl CrankNicolson {
    pub fn new(hamiltonian: &Hamiltonian, dt: f64, tolerance: f64) -> Self {
        let tau = dt / (2.0 * hamiltonian.hbar());
        let preconditioner = hamiltonian
            .translated_kinetic_diagonal()
            .par_iter()
            .map(|k| Complex64::new(1.0, tau * k).inv())
            .collect();
        Self { hamiltonian: hamiltonian.clone(), tau, tolerance, preconditioner }
    }

    fn apply_a(&self, x: &[Complex64], sign: f64) -> Vec<Complex64> {
        let hx = self.hamiltonian.apply(x);
        let c = Complex64::new(0.0, sign * self.tau);
        x.par_iter().zip(hx.par_iter()).map(|(a, b)| a + c * b).collect()
    }

    fn precondition(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut out = x.to_vec();
        self.hamiltonian.spectral().apply_fourier_diagonal(&mut out, &self.preconditioner);
        out
    }

    pub fn step(&self, psi: &mut [Complex64]) -> Result<SolveStats> {
        let rhs = self.apply_a(psi, -1.0);
        let guess = self.precondition(&rhs);
        let (x, stats) = self.gmres(&rhs, guess)?;
        psi.copy_from_slice(&x);
        Ok(stats)
    }

    /// Right-preconditioned restarted GMRES for `A x = b`, `A = 1 + i tau H`.
    fn gmres(&self, b: &[Complex64], mut x: Vec<Complex64>) -> Result<(Vec<Complex64>, SolveStats)> {
        let bnorm = norm(b);
        if bnorm == 0.0 {
            return Ok((vec![Complex64::new(0.0, 0.0); b.len()], SolveStats::default()));
        }
        let mut iterations = 0;
        for _ in 0..MAX_RESTARTS {
            let ax = self.apply_a(&x, 1.0);
            let r: Vec<Complex64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
            let beta = norm(&r);
            let residual = beta / bnorm;
            if residual <= self.tolerance {
                return Ok((x, SolveStats { iterations, residual }));
            }
            let mut basis: Vec<Vec<Complex64>> = vec![r.iter().map(|v| v / beta).collect()];
            let mut hess: Vec<Vec<Complex64>> = Vec::new();
            let mut cs: Vec<f64> = Vec::new();
            let mut sn: Vec<Complex64> = Vec::new();
            let mut g = vec![Complex64::new(beta, 0.0)];
            let mut k_used = 0;
            for j in 0..RESTART {
                iterations += 1;
                let z = self.precondition(&basis[j]);
                let mut w = self.apply_a(&z, 1.0);
                let mut col = vec![Complex64::new(0.0, 0.0); j + 2];
                for (i, v) in basis.iter().enumerate() {
                    let hij = dot(v, &w);
                    col[i] = hij;
                    w.par_iter_mut().zip(v.par_iter()).for_each(|(wi, vi)| *wi -= hij * vi);
                }
                let hnext = norm(&w);
                col[j + 1] = Complex64::new(hnext, 0.0);
                for i in 0..j {
                    let (c, s) = (cs[i], sn[i]);
                    let t = c * col[i] + s * col[i + 1];
                    col[i + 1] = -s.conj() * col[i] + c * col[i + 1];
                    col[i] = t;
                }
                let (c, s) = givens(col[j], col[j + 1]);
                col[j] = c * col[j] + s * col[j + 1];
                col[j + 1] = Complex64::new(0.0, 0.0);
                cs.push(c);
                sn.push(s);
                g.push(-s.conj() * g[j]);
                g[j] *= c;
                hess.push(col);
                k_used = j + 1;
                if g[j + 1].norm() / bnorm <= self.tolerance || hnext == 0.0 {
                    break;
                }
                basis.push(w.iter().map(|v| v / hnext).collect());
            }
            // back substitution on the triangular system
            let mut y = vec![Complex64::new(0.0, 0.0); k_used];
            for i in (0..k_used).rev() {
                let mut acc = g[i];
                for (jj, yj) in y.iter().enumerate().skip(i + 1) {
                    acc -= hess[jj][i] * yj;
                }
                y[i] = acc / hess[i][i];
            }
            let mut update = vec![Complex64::new(0.0, 0.0); b.len()];
            for (yi, v) in y.iter().zip(&basis) {
                update.par_iter_mut().zip(v.par_iter()).for_each(|(u, vi)| *u += yi * vi);
            }
            let dx = self.precondition(&update);
            x.par_iter_mut().zip(dx.par_iter()).for_each(|(xi, di)| *xi += di);
        }
        let ax = self.apply_a(&x, 1.0);
        let r: Vec<Complex64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let residual = norm(&r) / bnorm;
        if residual <= self.tolerance {
            Ok((x, SolveStats { iterations, residual }))
        } else {
            Err(EdError::SolverDivergence { iterations, residual })
        }
    }
}

/// Complex Givens rotation zeroing `b` in `(a, b)`.
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    let an = a.norm();
    let bn = b.norm();
    if bn == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    if an == 0.0 {
        return (0.0, b.conj() / bn);
    }
    let rho = an.hypot(bn);
    let c = an / rho;
    let s = (a / an) * b.conj() / rho;
    (c, s)
}

/// `sum conj(a) b`, sequential for reproducibility.
fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
