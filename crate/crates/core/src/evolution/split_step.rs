//! Strang-split propagator: kinetic / angular / scalar / angular / kinetic.
//!
//! The kinetic factor carries the translation term `-lambda_dot . P` and is
//! diagonal in Fourier space. The angular factor `exp(i zeta_dot . L dt/2hbar)`
//! is a rigid rotation of every particle's coordinates. It is applied exactly
//! as a product of planar rotations, each of which is three Fourier shears
//! along alternating axes (every shear is diagonal in a mixed
//! position/momentum representation).

use num_complex::Complex64;
use rayon::prelude::*;

use crate::hamiltonian::Hamiltonian;

/// Planar rotation of the point map `(x_p, x_q) -> R(theta) (x_p, x_q)`.
#[derive(Debug, Clone, Copy)]
struct PlaneRotation {
    p: usize,
    q: usize,
    theta: f64,
}

pub struct SplitStep {
    hamiltonian: Hamiltonian,
    kinetic_half: Vec<Complex64>,
    scalar_full: Vec<Complex64>,
    rotations: Vec<PlaneRotation>,
}

impl SplitStep {
    pub fn new(hamiltonian: &Hamiltonian, dt: f64) -> Self {
        let hbar = hamiltonian.hbar();
        let kinetic_half = hamiltonian
            .translated_kinetic_diagonal()
            .par_iter()
            .map(|k| Complex64::from_polar(1.0, -k * dt / (2.0 * hbar)))
            .collect();
        let scalar_full = hamiltonian
            .scalar_field()
            .par_iter()
            .map(|w| Complex64::from_polar(1.0, -w * dt / hbar))
            .collect();
        let rotations = rotation_plan(hamiltonian, 0.5 * dt);
        Self { hamiltonian: hamiltonian.clone(), kinetic_half, scalar_full, rotations }
    }

    pub fn step(&self, psi: &mut [Complex64]) {
        let spectral = self.hamiltonian.spectral();
        spectral.apply_fourier_diagonal(psi, &self.kinetic_half);
        self.rotate(psi);
        psi.par_iter_mut().zip(self.scalar_full.par_iter()).for_each(|(v, w)| *v *= w);
        self.rotate(psi);
        spectral.apply_fourier_diagonal(psi, &self.kinetic_half);
    }

    fn rotate(&self, psi: &mut [Complex64]) {
        for r in &self.rotations {
            planar_rotation(&self.hamiltonian, psi, r.p, r.q, r.theta);
        }
    }
}

/// Planar rotations realising `exp(i tau zeta_dot . L / hbar)`, which maps
/// `psi(x) -> psi(M x)` with `M` the rotation by `|zeta_dot| tau` about
/// `zeta_dot`, applied to every particle.
fn rotation_plan(h: &Hamiltonian, tau: f64) -> Vec<PlaneRotation> {
    let shift = h.shift();
    if !shift.is_rotating() {
        return Vec::new();
    }
    let grid = h.grid();
    let d = grid.spatial_dim();
    let z = shift.zeta_dot();
    let mut plan = Vec::new();
    for n in 0..grid.particle_count() {
        let ax = |a: usize| grid.axis_of(n, a);
        if d == 2 {
            plan.push(PlaneRotation { p: ax(0), q: ax(1), theta: z[2] * tau });
            continue;
        }
        let m = axis_angle_matrix(z, tau);
        // psi(Rz(a) Ry(b) Rz(c) x) is reached by applying the factors a, b, c in turn
        let (a, b, c) = zyz_angles(&m);
        for (p, q, theta) in [(0, 1, a), (2, 0, b), (0, 1, c)] {
            if theta != 0.0 {
                plan.push(PlaneRotation { p: ax(p), q: ax(q), theta });
            }
        }
    }
    plan
}

/// Rotation matrix by angle `|omega| tau` about `omega` (Rodrigues).
fn axis_angle_matrix(omega: [f64; 3], tau: f64) -> [[f64; 3]; 3] {
    let norm = omega.iter().map(|w| w * w).sum::<f64>().sqrt();
    let angle = norm * tau;
    let n = omega.map(|w| w / norm);
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    [
        [c + n[0] * n[0] * t, n[0] * n[1] * t - n[2] * s, n[0] * n[2] * t + n[1] * s],
        [n[1] * n[0] * t + n[2] * s, c + n[1] * n[1] * t, n[1] * n[2] * t - n[0] * s],
        [n[2] * n[0] * t - n[1] * s, n[2] * n[1] * t + n[0] * s, c + n[2] * n[2] * t],
    ]
}

/// Angles with `m = Rz(a) Ry(b) Rz(c)`.
fn zyz_angles(m: &[[f64; 3]; 3]) -> (f64, f64, f64) {
    let sb = (m[2][0] * m[2][0] + m[2][1] * m[2][1]).sqrt();
    let b = sb.atan2(m[2][2]);
    if sb > 1e-12 {
        (m[1][2].atan2(m[0][2]), b, m[2][1].atan2(-m[2][0]))
    } else if m[2][2] > 0.0 {
        (m[1][0].atan2(m[0][0]), 0.0, 0.0)
    } else {
        ((-m[1][0]).atan2(-m[0][0]), b, 0.0)
    }
}

/// `psi(x) -> psi(x')` where `(x'_p, x'_q) = R(theta) (x_p, x_q)`, via
/// `R(theta) = S_p(a) S_q(b) S_p(a)` with `a = -tan(theta/2)`,
/// `b = sin(theta)` and `S_p(a): x_p -> x_p + a x_q`.
fn planar_rotation(h: &Hamiltonian, psi: &mut [Complex64], p: usize, q: usize, theta: f64) {
    if theta == 0.0 {
        return;
    }
    let a = -(0.5 * theta).tan();
    let b = theta.sin();
    shear(h, psi, p, q, a);
    shear(h, psi, q, p, b);
    shear(h, psi, p, q, a);
}

/// `psi(..., x_p, ...) -> psi(..., x_p + s x_q, ...)`: a per-line translation
/// along `p`, i.e. multiplication of the line spectrum by `exp(i k_p s x_q)`.
fn shear(h: &Hamiltonian, psi: &mut [Complex64], p: usize, q: usize, s: f64) {
    let spectral = h.spectral();
    let grid = h.grid();
    let k = spectral.wavenumbers(p);
    let sq = grid.stride(q);
    let nq = grid.points()[q];
    spectral.transform_lines(psi, p, |base, line| {
        let xq = grid.coordinate(q, (base / sq) % nq);
        let offset = s * xq;
        for (v, &kj) in line.iter_mut().zip(k) {
            *v *= Complex64::from_polar(1.0, kj * offset);
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        out
    }

    fn rz(t: f64) -> [[f64; 3]; 3] {
        let (s, c) = t.sin_cos();
        [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
    }

    fn ry(t: f64) -> [[f64; 3]; 3] {
        let (s, c) = t.sin_cos();
        [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
    }

    #[test]
    fn zyz_reconstructs_rotation() {
        for omega in [[0.3, -0.2, 0.9], [1.0, 0.0, 0.0], [0.0, 0.0, 2.0], [0.0, 1.0, 0.0]] {
            let m = axis_angle_matrix(omega, 0.37);
            let (a, b, c) = zyz_angles(&m);
            let r = mat_mul(&mat_mul(&rz(a), &ry(b)), &rz(c));
            for i in 0..3 {
                for j in 0..3 {
                    assert!((r[i][j] - m[i][j]).abs() < 1e-14, "{omega:?}");
                }
            }
        }
    }
}
