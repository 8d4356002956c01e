//! Acceptance suite: thirteen criteria, one PASS/FAIL line each.
//!
//! Runs under a plain `main` (no libtest harness) so the summary lines are
//! always printed. Pass criterion numbers as arguments to run a subset.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use edlab::best_match::{
    best_match_rotation, best_match_translation, constraint_check, galilean_boost, numerical_best_match,
    SearchDomain,
};
use edlab::evolution::{
    continuity_residual, evolve, parametrized_evolve, Backend, LapseProfile, SolverParams, Stepper,
};
use edlab::geometry::{assembled_inner_product, GeometryContext, TangentVector};
use edlab::hamiltonian::Hamiltonian;
use edlab::io::config::PolicyKind;
use edlab::io::run::policy_shift;
use edlab::sampler::{
    ensemble_density_compare, maxent_transition_oracle, sample_ensemble, sample_step, DriftField, MaxEntProblem,
    SamplerOptions, TrajectoryEnsemble,
};
use edlab::state::{
    gaussian_packet, periodic_packet, random_smooth_state, vortex_state, wf_to_epistemic,
};
use edlab::{Complex64, EdError, GridSpec, ParticleSystem, PotentialSpec, ShiftVelocity, WaveFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

struct Verdict {
    passed: bool,
    detail: String,
}

/// Collects named sub-checks of one criterion.
#[derive(Default)]
struct Checks {
    failed: Vec<String>,
    notes: Vec<String>,
}

impl Checks {
    fn below(&mut self, name: &str, value: f64, bound: f64) {
        self.record(name, value < bound, format!("{name} {value:.3e} < {bound:.0e}"));
    }

    fn within(&mut self, name: &str, value: f64, lo: f64, hi: f64) {
        self.record(name, (lo..=hi).contains(&value), format!("{name} {value:.4} in [{lo}, {hi}]"));
    }

    fn holds(&mut self, name: &str, ok: bool) {
        self.record(name, ok, name.to_string());
    }

    fn record(&mut self, name: &str, ok: bool, note: String) {
        if !ok {
            self.failed.push(name.to_string());
        }
        self.notes.push(note);
    }

    fn verdict(self) -> Verdict {
        let mut detail = self.notes.join("; ");
        if !self.failed.is_empty() {
            detail = format!("failed: {} | {detail}", self.failed.join(", "));
        }
        Verdict { passed: self.failed.is_empty(), detail }
    }
}

// ---------------------------------------------------------------- oracles

fn dv(g: &GridSpec) -> f64 {
    g.lengths().iter().zip(g.points()).map(|(l, n)| l / *n as f64).product()
}

fn coords(g: &GridSpec, idx: usize) -> Vec<f64> {
    // row-major, last axis fastest, cell-centered at -L/2 + i h
    let dim = g.points().len();
    let mut rest = idx;
    let mut x = vec![0.0; dim];
    for a in (0..dim).rev() {
        let n = g.points()[a];
        let i = rest % n;
        rest /= n;
        let h = g.lengths()[a] / n as f64;
        x[a] = -g.lengths()[a] / 2.0 + i as f64 * h;
    }
    x
}

fn norm_sq(g: &GridSpec, amps: &[Complex64]) -> f64 {
    amps.iter().map(|z| z.norm_sqr()).sum::<f64>() * dv(g)
}

fn overlap(g: &GridSpec, a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>() * dv(g)
}

/// Phase-aligned distance `min_theta ||a - e^{i theta} b||`.
fn aligned(g: &GridSpec, a: &[Complex64], b: &[Complex64]) -> f64 {
    let o = overlap(g, b, a);
    let phase = if o.norm() > 0.0 { o / o.norm() } else { Complex64::new(1.0, 0.0) };
    (a.iter().zip(b).map(|(x, y)| (x - phase * y).norm_sqr()).sum::<f64>() * dv(g)).sqrt()
}

fn infidelity(g: &GridSpec, a: &[Complex64], b: &[Complex64]) -> f64 {
    // 1 - |<a|b>|^2 = d^2 (1 - d^2/4) for the aligned distance d
    let d = aligned(g, a, b);
    d * d * (1.0 - d * d / 4.0)
}

/// Mass-weighted center `sum_n m_n <x_n> / M` along each spatial axis.
fn center_of_mass(psi: &WaveFunction, masses: &[f64]) -> Vec<f64> {
    let g = psi.grid();
    let d = g.spatial_dim();
    let total: f64 = masses.iter().sum();
    let mut c = vec![0.0; d];
    for (idx, z) in psi.amplitudes().iter().enumerate() {
        let x = coords(g, idx);
        let rho = z.norm_sqr() * dv(g);
        for (n, m) in masses.iter().enumerate() {
            for a in 0..d {
                c[a] += rho * m * x[n * d + a] / total;
            }
        }
    }
    c
}

/// Total momentum `sum_k hbar k |psi_k|^2` from a full multi-dimensional DFT.
fn momentum_oracle(psi: &WaveFunction, hbar: f64) -> Vec<f64> {
    let g = psi.grid();
    let dims = g.points().to_vec();
    let mut data = psi.amplitudes().to_vec();
    let mut planner = FftPlanner::new();
    let total = data.len();
    let mut inner = 1;
    for a in (0..dims.len()).rev() {
        let n = dims[a];
        let fft = planner.plan_fft_forward(n);
        let outer = total / (n * inner);
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for o in 0..outer {
            for i in 0..inner {
                let base = o * n * inner + i;
                for j in 0..n {
                    line[j] = data[base + j * inner];
                }
                fft.process(&mut line);
                for j in 0..n {
                    data[base + j * inner] = line[j];
                }
            }
        }
        inner *= n;
    }
    let wavenumber = |a: usize, j: usize| {
        let n = dims[a] as i64;
        let m = if (j as i64) < (n + 1) / 2 { j as i64 } else { j as i64 - n };
        // the Nyquist mode carries no momentum in a symmetric derivative
        if n % 2 == 0 && j as i64 == n / 2 {
            0.0
        } else {
            2.0 * PI * m as f64 / g.lengths()[a]
        }
    };
    let weight: f64 = data.iter().map(|z| z.norm_sqr()).sum();
    let d = g.spatial_dim();
    let mut p = vec![0.0; d];
    for (idx, z) in data.iter().enumerate() {
        let mut rest = idx;
        let mut js = vec![0; dims.len()];
        for a in (0..dims.len()).rev() {
            js[a] = rest % dims[a];
            rest /= dims[a];
        }
        for (axis, &j) in js.iter().enumerate() {
            p[axis % d] += hbar * wavenumber(axis, j) * z.norm_sqr() / weight;
        }
    }
    p
}

fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Total variation against `|psi|^2` on blocks of `block` cells, pooling
/// blocks with fewer than 100 expected counts into one remainder bin.
fn tv_oracle(ens: &TrajectoryEnsemble, psi: &WaveFunction, block: usize) -> f64 {
    let g = psi.grid();
    let n = g.points()[0];
    let h = g.lengths()[0] / n as f64;
    let rho = psi.density();
    let bins = n / block;
    let mut expected = vec![0.0; bins];
    for (i, r) in rho.iter().enumerate() {
        expected[i / block] += r * h;
    }
    let mut observed = vec![0.0; bins];
    let samples = ens.final_positions();
    for &x in samples {
        let u = (x + g.lengths()[0] / 2.0) / h + 0.5;
        let i = (u.floor() as i64).rem_euclid(n as i64) as usize;
        observed[i / block] += 1.0;
    }
    let total = samples.len() as f64;
    let (mut tv, mut rest_e, mut rest_o) = (0.0, 0.0, 0.0);
    for (e, o) in expected.iter().zip(&observed) {
        if e * total >= 100.0 {
            tv += (o / total - e).abs();
        } else {
            rest_e += e;
            rest_o += o / total;
        }
    }
    0.5 * (tv + (rest_o - rest_e).abs())
}

fn series_states(
    psi: &WaveFunction,
    sys: &ParticleSystem,
    v: &PotentialSpec,
    shift: &ShiftVelocity,
    dt: f64,
    steps: usize,
) -> Vec<WaveFunction> {
    evolve(psi, sys, v, shift, &SolverParams::new(dt, steps, Backend::SplitStep))
        .unwrap()
        .records
        .into_iter()
        .map(|r| r.state)
        .collect()
}

// ---------------------------------------------------------------- criteria

fn random_tangent(rng: &mut ChaCha8Rng, rho: &[f64]) -> TangentVector {
    let drho = rho.iter().map(|r| r * rng.random_range(-1.0..1.0)).collect();
    let dphi = rho.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
    TangentVector::rho_phi(drho, dphi)
}

fn parts(v: &TangentVector) -> (Vec<f64>, Vec<f64>) {
    match v {
        TangentVector::RhoPhi { drho, dphi } => (drho.clone(), dphi.clone()),
        TangentVector::Psi { .. } => unreachable!(),
    }
}

fn c1_geometry() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let grids = [
        GridSpec::uniform(1, 1, 32, 8.0).unwrap(),
        GridSpec::uniform(2, 1, 12, 6.0).unwrap(),
        GridSpec::uniform(1, 2, 12, 6.0).unwrap(),
    ];
    let (mut assembly, mut jj, mut compat, mut chart) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for k in 0..100 {
        let g = &grids[k % grids.len()];
        let hbar = if k % 4 == 3 { 0.7 } else { 1.0 };
        let sys = ParticleSystem::new(vec![1.0; g.particle_count()], hbar).unwrap();
        let psi = random_smooth_state(g, 3, 0.4, &mut rng).unwrap();
        let chi = random_smooth_state(g, 3, 0.4, &mut rng).unwrap();

        // <psi|chi> assembled from G and Omega against the direct sum
        let direct = overlap(g, psi.amplitudes(), chi.amplitudes());
        assembly = assembly.max((assembled_inner_product(&psi, &chi, hbar).unwrap() - direct).norm());

        let st = wf_to_epistemic(&psi, hbar).unwrap();
        let ctx = GeometryContext::new(&st, &sys).unwrap();
        let v = random_tangent(&mut rng, st.rho());
        let u = random_tangent(&mut rng, st.rho());

        // J^2 = -1 in both charts
        let jjv = ctx.complex_structure_apply(&ctx.complex_structure_apply(&v).unwrap()).unwrap();
        let (a, b) = (parts(&v), parts(&jjv));
        for i in 0..a.0.len() {
            jj = jj.max((a.0[i] + b.0[i]).abs()).max((a.1[i] + b.1[i]).abs());
        }
        let vp = ctx.to_psi_chart(&v).unwrap();
        let jjvp = ctx.complex_structure_apply(&ctx.complex_structure_apply(&vp).unwrap()).unwrap();
        if let (TangentVector::Psi { dpsi: x, .. }, TangentVector::Psi { dpsi: y, .. }) = (&vp, &jjvp) {
            jj = jj.max(x.iter().zip(y).map(|(p, q)| (p + q).norm()).fold(0.0, f64::max));
        }

        // G(V, J U) = -Omega(V, U), J an isometry and a symplectomorphism
        let ju = ctx.complex_structure_apply(&u).unwrap();
        let jv = ctx.complex_structure_apply(&v).unwrap();
        let guv = ctx.metric_eval(&v, &u).unwrap();
        let ouv = ctx.symplectic_eval(&v, &u).unwrap();
        compat = compat
            .max((ctx.metric_eval(&v, &ju).unwrap() + ouv).abs())
            .max((ctx.metric_eval(&jv, &ju).unwrap() - guv).abs())
            .max((ctx.symplectic_eval(&jv, &ju).unwrap() - ouv).abs())
            .max(ctx.compatibility_defect());

        // chart change: (rho, phi) forms against the wave-function chart and
        // against 2 hbar integral |dpsi|^2 built here
        let up = ctx.to_psi_chart(&u).unwrap();
        chart = chart
            .max((ctx.metric_eval(&vp, &up).unwrap() - guv).abs())
            .max((ctx.symplectic_eval(&vp, &up).unwrap() - ouv).abs());
        let (drho, dphi) = parts(&v);
        let phase = st.phi();
        let by_hand: f64 = (0..drho.len())
            .map(|i| {
                let s = st.rho()[i].sqrt();
                let w = Complex64::new(drho[i] / (2.0 * s), s * dphi[i] / hbar) * Complex64::from_polar(1.0, phase[i] / hbar);
                w.norm_sqr()
            })
            .sum::<f64>()
            * 2.0
            * hbar
            * dv(g);
        chart = chart.max((ctx.metric_eval(&v, &v).unwrap() - by_hand).abs());
        let back = parts(&ctx.to_rho_phi_chart(&vp).unwrap());
        for i in 0..drho.len() {
            chart = chart.max((back.0[i] - drho[i]).abs()).max((back.1[i] - dphi[i]).abs());
        }
    }
    let mut c = Checks::default();
    c.below("assembly", assembly, 1e-10);
    c.below("J^2+1", jj, 1e-10);
    c.below("G/Omega/J", compat, 1e-10);
    c.below("chart change", chart, 1e-10);
    c.verdict()
}

fn c2_unitarity() -> Verdict {
    let g = GridSpec::uniform(2, 1, 128, 32.0).unwrap();
    let sys = ParticleSystem::unit(1);
    let v = PotentialSpec::ExternalHarmonic { omega: 0.8 };
    let shift = ShiftVelocity::planar([0.2, -0.1], 0.3);
    let h = Hamiltonian::new(&g, &sys, &v, &shift).unwrap();
    let psi = gaussian_packet(&g, &sys, &[vec![0.5, -0.3]], &[1.0, 1.0], &[0.6, 0.2]).unwrap();
    let stepper = Stepper::new(&h, 0.01, Backend::SplitStep, 1e-13);
    let mut amps = psi.amplitudes().to_vec();
    let mut prev = norm_sq(&g, &amps);
    let mut drift = 0.0f64;
    for _ in 0..1000 {
        stepper.step(&mut amps).unwrap();
        let n = norm_sq(&g, &amps);
        drift = drift.max((n - prev).abs());
        prev = n;
    }
    let total = (prev - 1.0).abs();

    // superposition through 20 steps of either backend, on unnormalized data
    let a = gaussian_packet(&g, &sys, &[vec![1.0, 0.0]], &[1.0, 1.0], &[0.0, 0.7]).unwrap();
    let b = gaussian_packet(&g, &sys, &[vec![-0.8, 0.6]], &[1.1, 1.1], &[0.4, 0.0]).unwrap();
    let (ca, cb) = (Complex64::new(0.6, -0.9), Complex64::new(-1.3, 0.4));
    let mut lin = 0.0f64;
    for backend in [Backend::SplitStep, Backend::CrankNicolson] {
        let st = Stepper::new(&h, 0.01, backend, 1e-14);
        let run = |x: &[Complex64]| {
            let mut y = x.to_vec();
            for _ in 0..20 {
                st.step(&mut y).unwrap();
            }
            y
        };
        let mix: Vec<_> = a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| ca * x + cb * y).collect();
        let (ua, ub, um) = (run(a.amplitudes()), run(b.amplitudes()), run(&mix));
        for i in 0..um.len() {
            lin = lin.max((um[i] - (ca * ua[i] + cb * ub[i])).norm());
        }
    }
    let mut c = Checks::default();
    c.below("max norm drift per step", drift, 1e-12);
    c.below("norm drift after 1000 steps", total, 1e-10);
    c.below("superposition error", lin, 1e-12);
    c.verdict()
}

fn c3_free_packet() -> Verdict {
    let mut c = Checks::default();
    // (mass, sigma0, hbar, wavevector)
    for (m, s0, hbar, k) in [(1.0, 1.0, 1.0, 0.0), (2.0, 1.0, 0.5, 0.5), (0.5, 0.8, 1.0, -0.4)] {
        let g = GridSpec::uniform(1, 1, 256, 48.0).unwrap();
        let sys = ParticleSystem::new(vec![m], hbar).unwrap();
        let psi = gaussian_packet(&g, &sys, &[vec![0.0]], &[s0], &[k]).unwrap();
        let t = 2.0 * m * s0 * s0 / hbar;
        let steps = 200;
        let out = evolve(&psi, &sys, &PotentialSpec::Free, &ShiftVelocity::zero(1), &SolverParams::new(t / steps as f64, steps, Backend::SplitStep))
            .unwrap();
        let last = out.final_state().unwrap();
        let rho = last.density();
        let h = dv(&g);
        let mean: f64 = rho.iter().enumerate().map(|(i, r)| r * h * coords(&g, i)[0]).sum();
        let var: f64 = rho.iter().enumerate().map(|(i, r)| r * h * (coords(&g, i)[0] - mean).powi(2)).sum();
        let expect = s0 * s0 * (1.0 + (hbar * t / (2.0 * m * s0 * s0)).powi(2));
        c.below(&format!("rel. error m={m} s0={s0} hbar={hbar}"), ((var - expect) / expect).abs(), 1e-4);
        c.below(&format!("center m={m}"), (mean - hbar * k * t / m).abs(), 1e-8);
    }
    c.verdict()
}

fn continuity_ratio(psi: &WaveFunction, sys: &ParticleSystem, v: &PotentialSpec, shift: &ShiftVelocity, backend: Backend, dts: [f64; 2]) -> f64 {
    let mut res = Vec::new();
    for dt in dts {
        let s = evolve(psi, sys, v, shift, &SolverParams::new(dt, 1, backend)).unwrap();
        let e0 = wf_to_epistemic(&s.records[0].state, sys.hbar()).unwrap();
        let e1 = wf_to_epistemic(s.final_state().unwrap(), sys.hbar()).unwrap();
        res.push(continuity_residual(&e0, &e1, sys, shift).unwrap());
    }
    res[0] / res[1]
}

fn c4_continuity() -> Verdict {
    let mut c = Checks::default();
    let g = GridSpec::uniform(1, 1, 128, 24.0).unwrap();
    let sys = ParticleSystem::unit(1);
    let packet = periodic_packet(&g, &[0.3], 9.0, &[0.8]).unwrap();
    let trap = PotentialSpec::ExternalHarmonic { omega: 1.0 };
    let still = ShiftVelocity::zero(1);
    let moving = ShiftVelocity::translation(&[0.5]).unwrap();
    for backend in [Backend::CrankNicolson, Backend::SplitStep] {
        for (label, v, shift) in [("free", &PotentialSpec::Free, &still), ("trapped", &trap, &still), ("free, shifted", &PotentialSpec::Free, &moving)] {
            for dts in [[0.02, 0.01], [0.01, 0.005]] {
                let r = continuity_ratio(&packet, &sys, v, shift, backend, dts);
                c.within(&format!("{label} {backend:?} dt {}", dts[0]), r, 3.5, 4.5);
            }
        }
    }
    let g2 = GridSpec::uniform(2, 1, 48, 16.0).unwrap();
    let p2 = periodic_packet(&g2, &[0.2, -0.1], 4.0, &[0.3, 0.5]).unwrap();
    let drift = ShiftVelocity::planar([0.3, -0.2], 0.0);
    let r = continuity_ratio(&p2, &sys, &PotentialSpec::Free, &drift, Backend::CrankNicolson, [0.02, 0.01]);
    c.within("free 2D, shifted", r, 3.5, 4.5);
    c.verdict()
}

fn c5_translation() -> Verdict {
    let mut c = Checks::default();
    let g = GridSpec::uniform(1, 2, 128, 32.0).unwrap();
    let sys = ParticleSystem::new(vec![1.0, 3.0], 1.0).unwrap();
    let (k1, k2) = (1.1, -0.2);
    let psi = gaussian_packet(&g, &sys, &[vec![0.4], vec![-0.3]], &[1.0, 1.0], &[k1, k2]).unwrap();
    let expect = (k1 + k2) / 4.0;
    let v = PotentialSpec::PairSpring { spring: 0.5 };
    let analytic = best_match_translation(&psi, &sys, &v, 1e-3).unwrap();
    c.below("|lambda - hbar(k1+k2)/M|", (analytic.lambda_dot[0] - expect).abs(), 1e-10);
    let numeric = numerical_best_match(&psi, &sys, &v, 1e-3, &SearchDomain::translations(vec![(-1.0, 1.0)]), Backend::SplitStep).unwrap();
    c.below("numerical minimizer", (numeric.lambda_dot[0] - analytic.lambda_dot[0]).abs(), 1e-4);

    // equilocality under the matched shift over unit time
    let shift = ShiftVelocity::translation(&analytic.lambda_dot).unwrap();
    let dt = 0.01;
    let states = series_states(&psi, &sys, &v, &shift, dt, 100);
    let centers: Vec<f64> = states.iter().map(|s| center_of_mass(s, sys.masses())[0]).collect();
    let rate = centers.windows(2).map(|w| ((w[1] - w[0]) / dt).abs()).fold(0.0, f64::max);
    c.below("|d<x_cm>/dt|", rate, 1e-6);

    // Galilean boost to the center-of-mass frame
    let rest = galilean_boost(&psi, &sys, &analytic.lambda_dot).unwrap();
    c.below("|P| after boost", momentum_oracle(&rest, 1.0)[0].abs(), 1e-10);
    let g2 = GridSpec::uniform(2, 1, 128, 32.0).unwrap();
    let one = ParticleSystem::new(vec![2.0], 1.0).unwrap();
    let p2 = gaussian_packet(&g2, &one, &[vec![0.0, 0.5]], &[1.0, 1.0], &[0.9, -0.6]).unwrap();
    let lam = best_match_translation(&p2, &one, &PotentialSpec::Free, 1e-3).unwrap().lambda_dot;
    c.below("2D lambda vs oracle P/M", (lam[0] - 0.45).abs().max((lam[1] + 0.3).abs()), 1e-10);
    let p = momentum_oracle(&galilean_boost(&p2, &one, &lam).unwrap(), 1.0);
    c.below("2D |P| after boost", p[0].hypot(p[1]), 1e-10);
    c.verdict()
}

fn c6_rotation() -> Verdict {
    let mut c = Checks::default();
    let sys = ParticleSystem::unit(1);
    for (charge, width, n, l) in [(1, 1.0, 48, 16.0), (2, 1.0, 64, 20.0), (1, 1.5, 64, 24.0)] {
        let g = GridSpec::uniform(2, 1, n, l).unwrap();
        let psi = vortex_state(&g, width, charge).unwrap();
        // |psi|^2 ~ r^(2l) exp(-r^2/w^2): <r^2> = (l + 1) w^2 and L = hbar l
        let r2: f64 = {
            let (mut num, mut den) = (0.0, 0.0);
            let dr = 1e-4;
            let mut r = 0.5 * dr;
            while r < 20.0 * width {
                let w = r.powi(2 * charge + 1) * (-(r * r) / (width * width)).exp();
                num += w * r * r;
                den += w;
                r += dr;
            }
            num / den
        };
        let zeta = charge as f64 / r2;
        let closed = charge as f64 / ((charge + 1) as f64 * width * width);
        c.below(&format!("quadrature vs closed form l={charge} w={width}"), (zeta - closed).abs(), 1e-8);
        let r = best_match_rotation(&psi, &sys, &PotentialSpec::Free, 1e-3).unwrap();
        c.below(&format!("zeta l={charge} w={width}"), (r.zeta_dot[2] - closed).abs(), 1e-6);
        if charge == 1 && width == 1.0 {
            c.below("zeta - 1/2", (r.zeta_dot[2] - 0.5).abs(), 1e-6);
            let domain = SearchDomain { lambda: vec![(0.0, 0.0), (0.0, 0.0)], zeta: vec![(0.0, 1.0)] };
            let num = numerical_best_match(&psi, &sys, &PotentialSpec::Free, 1e-3, &domain, Backend::SplitStep).unwrap();
            c.below("numerical minimizer", (num.zeta_dot[2] - r.zeta_dot[2]).abs(), 1e-4);
        }
    }
    let g = GridSpec::uniform(2, 1, 32, 16.0).unwrap();
    let line = WaveFunction::from_fn(&g, 0.0, |x| {
        if x[1] == 0.0 { Complex64::new((-x[0] * x[0]).exp(), 0.0) } else { Complex64::new(0.0, 0.0) }
    })
    .unwrap();
    let err = best_match_rotation(&line, &sys, &PotentialSpec::Free, 1e-3);
    c.holds("SingularInertia on a collapsed state", matches!(err, Err(EdError::SingularInertia { .. })));
    c.verdict()
}

fn c7_constraints() -> Verdict {
    let mut c = Checks::default();
    let dt = 0.02;
    let steps = 50;

    // two particles in the plane, counter-rotating, coupled by a spring: the
    // spring trades angular momentum between them while the total stays at
    // zero, and the total momentum stays at M lambda_dot
    let g = GridSpec::uniform(2, 2, 32, 12.0).unwrap();
    let sys = ParticleSystem::new(vec![1.0, 2.0], 1.0).unwrap();
    let psi = WaveFunction::from_fn(&g, 0.0, |x| {
        let a = Complex64::new(x[0], x[1]) * Complex64::new(-(x[0] * x[0] + x[1] * x[1]) / 2.0, 0.4 * x[0]).exp();
        let b = Complex64::new(x[2], -x[3]) * Complex64::new(-(x[2] * x[2] + x[3] * x[3]) / 2.0, -0.1 * x[3]).exp();
        a * b
    })
    .unwrap();
    let spring = PotentialSpec::PairSpring { spring: 1.0 };
    let shift = policy_shift(PolicyKind::BestMatchBoth, &psi, &sys, &spring, dt).unwrap();
    let p0 = momentum_oracle(&psi, 1.0);
    c.below("lambda vs oracle P/M", (shift.lambda_dot()[0] - p0[0] / 3.0).abs().max((shift.lambda_dot()[1] - p0[1] / 3.0).abs()), 1e-10);
    let s = evolve(&psi, &sys, &spring, &shift, &SolverParams::new(dt, steps, Backend::SplitStep).with_stride(5)).unwrap();
    let pairs: Vec<_> = s.records.iter().map(|r| (r.report, r.shift)).collect();
    let rep = constraint_check(&pairs, sys.total_mass(), &spring, 1e-6);
    c.below("2D pair |P - M lambda|", rep.momentum_residual, 1e-6);
    c.below("2D pair |L - I zeta|", rep.angular_residual, 1e-6);
    let p1 = momentum_oracle(s.final_state().unwrap(), 1.0);
    c.below("final P vs oracle", (p1[0] - p0[0]).abs().max((p1[1] - p0[1]).abs()), 1e-6);

    // a line pair with a nonzero matched shift, and the external trap as the
    // negative control
    let g1 = GridSpec::uniform(1, 2, 128, 32.0).unwrap();
    let line = ParticleSystem::new(vec![1.0, 2.0], 1.0).unwrap();
    let pair = gaussian_packet(&g1, &line, &[vec![0.8], vec![-0.6]], &[1.0, 1.0], &[0.6, -0.2]).unwrap();
    let trap = PotentialSpec::ExternalHarmonic { omega: 1.0 };
    for (v, relational) in [(PotentialSpec::PairGaussian { depth: 1.0, width: 1.5 }, true), (trap, false)] {
        let shift = policy_shift(PolicyKind::BestMatchTranslation, &pair, &line, &v, 0.01).unwrap();
        let s = evolve(&pair, &line, &v, &shift, &SolverParams::new(0.01, 100, Backend::SplitStep).with_stride(10)).unwrap();
        let pairs: Vec<_> = s.records.iter().map(|r| (r.report, r.shift)).collect();
        let rep = constraint_check(&pairs, line.total_mass(), &v, 1e-6);
        if relational {
            c.below("line pair |P - M lambda|", rep.momentum_residual, 1e-6);
        } else {
            c.holds(&format!("trap control fails ({:.2e})", rep.momentum_residual), !rep.momentum_pass && rep.non_relational);
        }
    }
    c.verdict()
}

fn c8_maxent() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut worst = 0.0f64;
    let mut worst_reported = 0.0f64;
    for _ in 0..10 {
        let alpha: f64 = rng.random_range(0.5..20.0);
        let slope = rng.random_range(0.2..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let kappa = rng.random_range(-1.0..1.0);
        let mu = kappa / slope;
        let sigma = alpha.powf(-0.5);
        let p = MaxEntProblem::new(alpha, slope, kappa, 0.05 * sigma, mu.abs() + 12.0 * sigma).unwrap();
        let sol = maxent_transition_oracle(&p).unwrap();
        let q: Vec<f64> = p.lattice.iter().map(|x| (-alpha * (x - mu).powi(2) / 2.0).exp()).collect();
        let z: f64 = q.iter().sum();
        let kl: f64 = sol
            .probabilities
            .iter()
            .zip(&q)
            .filter(|(pi, _)| **pi > 0.0)
            .map(|(pi, qi)| pi * (pi / (qi / z)).ln())
            .sum();
        worst = worst.max(kl.abs());
        worst_reported = worst_reported.max(sol.kl_divergence.abs());
    }
    let mut c = Checks::default();
    c.below("max KL (oracle)", worst, 1e-8);
    c.below("max KL (reported)", worst_reported, 1e-8);
    c.verdict()
}

fn c9_ensembles() -> Verdict {
    let mut c = Checks::default();
    let chains = 100_000;
    let sys = ParticleSystem::unit(1);
    let check = |c: &mut Checks, label: &str, states: &[WaveFunction], shift: &ShiftVelocity, seed: u64, expect_pass: bool, eta: Option<f64>| {
        let mut opts = SamplerOptions::new(chains, seed);
        opts.noise_eta = eta;
        let ens = sample_ensemble(states, &sys, shift, &opts).unwrap();
        let last = states.last().unwrap();
        let lib = ensemble_density_compare(&ens, last).unwrap();
        let oracle = tv_oracle(&ens, last, 4);
        if expect_pass {
            c.below(&format!("{label} TV"), lib.total_variation, 0.05);
            c.below(&format!("{label} TV oracle"), oracle, 0.05);
            c.holds(&format!("{label} not flagged"), !ens.flagged());
        } else {
            c.holds(&format!("{label} fails (TV {:.3})", lib.total_variation), !lib.passes(0.05) && oracle >= 0.05);
        }
    };
    let trap = PotentialSpec::ExternalHarmonic { omega: 1.0 };
    let still = ShiftVelocity::zero(1);
    let g = GridSpec::uniform(1, 1, 128, 20.0).unwrap();
    let ground = gaussian_packet(&g, &sys, &[vec![0.0]], &[0.5f64.sqrt()], &[0.0]).unwrap();
    let states = series_states(&ground, &sys, &trap, &still, 0.01, 200);
    check(&mut c, "stationary", &states, &still, 91, true, None);
    check(&mut c, "eta/2 control", &states, &still, 91, false, Some(0.5));

    let wide = GridSpec::uniform(1, 1, 256, 48.0).unwrap();
    let packet = gaussian_packet(&wide, &sys, &[vec![0.0]], &[1.0], &[0.0]).unwrap();
    let states = series_states(&packet, &sys, &PotentialSpec::Free, &still, 0.01, 200);
    check(&mut c, "spreading", &states, &still, 92, true, None);

    let moving = gaussian_packet(&wide, &sys, &[vec![0.5]], &[1.0], &[1.5]).unwrap();
    let shift = ShiftVelocity::translation(&[1.5]).unwrap();
    let states = series_states(&moving, &sys, &PotentialSpec::Free, &shift, 0.01, 150);
    check(&mut c, "shifted frame", &states, &shift, 93, true, None);
    c.verdict()
}

fn c10_fluctuations() -> Verdict {
    let mut c = Checks::default();
    let g = GridSpec::uniform(1, 2, 128, 28.0).unwrap();
    let masses = [1.0, 3.0];
    let eta = 1.0;
    let sys = ParticleSystem::new(masses.to_vec(), 1.0).unwrap();
    let psi = gaussian_packet(&g, &sys, &[vec![0.3], vec![-0.2]], &[1.0, 1.0], &[0.4, -0.3]).unwrap();
    let field = DriftField::new(&psi, &sys).unwrap();
    let shift = ShiftVelocity::translation(&[0.2]).unwrap();
    let n = 100_000;
    let nf = n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut points = Vec::new();
    // the log-std of each point carries standard error ~ 1/sqrt(2n)
    let point_se = (1.0 / (2.0 * nf)).sqrt();
    for dt in [0.004, 0.002, 0.001] {
        let mut w = vec![[0.0; 2]; n];
        for wi in &mut w {
            let x0 = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let mut drift = [0.0; 2];
            field.eval(&x0, &mut drift);
            let mut x = x0;
            sample_step(&mut x, &field, &shift, dt, &mut rng);
            for a in 0..2 {
                wi[a] = (x[a] - x0[a]) - dt * (drift[a] - 0.2);
            }
        }
        let mean = |a: usize| w.iter().map(|v| v[a]).sum::<f64>() / nf;
        let m = [mean(0), mean(1)];
        let cov = |a: usize, b: usize| w.iter().map(|v| (v[a] - m[a]) * (v[b] - m[b])).sum::<f64>() / (nf - 1.0);
        for a in 0..2 {
            for b in 0..2 {
                let expect = if a == b { eta * dt / masses[a] } else { 0.0 };
                // standard error of a sample covariance of Gaussian variables
                let se = ((eta * dt / masses[a]) * (eta * dt / masses[b]) + expect * expect).sqrt() / nf.sqrt();
                let z = (cov(a, b) - expect).abs() / se;
                c.below(&format!("dt={dt} cov[{a}{b}] z"), z, 3.0);
            }
        }
        points.push((dt.ln(), 0.5 * cov(0, 0).ln()));
    }
    let slope = fit_slope(&points);
    let mx = points.iter().map(|p| p.0).sum::<f64>() / 3.0;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let bound = 3.0 * point_se / sxx.sqrt();
    c.below("|slope - 1/2| of std vs dt", (slope - 0.5).abs(), bound);
    c.verdict()
}

fn c11_parametrized() -> Verdict {
    let mut c = Checks::default();
    let g = GridSpec::uniform(1, 1, 128, 32.0).unwrap();
    let sys = ParticleSystem::unit(1);
    let v = PotentialSpec::ExternalHarmonic { omega: 0.6 };
    let psi = gaussian_packet(&g, &sys, &[vec![0.5]], &[1.0], &[0.7]).unwrap();
    let still = ShiftVelocity::zero(1);
    let flat = LapseProfile::constant(0.0, 2.0, 0.5);
    let wavy = LapseProfile::sinusoidal(0.0, 2.0, 0.5, 0.35, PI, 0.0);
    c.below("equal lapse integrals", (flat.duration() - wavy.duration()).abs(), 1e-14);
    let a = parametrized_evolve(&psi, &sys, &v, &still, &flat, 200, Backend::CrankNicolson, 1e-13).unwrap();
    let b = parametrized_evolve(&psi, &sys, &v, &still, &wavy, 800, Backend::CrankNicolson, 1e-13).unwrap();
    c.below("final infidelity", infidelity(&g, a.final_state.amplitudes(), b.final_state.amplitudes()), 1e-8);
    for (name, run) in [("flat", &a), ("wavy", &b)] {
        let drift = run.energies.iter().map(|e| (e - run.energies[0]).abs()).fold(0.0, f64::max);
        c.below(&format!("H drift {name}"), drift, 1e-8);
        c.below(&format!("pi0 + H {name}"), run.super_hamiltonian_residual, 1e-8);
    }
    for backend in [Backend::SplitStep, Backend::CrankNicolson] {
        let unit = LapseProfile::constant(0.0, 1.0, 1.0);
        let steps = 100;
        let p = parametrized_evolve(&psi, &sys, &v, &still, &unit, steps, backend, 1e-13).unwrap();
        let plain = evolve(&psi, &sys, &v, &still, &SolverParams::new(1.0 / steps as f64, steps, backend)).unwrap();
        let same = p
            .final_state
            .amplitudes()
            .iter()
            .zip(plain.final_state().unwrap().amplitudes())
            .all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits());
        c.holds(&format!("beta=1 bit-identical ({backend:?})"), same);
    }
    c.verdict()
}

fn c12_backends() -> Verdict {
    let mut c = Checks::default();
    let sys = ParticleSystem::unit(1);
    let g2 = GridSpec::uniform(2, 1, 32, 12.0).unwrap();
    let rotating = WaveFunction::from_fn(&g2, 0.0, |x| {
        Complex64::new(x[0] + 0.5, 0.3 * x[1]) * (-((x[0] - 0.4).powi(2) + x[1] * x[1]) / 2.0).exp()
    })
    .unwrap();
    let g1 = GridSpec::uniform(1, 1, 128, 32.0).unwrap();
    let line = gaussian_packet(&g1, &sys, &[vec![0.5]], &[1.0], &[1.0]).unwrap();
    let cases = [
        ("1D trap", line, PotentialSpec::ExternalHarmonic { omega: 0.8 }, ShiftVelocity::zero(1)),
        ("1D trap, translating", gaussian_packet(&g1, &sys, &[vec![0.0]], &[1.0], &[0.4]).unwrap(), PotentialSpec::ExternalHarmonic { omega: 0.5 }, ShiftVelocity::translation(&[0.3]).unwrap()),
        ("2D trap, rotating", rotating, PotentialSpec::ExternalHarmonic { omega: 1.0 }, ShiftVelocity::planar([0.1, -0.2], 0.6)),
    ];
    for (label, psi, v, shift) in cases {
        let mut points = Vec::new();
        for dt in [0.04f64, 0.02, 0.01, 0.005] {
            let steps = (0.4 / dt).round() as usize;
            let a = evolve(&psi, &sys, &v, &shift, &SolverParams::new(dt, steps, Backend::SplitStep).with_stride(steps)).unwrap();
            let b = evolve(&psi, &sys, &v, &shift, &SolverParams::new(dt, steps, Backend::CrankNicolson).with_stride(steps)).unwrap();
            let inf = infidelity(psi.grid(), a.final_state().unwrap().amplitudes(), b.final_state().unwrap().amplitudes());
            // Fubini-Study angle: arcsin sqrt(1 - F)
            points.push((dt.ln(), inf.sqrt().asin().ln()));
        }
        c.within(&format!("{label} slope"), fit_slope(&points), 1.7, 2.3);
    }
    c.verdict()
}

fn c13_reproducibility() -> Verdict {
    let exe = env!("CARGO_BIN_EXE_edlab");
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(format!("threads-{threads}"));
        let status = Command::new(exe)
            .args(["verify", "--seed", "2024", "--threads", threads, "--output"])
            .arg(&out)
            .output()
            .unwrap();
        outputs.push((status.status.code(), std::fs::read(out.join("observables.csv")).unwrap_or_default()));
    }
    let mut c = Checks::default();
    c.holds("verify exits 0 twice", outputs.iter().all(|o| o.0 == Some(0)));
    c.holds("observables.csv non-empty", !outputs[0].1.is_empty());
    c.holds("byte-identical observables.csv", outputs[0].1 == outputs[1].1);
    c.verdict()
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Verdict, Duration);
    let s = Duration::from_secs;
    let criteria: [Criterion; 13] = [
        ("geometry identities", c1_geometry, s(10)),
        ("unitarity and linearity", c2_unitarity, s(30)),
        ("free-packet spreading", c3_free_packet, s(10)),
        ("continuity residual order", c4_continuity, s(60)),
        ("translational best matching", c5_translation, s(60)),
        ("rotational best matching", c6_rotation, s(120)),
        ("constraint conservation", c7_constraints, s(120)),
        ("maximum-entropy kernel", c8_maxent, s(10)),
        ("ontic/epistemic consistency", c9_ensembles, s(300)),
        ("fluctuation scaling", c10_fluctuations, s(60)),
        ("parametrized time", c11_parametrized, s(60)),
        ("backend cross-validation", c12_backends, s(300)),
        ("reproducibility", c13_reproducibility, s(600)),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    println!("acceptance criteria");
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let number = i + 1;
        if !selected.is_empty() && !selected.contains(&number) {
            continue;
        }
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| Verdict {
            passed: false,
            detail: format!(
                "panicked: {}",
                e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
            ),
        });
        let elapsed = start.elapsed();
        let in_time = elapsed <= *budget;
        let passed = verdict.passed && in_time;
        if !passed {
            failures += 1;
        }
        println!(
            "[{}] {:>2}. {:<30} {:>6.1}s (budget {}s)  {}{}",
            if passed { "PASS" } else { "FAIL" },
            number,
            name,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            verdict.detail,
            if in_time { "" } else { " | over time budget" }
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
