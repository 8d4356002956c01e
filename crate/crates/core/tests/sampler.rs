use edlab::evolution::{evolve, Backend, SolverParams};
use edlab::sampler::{
    compare_positions, ensemble_density_compare, maxent_transition_oracle, sample_ensemble, sample_step,
    two_sample_compare, DriftField, MaxEntProblem, SamplerOptions,
};
use edlab::state::gaussian_packet;
use edlab::{Complex64, GridSpec, ParticleSystem, PotentialSpec, ShiftVelocity, WaveFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn series(psi: &WaveFunction, sys: &ParticleSystem, v: &PotentialSpec, shift: &ShiftVelocity, dt: f64, steps: usize) -> Vec<WaveFunction> {
    evolve(psi, sys, v, shift, &SolverParams::new(dt, steps, Backend::SplitStep))
        .unwrap()
        .records
        .into_iter()
        .map(|r| r.state)
        .collect()
}

fn variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

#[test]
fn stationary_ground_state() {
    let g = GridSpec::uniform(1, 1, 128, 20.0).unwrap();
    let sys = ParticleSystem::unit(1);
    let v = PotentialSpec::ExternalHarmonic { omega: 1.0 };
    let psi = gaussian_packet(&g, &sys, &[vec![0.0]], &[0.5f64.sqrt()], &[0.0]).unwrap();
    let states = series(&psi, &sys, &v, &ShiftVelocity::zero(1), 0.01, 200);
    let ens = sample_ensemble(&states, &sys, &ShiftVelocity::zero(1), &SamplerOptions::new(100_000, 11)).unwrap();
    let c = ensemble_density_compare(&ens, states.last().unwrap()).unwrap();
    println!("{c:?}");
    assert!(c.passes(0.05));
    assert!(!ens.flagged());
    // half the diffusion leaves the osmotic drift uncompensated
    let mut opts = SamplerOptions::new(100_000, 11);
    opts.noise_eta = Some(0.5);
    let ens = sample_ensemble(&states, &sys, &ShiftVelocity::zero(1), &opts).unwrap();
    let c = ensemble_density_compare(&ens, states.last().unwrap()).unwrap();
    println!("{c:?}");
    assert!(!c.passes(0.05));
}

#[test]
fn spreading_packet_variance() {
    let g = GridSpec::uniform(1, 1, 256, 48.0).unwrap();
    let sys = ParticleSystem::unit(1);
    let psi = gaussian_packet(&g, &sys, &[vec![0.0]], &[1.0], &[0.0]).unwrap();
    let (dt, steps) = (0.01, 200);
    let states = series(&psi, &sys, &PotentialSpec::Free, &ShiftVelocity::zero(1), dt, steps);
    let n = 100_000;
    let ens = sample_ensemble(&states, &sys, &ShiftVelocity::zero(1), &SamplerOptions::new(n, 5)).unwrap();
    let (_, var) = variance(ens.final_positions());
    let t = dt * steps as f64;
    let expect = 1.0 + (t / 2.0).powi(2) + g.spacing(0).powi(2) / 12.0;
    let se = expect * (2.0 / n as f64).sqrt();
    println!("var {var} expect {expect} se {se}");
    assert!((var - expect).abs() < 3.0 * se);
    let c = ensemble_density_compare(&ens, states.last().unwrap()).unwrap();
    println!("{c:?}");
    assert!(c.passes(0.05));
}

#[test]
fn shifted_frame_keeps_center() {
    let g = GridSpec::uniform(1, 1, 256, 48.0).unwrap();
    let sys = ParticleSystem::unit(1);
    let psi = gaussian_packet(&g, &sys, &[vec![0.0]], &[1.0], &[1.5]).unwrap();
    let shift = ShiftVelocity::translation(&[1.5]).unwrap();
    let states = series(&psi, &sys, &PotentialSpec::Free, &shift, 0.01, 100);
    let n = 100_000;
    let mut opts = SamplerOptions::new(n, 9);
    opts.record_stride = 25;
    let ens = sample_ensemble(&states, &sys, &shift, &opts).unwrap();
    for (k, pos) in ens.positions.iter().enumerate() {
        let (m, var) = variance(pos);
        println!("t {} mean {m}", ens.times[k]);
        assert!(m.abs() < 4.0 * (var / n as f64).sqrt());
    }
    let c = ensemble_density_compare(&ens, states.last().unwrap()).unwrap();
    assert!(c.passes(0.05));
}

#[test]
fn fluctuations_follow_inverse_mass() {
    let g = GridSpec::uniform(1, 2, 128, 28.0).unwrap();
    let sys = ParticleSystem::new(vec![1.0, 3.0], 1.0).unwrap();
    let psi = gaussian_packet(&g, &sys, &[vec![0.3], vec![-0.2]], &[1.0, 1.0], &[0.4, -0.3]).unwrap();
    let field = DriftField::new(&psi, &sys).unwrap();
    let shift = ShiftVelocity::translation(&[0.2]).unwrap();
    let n = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut slopes = Vec::new();
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
        let mean = |a: usize| w.iter().map(|v| v[a]).sum::<f64>() / n as f64;
        let (m0, m1) = (mean(0), mean(1));
        let cov = |a: usize, b: usize, ma: f64, mb: f64| {
            w.iter().map(|v| (v[a] - ma) * (v[b] - mb)).sum::<f64>() / (n as f64 - 1.0)
        };
        let (c00, c11, c01) = (cov(0, 0, m0, m0), cov(1, 1, m1, m1), cov(0, 1, m0, m1));
        let (e00, e11) = (dt, dt / 3.0);
        let nf = n as f64;
        assert!((c00 - e00).abs() < 3.0 * e00 * (2.0 / nf).sqrt(), "{c00} {e00}");
        assert!((c11 - e11).abs() < 3.0 * e11 * (2.0 / nf).sqrt(), "{c11} {e11}");
        assert!(c01.abs() < 3.0 * (e00 * e11 / nf).sqrt(), "{c01}");
        assert!(m0.abs() < 3.0 * (e00 / nf).sqrt());
        slopes.push((dt.ln(), 0.5 * c00.ln()));
    }
    let slope = (slopes[0].1 - slopes[2].1) / (slopes[0].0 - slopes[2].0);
    println!("std-dev slope {slope}");
    assert!((slope - 0.5).abs() < 0.02);
}

#[test]
fn drift_decomposition() {
    let g = GridSpec::uniform(2, 1, 64, 12.0).unwrap();
    let sys = ParticleSystem::new(vec![1.5], 1.0).unwrap();
    // smooth, periodic and nodeless
    let q = 2.0 * std::f64::consts::PI / 12.0;
    let psi = WaveFunction::from_fn(&g, 0.0, |x| {
        let amp = (1.2 * (q * x[0]).cos() + 0.8 * (q * x[1]).cos() + 0.3 * (q * (x[0] - x[1])).sin()).exp();
        Complex64::from_polar(amp, 2.0 * q * x[0] - q * x[1] + 0.7 * (q * x[1]).sin())
    })
    .unwrap();
    let shift = ShiftVelocity::planar([0.1, 0.3], 0.4);
    let field = DriftField::new(&psi, &sys).unwrap();
    let defect = field.decomposition_defect(&psi, &sys, &shift, 1e-8).unwrap();
    println!("defect {defect:e}");
    assert!(defect < 1e-10);
}

#[test]
fn ensembles_reproduce() {
    let g = GridSpec::uniform(1, 1, 128, 32.0).unwrap();
    let sys = ParticleSystem::unit(1);
    let psi = gaussian_packet(&g, &sys, &[vec![0.0]], &[1.0], &[0.5]).unwrap();
    let states = series(&psi, &sys, &PotentialSpec::Free, &ShiftVelocity::zero(1), 0.01, 20);
    let opts = SamplerOptions::new(1000, 42);
    let a = sample_ensemble(&states, &sys, &ShiftVelocity::zero(1), &opts).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let b = pool.install(|| sample_ensemble(&states, &sys, &ShiftVelocity::zero(1), &opts).unwrap());
    assert_eq!(a, b);
    let c = sample_ensemble(&states, &sys, &ShiftVelocity::zero(1), &SamplerOptions::new(1000, 43)).unwrap();
    assert_ne!(a.final_positions(), c.final_positions());
}

#[test]
fn half_ensembles_are_consistent() {
    let g = GridSpec::uniform(1, 1, 128, 32.0).unwrap();
    let sys = ParticleSystem::unit(1);
    let psi = gaussian_packet(&g, &sys, &[vec![0.0]], &[1.0], &[0.0]).unwrap();
    let states = vec![psi];
    let mut ps = Vec::new();
    for seed in 0..20 {
        let e = sample_ensemble(&states, &sys, &ShiftVelocity::zero(1), &SamplerOptions::new(20_000, seed)).unwrap();
        let x = e.final_positions();
        ps.push(two_sample_compare(&x[..10_000], &x[10_000..], &g).unwrap().p_value);
    }
    let mean = ps.iter().sum::<f64>() / ps.len() as f64;
    println!("p-values {ps:?}");
    // mean of 20 uniforms: sd 0.065
    assert!((mean - 0.5).abs() < 0.2);
    // and a sample drawn from the wrong density is rejected
    let wide = gaussian_packet(&g, &sys, &[vec![0.0]], &[1.2], &[0.0]).unwrap();
    let e = sample_ensemble(&[wide], &sys, &ShiftVelocity::zero(1), &SamplerOptions::new(20_000, 1)).unwrap();
    let c = compare_positions(e.final_positions(), &states[0]).unwrap();
    assert!(c.p_value < 1e-6);
}

#[test]
fn maxent_matches_gaussian_for_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..10 {
        let alpha = rng.random_range(0.5..20.0);
        let slope = rng.random_range(-3.0..3.0);
        let alpha_prime = rng.random_range(0.1..5.0);
        let sigma = 1.0 / f64::sqrt(alpha);
        let p = MaxEntProblem::for_multiplier(alpha, slope, alpha_prime, 0.05 * sigma).unwrap();
        let s = maxent_transition_oracle(&p).unwrap();
        assert!(s.kl_divergence.abs() < 1e-8, "{alpha} {slope} {alpha_prime}: {}", s.kl_divergence);
        assert!((s.alpha_prime - alpha_prime).abs() < 1e-8 * alpha_prime.max(1.0));
    }
}

#[test]
fn maxent_kl_decreases_with_resolution() {
    let mut last = f64::INFINITY;
    for spacing in [4.0, 2.0, 1.0] {
        // mean 0.3 sits off every lattice symmetry axis
        let p = MaxEntProblem::for_multiplier(1.0, 1.0, 0.3, spacing).unwrap();
        let kl = maxent_transition_oracle(&p).unwrap().kl_divergence;
        println!("h {spacing} kl {kl:e}");
        assert!(kl < last);
        last = kl;
    }
}
