//! The invariant suite behind the `verify` subcommand.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::best_match::{
    best_match_rotation, best_match_translation, constraint_check, numerical_best_match, SearchDomain,
};
use crate::evolution::{
    continuity_residual, evolve, evolve_with_policy, parametrized_evolve, Backend, LapseProfile, SolverParams,
};
use crate::geometry::{inner_product_identity_defect, GeometryContext};
use crate::grid::GridSpec;
use crate::potential::PotentialSpec;
use crate::sampler::{ensemble_density_compare, maxent_transition_oracle, sample_ensemble, MaxEntProblem, SamplerOptions};
use crate::shift::ShiftVelocity;
use crate::state::{epistemic_to_wf, gaussian_packet, periodic_packet, random_smooth_state, vortex_state, wf_to_epistemic, WaveFunction};
use crate::system::ParticleSystem;

use super::checkpoint::{decode_checkpoint, encode_checkpoint};
use super::config::{ExperimentConfig, PolicyKind};
use super::output::{observables_csv, write_atomic, write_json, ObservableRow};
use super::run::policy_shift;
use super::IoError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub bound: f64,
    pub detail: String,
}

impl CheckResult {
    fn below(name: &str, value: f64, bound: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed: value < bound, value, bound, detail: detail.into() }
    }

    fn within(name: &str, value: f64, lo: f64, hi: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed: (lo..=hi).contains(&value), value, bound: hi, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyOutcome {
    pub checks: Vec<CheckResult>,
}

impl VerifyOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<String> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect()
    }
}

type Checks = Vec<CheckResult>;

fn rows(series: &crate::evolution::Series) -> Vec<ObservableRow> {
    series
        .records
        .iter()
        .map(|r| ObservableRow { step: r.step, label: r.report.time, report: r.report, shift: r.shift })
        .collect()
}

fn max_norm_step(series: &crate::evolution::Series) -> f64 {
    series
        .records
        .windows(2)
        .map(|w| (w[1].report.norm - w[0].report.norm).abs() / (w[1].step - w[0].step) as f64)
        .fold(0.0, f64::max)
}

/// Runs the invariant suite and writes `verify.json` and the
/// `observables.csv` of its reference evolution into `out`.
pub fn run_verify(cfg: Option<&ExperimentConfig>, seed: u64, out: &Path) -> Result<VerifyOutcome, IoError> {
    let mut checks = Vec::new();
    let csv = match cfg {
        Some(cfg) => config_checks(cfg, seed, &mut checks)?,
        None => reference_checks(seed, &mut checks)?,
    };
    write_atomic(&out.join("observables.csv"), csv.as_bytes())?;
    let outcome = VerifyOutcome { checks };
    write_json(&out.join("verify.json"), &json!({ "seed": seed, "passed": outcome.passed(), "checks": outcome.checks }))?;
    Ok(outcome)
}

fn reference_checks(seed: u64, checks: &mut Checks) -> Result<String, IoError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sys1 = ParticleSystem::unit(1);

    // geometry on random nodeless states
    let g = GridSpec::uniform(1, 1, 32, 8.0)?;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let psi = random_smooth_state(&g, 3, 0.4, &mut rng)?;
        let chi = random_smooth_state(&g, 3, 0.4, &mut rng)?;
        worst = worst.max(inner_product_identity_defect(&psi, &chi, 1.0)?);
        let ctx = GeometryContext::new(&wf_to_epistemic(&psi, 1.0)?, &sys1)?;
        worst = worst.max(ctx.compatibility_defect());
    }
    checks.push(CheckResult::below("geometry-identities", worst, 1e-10, "inner-product assembly and J = -G^-1 Omega"));

    // chart round trip
    let psi = random_smooth_state(&g, 2, 0.5, &mut rng)?;
    let back = epistemic_to_wf(&wf_to_epistemic(&psi, 1.0)?, 1.0);
    checks.push(CheckResult::below("chart-round-trip", 1.0 - back.fidelity(&psi)?, 1e-12, "infidelity"));

    // reference run: trapped 2D packet in a rotating frame
    let g2 = GridSpec::uniform(2, 1, 128, 32.0)?;
    let v = PotentialSpec::ExternalHarmonic { omega: 1.0 };
    let psi = gaussian_packet(&g2, &sys1, &[vec![0.4, -0.3]], &[1.0, 1.0], &[0.5, 0.2])?;
    let shift = ShiftVelocity::planar([0.1, -0.05], 0.3);
    let series = evolve(&psi, &sys1, &v, &shift, &SolverParams::new(0.01, 200, Backend::SplitStep))?;
    checks.push(CheckResult::below("unitarity", max_norm_step(&series), 1e-12, "norm drift per step"));
    let csv = observables_csv(&rows(&series), sys1.total_mass());

    // linearity of the step
    let a = gaussian_packet(&g2, &sys1, &[vec![0.5, 0.0]], &[1.0, 1.0], &[0.0, 0.3])?;
    let b = gaussian_packet(&g2, &sys1, &[vec![-0.5, 0.2]], &[1.0, 1.0], &[0.4, 0.0])?;
    let (ca, cb) = (crate::Complex64::new(0.6, 0.2), crate::Complex64::new(-0.3, 0.7));
    let mix: Vec<_> = a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| ca * x + cb * y).collect();
    let params = SolverParams::new(0.01, 5, Backend::SplitStep);
    let step = |w: &WaveFunction| -> Result<Vec<crate::Complex64>, IoError> {
        Ok(evolve(w, &sys1, &v, &shift, &params)?.final_state().expect("final").amplitudes().to_vec())
    };
    let (ua, ub) = (step(&a)?, step(&b)?);
    let mix = a.with_amplitudes(mix, 0.0);
    let scale = mix.norm_squared().sqrt();
    let umix = step(&mix.normalized()?)?;
    let lin = umix
        .iter()
        .zip(ua.iter().zip(&ub))
        .map(|(m, (x, y))| (scale * m - (ca * x + cb * y)).norm())
        .fold(0.0, f64::max);
    checks.push(CheckResult::below("linearity", lin, 1e-12, "max pointwise superposition error"));

    // continuity residual order, free and trapped
    let g1 = GridSpec::uniform(1, 1, 128, 24.0)?;
    let packet = periodic_packet(&g1, &[0.3], 9.0, &[0.8])?;
    let mut worst_order = 4.0f64;
    for pot in [PotentialSpec::Free, v.clone()] {
        let mut res = Vec::new();
        for dt in [0.02, 0.01] {
            let s = evolve(&packet, &sys1, &pot, &ShiftVelocity::zero(1), &SolverParams::new(dt, 1, Backend::CrankNicolson))?;
            let e0 = wf_to_epistemic(&s.records[0].state, 1.0)?;
            let e1 = wf_to_epistemic(s.final_state().expect("final"), 1.0)?;
            res.push(continuity_residual(&e0, &e1, &sys1, &ShiftVelocity::zero(1))?);
        }
        let ratio = res[0] / res[1];
        if (ratio - 4.0).abs() > (worst_order - 4.0).abs() {
            worst_order = ratio;
        }
    }
    checks.push(CheckResult::within("continuity-order", worst_order, 3.5, 4.5, "residual ratio on halving dt"));

    // translational best matching
    let g1w = GridSpec::uniform(1, 1, 128, 32.0)?;
    let boosted = gaussian_packet(&g1w, &sys1, &[vec![0.0]], &[1.0], &[1.7])?;
    let analytic = best_match_translation(&boosted, &sys1, &PotentialSpec::Free, 1e-3)?;
    let numeric = numerical_best_match(
        &boosted,
        &sys1,
        &PotentialSpec::Free,
        1e-3,
        &SearchDomain::translations(vec![(0.0, 3.0)]),
        Backend::SplitStep,
    )?;
    checks.push(CheckResult::below(
        "translation-best-match",
        (analytic.lambda_dot[0] - numeric.lambda_dot[0]).abs(),
        1e-4,
        "analytic vs numerical lambda_dot",
    ));

    // rotational best matching on the vortex
    let gv = GridSpec::uniform(2, 1, 48, 16.0)?;
    let vortex = vortex_state(&gv, 1.0, 1)?;
    let rot = best_match_rotation(&vortex, &sys1, &PotentialSpec::Free, 1e-3)?;
    checks.push(CheckResult::below("rotation-best-match", (rot.zeta_dot[2] - 0.5).abs(), 1e-6, "vortex zeta_dot - 1/2"));

    // constraint conservation for a relational pair potential
    let gp = GridSpec::uniform(1, 2, 128, 32.0)?;
    let sys2 = ParticleSystem::new(vec![1.0, 2.0], 1.0)?;
    let pair = gaussian_packet(&gp, &sys2, &[vec![0.8], vec![-0.6]], &[1.0, 1.0], &[0.6, -0.2])?;
    let spring = PotentialSpec::PairSpring { spring: 1.0 };
    let dt = 0.01;
    let s = evolve_with_policy(&pair, &sys2, &spring, &SolverParams::new(dt, 100, Backend::SplitStep), |w| {
        policy_shift(PolicyKind::BestMatchTranslation, w, &sys2, &spring, dt)
    })?;
    let pairs: Vec<_> = s.records.iter().map(|r| (r.report, r.shift)).collect();
    let c = constraint_check(&pairs, sys2.total_mass(), &spring, 1e-6);
    checks.push(CheckResult::below("momentum-constraint", c.momentum_residual, 1e-6, "max |P - M lambda_dot|"));

    // maximum-entropy kernel
    let mut kl = 0.0f64;
    for _ in 0..10 {
        let alpha = rng.random_range(0.5..10.0);
        let slope = rng.random_range(-2.0..2.0);
        let ap = rng.random_range(0.1..3.0);
        let p = MaxEntProblem::for_multiplier(alpha, slope, ap, 0.1 / alpha.sqrt())?;
        kl = kl.max(maxent_transition_oracle(&p)?.kl_divergence.abs());
    }
    checks.push(CheckResult::below("maxent-kernel", kl, 1e-8, "max KL to the closed-form Gaussian"));

    // ontic ensemble against the stationary density
    let gs = GridSpec::uniform(1, 1, 128, 20.0)?;
    let ground = gaussian_packet(&gs, &sys1, &[vec![0.0]], &[0.5f64.sqrt()], &[0.0])?;
    let s = evolve(&ground, &sys1, &v, &ShiftVelocity::zero(1), &SolverParams::new(0.01, 100, Backend::SplitStep))?;
    let states: Vec<_> = s.records.iter().map(|r| r.state.clone()).collect();
    let ens = sample_ensemble(&states, &sys1, &ShiftVelocity::zero(1), &SamplerOptions::new(20_000, seed))?;
    let cmp = ensemble_density_compare(&ens, states.last().expect("states"))?;
    checks.push(CheckResult::below("ensemble-density", cmp.total_variation, 0.05, format!("p = {:.3}", cmp.p_value)));

    // lapse relabeling
    let lapse_a = LapseProfile::constant(0.0, 1.0, 0.5);
    let lapse_b = LapseProfile::sinusoidal(0.0, 1.0, 0.5, 0.3, 2.0 * std::f64::consts::PI, 0.0);
    let start = boosted_in(&g1w, &sys1)?;
    let ra = parametrized_evolve(&start, &sys1, &v, &ShiftVelocity::zero(1), &lapse_a, 100, Backend::CrankNicolson, 1e-13)?;
    let rb = parametrized_evolve(&start, &sys1, &v, &ShiftVelocity::zero(1), &lapse_b, 400, Backend::CrankNicolson, 1e-13)?;
    checks.push(CheckResult::below(
        "lapse-relabeling",
        1.0 - ra.final_state.fidelity(&rb.final_state)?,
        1e-8,
        "infidelity between lapses of equal integral",
    ));
    checks.push(CheckResult::below(
        "super-hamiltonian",
        ra.super_hamiltonian_residual.max(rb.super_hamiltonian_residual),
        1e-8,
        "max |pi0 + H|",
    ));

    // checkpoint format
    let bytes = encode_checkpoint(&psi, &sys1);
    let same = decode_checkpoint(&bytes)?.state == psi;
    checks.push(CheckResult::below("checkpoint-round-trip", if same { 0.0 } else { 1.0 }, 0.5, "bit-exact decode"));
    Ok(csv)
}

fn boosted_in(g: &GridSpec, sys: &ParticleSystem) -> Result<WaveFunction, IoError> {
    Ok(gaussian_packet(g, sys, &[vec![0.5]], &[1.0], &[0.7])?)
}

fn config_checks(cfg: &ExperimentConfig, seed: u64, checks: &mut Checks) -> Result<String, IoError> {
    let system = cfg.particle_system()?;
    let psi = cfg.initial_state()?;
    let v = cfg.potential.clone();
    let params = cfg.solver_params();
    let shift = match cfg.shift.policy {
        PolicyKind::Fixed => cfg.fixed_shift()?,
        p => policy_shift(p, &psi, &system, &v, params.dt)?,
    };
    let series = evolve(&psi, &system, &v, &shift, &params)?;
    checks.push(CheckResult::below("unitarity", max_norm_step(&series), 1e-12, "norm drift per step"));
    if let Ok(state) = wf_to_epistemic(&psi, system.hbar()) {
        let back = epistemic_to_wf(&state, system.hbar());
        checks.push(CheckResult::below("chart-round-trip", 1.0 - back.fidelity(&psi)?, 1e-12, "infidelity"));
    }
    if cfg.shift.policy.is_best_match() && v.is_relational() {
        let pairs: Vec<_> = series.records.iter().map(|r| (r.report, r.shift)).collect();
        let c = constraint_check(&pairs, system.total_mass(), &v, cfg.checks.constraint_tolerance);
        checks.push(CheckResult::below("momentum-constraint", c.momentum_residual, c.tolerance, "max |P - M lambda_dot|"));
        if cfg.shift.policy.rotational() {
            checks.push(CheckResult::below("angular-constraint", c.angular_residual, c.tolerance, "max |L - I zeta_dot|"));
        }
    }
    if let Some(opts) = &cfg.sampler {
        let full = evolve(&psi, &system, &v, &shift, &params.with_stride(1))?;
        let states: Vec<_> = full.records.iter().map(|r| r.state.clone()).collect();
        let opts = SamplerOptions { seed, ..opts.clone() };
        let ens = sample_ensemble(&states, &system, &shift, &opts)?;
        let cmp = ensemble_density_compare(&ens, states.last().expect("states"))?;
        checks.push(CheckResult::below("ensemble-density", cmp.total_variation, cfg.checks.tv_bound, format!("p = {:.3}", cmp.p_value)));
    }
    Ok(observables_csv(&rows(&series), system.total_mass()))
}
