use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::best_match::{
    best_match_rotation, best_match_translation, constraint_check, galilean_boost, mismatch,
    numerical_best_match, BestMatchResult, SearchDomain,
};
use crate::error::EdError;
use crate::evolution::{evolve_with_policy, parametrized_evolve, Record, SolverParams};
use crate::potential::PotentialSpec;
use crate::sampler::{ensemble_density_compare, sample_ensemble, SamplerOptions};
use crate::shift::ShiftVelocity;
use crate::state::WaveFunction;
use crate::system::ParticleSystem;

use super::checkpoint::write_checkpoint;
use super::config::{ExperimentConfig, PolicyKind, ShiftUpdate};
use super::output::{ensemble_csv, observables_csv, write_atomic, write_json, ObservableRow};
use super::IoError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Evolve,
    BestMatch,
    Sample,
    Parametrized,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Evolve => "evolve",
            Command::BestMatch => "best-match",
            Command::Sample => "sample",
            Command::Parametrized => "parametrized",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub summary: Value,
    /// Names of failed checks.
    pub failures: Vec<String>,
}

/// Best-matching shift for `psi` under a policy. Rotational matching is done
/// on the state boosted to zero momentum.
pub fn policy_shift(
    policy: PolicyKind,
    psi: &WaveFunction,
    system: &ParticleSystem,
    potential: &PotentialSpec,
    dt: f64,
) -> crate::Result<ShiftVelocity> {
    let d = psi.grid().spatial_dim();
    let translation = || best_match_translation(psi, system, potential, dt).map(|r| r.lambda_dot);
    let rotation = |lambda: &[f64]| -> crate::Result<[f64; 3]> {
        let rest = galilean_boost(psi, system, lambda)?;
        Ok(best_match_rotation(&rest, system, potential, dt)?.zeta_dot)
    };
    match policy {
        PolicyKind::Fixed => Err(EdError::InvalidParameter("fixed policy has no matching rule".into())),
        PolicyKind::BestMatchTranslation => ShiftVelocity::new(d, &translation()?, [0.0; 3]),
        PolicyKind::BestMatchRotation => ShiftVelocity::new(d, &vec![0.0; d], rotation(&vec![0.0; d])?),
        PolicyKind::BestMatchBoth => {
            let lambda = translation()?;
            let zeta = rotation(&lambda)?;
            ShiftVelocity::new(d, &lambda, zeta)
        }
    }
}

struct Context {
    system: ParticleSystem,
    potential: PotentialSpec,
    psi0: WaveFunction,
    out: PathBuf,
}

fn context(cfg: &ExperimentConfig) -> Result<Context, IoError> {
    Ok(Context {
        system: cfg.particle_system()?,
        potential: cfg.potential.clone(),
        psi0: cfg.initial_state()?,
        out: cfg.resolve_path(&cfg.output.directory),
    })
}

fn evolve_config(cfg: &ExperimentConfig, ctx: &Context, params: &SolverParams) -> Result<crate::evolution::Series, IoError> {
    let policy = cfg.shift.policy;
    let dt = params.dt;
    let series = match (policy, cfg.shift.update) {
        (PolicyKind::Fixed, _) => {
            let fixed = cfg.fixed_shift()?;
            evolve_with_policy(&ctx.psi0, &ctx.system, &ctx.potential, params, |_| Ok(fixed))?
        }
        (_, ShiftUpdate::Initial) => {
            let s = policy_shift(policy, &ctx.psi0, &ctx.system, &ctx.potential, dt)?;
            evolve_with_policy(&ctx.psi0, &ctx.system, &ctx.potential, params, |_| Ok(s))?
        }
        (_, ShiftUpdate::EveryStep) => evolve_with_policy(&ctx.psi0, &ctx.system, &ctx.potential, params, |psi| {
            policy_shift(policy, psi, &ctx.system, &ctx.potential, dt)
        })?,
    };
    Ok(series)
}

fn rows_from_records(records: &[Record]) -> Vec<ObservableRow> {
    records
        .iter()
        .map(|r| ObservableRow { step: r.step, label: r.report.time, report: r.report, shift: r.shift })
        .collect()
}

fn drift_metrics(rows: &[ObservableRow]) -> Value {
    let first = &rows[0].report;
    let norm = rows.iter().map(|r| (r.report.norm - 1.0).abs()).fold(0.0, f64::max);
    let energy = rows.iter().map(|r| (r.report.energy - first.energy).abs()).fold(0.0, f64::max);
    json!({ "max_norm_deviation": norm, "max_energy_drift": energy })
}

fn write_checkpoints(cfg: &ExperimentConfig, ctx: &Context, records: &[Record]) -> Result<Vec<String>, IoError> {
    let mut written = Vec::new();
    let stride = cfg.solver.checkpoint_stride;
    let dir = ctx.out.join("checkpoints");
    for r in records {
        if stride > 0 && r.step % stride == 0 {
            let name = format!("step_{:08}.edwf", r.step);
            write_checkpoint(&r.state, &ctx.system, &dir.join(&name))?;
            written.push(name);
        }
    }
    if let Some(last) = records.last() {
        write_checkpoint(&last.state, &ctx.system, &ctx.out.join("final.edwf"))?;
    }
    Ok(written)
}

fn result_json(r: &BestMatchResult) -> Value {
    serde_json::to_value(r).unwrap_or(Value::Null)
}

fn finish(cfg: &ExperimentConfig, ctx: &Context, command: Command, mut summary: Value, failures: Vec<String>) -> Result<RunOutcome, IoError> {
    summary["command"] = json!(command.name());
    summary["failed_checks"] = json!(failures);
    let status = if failures.is_empty() || !cfg.checks.enforce { "ok" } else { "check-failed" };
    summary["status"] = json!(status);
    write_json(&ctx.out.join("summary.json"), &summary)?;
    if status != "ok" {
        return Err(IoError::CheckFailed(failures));
    }
    Ok(RunOutcome { output_dir: ctx.out.clone(), summary, failures })
}

/// Runs one subcommand and writes its artifacts into the configured output
/// directory.
pub fn run_experiment(cfg: &ExperimentConfig, command: Command) -> Result<RunOutcome, IoError> {
    let ctx = context(cfg)?;
    std::fs::create_dir_all(&ctx.out).map_err(|e| IoError::Io { path: ctx.out.clone(), message: e.to_string() })?;
    write_atomic(&ctx.out.join("config.resolved.toml"), cfg.to_toml().as_bytes())?;
    match command {
        Command::Evolve => run_evolve(cfg, &ctx),
        Command::Sample => run_sample(cfg, &ctx),
        Command::BestMatch => run_best_match(cfg, &ctx),
        Command::Parametrized => run_parametrized(cfg, &ctx),
    }
}

fn run_evolve(cfg: &ExperimentConfig, ctx: &Context) -> Result<RunOutcome, IoError> {
    let params = cfg.solver_params();
    let series = evolve_config(cfg, ctx, &params)?;
    let rows = rows_from_records(&series.records);
    let m = ctx.system.total_mass();
    write_atomic(&ctx.out.join("observables.csv"), observables_csv(&rows, m).as_bytes())?;
    let checkpoints = write_checkpoints(cfg, ctx, &series.records)?;
    let pairs: Vec<_> = series.records.iter().map(|r| (r.report, r.shift)).collect();
    let constraints = constraint_check(&pairs, m, &ctx.potential, cfg.checks.constraint_tolerance);
    let mut failures = Vec::new();
    if cfg.shift.policy.is_best_match() {
        if !constraints.momentum_pass {
            failures.push("momentum-constraint".to_string());
        }
        if cfg.shift.policy.rotational() && !constraints.angular_pass {
            failures.push("angular-constraint".to_string());
        }
    }
    let last = series.records.last().expect("initial record");
    let summary = json!({
        "steps": cfg.solver.steps,
        "dt": cfg.solver.dt,
        "backend": cfg.solver.backend,
        "final_time": last.report.time,
        "final_report": last.report,
        "final_shift": { "lambda_dot": last.shift.lambda_dot(), "zeta_dot": last.shift.zeta_dot() },
        "drift": drift_metrics(&rows),
        "solver_iterations": series.solver_iterations,
        "constraint_check": constraints,
        "constraint_check_passed": constraints.passed(),
        "checkpoints": checkpoints,
    });
    finish(cfg, ctx, Command::Evolve, summary, failures)
}

fn run_sample(cfg: &ExperimentConfig, ctx: &Context) -> Result<RunOutcome, IoError> {
    let options: SamplerOptions = cfg.sampler.clone().ok_or_else(|| {
        IoError::Validation(vec![super::Violation {
            field: "sampler".into(),
            constraint: "the sample command needs a [sampler] block".into(),
        }])
    })?;
    // the sampler needs the state at every step
    let params = cfg.solver_params().with_stride(1);
    let series = evolve_config(cfg, ctx, &params)?;
    let rows = rows_from_records(&series.records);
    let m = ctx.system.total_mass();
    let recorded: Vec<ObservableRow> = rows
        .iter()
        .copied()
        .filter(|r| r.step % cfg.solver.record_stride == 0 || r.step == cfg.solver.steps)
        .collect();
    write_atomic(&ctx.out.join("observables.csv"), observables_csv(&recorded, m).as_bytes())?;
    let states: Vec<WaveFunction> = series.records.iter().map(|r| r.state.clone()).collect();
    let shift = series.records[0].shift;
    if series.records.iter().any(|r| r.shift != shift) {
        log::warn!("shift changed during the run; the sampler uses the initial shift");
    }
    let ensemble = sample_ensemble(&states, &ctx.system, &shift, &options)?;
    write_atomic(&ctx.out.join("ensemble.csv"), ensemble_csv(&ensemble).as_bytes())?;
    let comparison = ensemble_density_compare(&ensemble, states.last().expect("states"))?;
    let mut failures = Vec::new();
    if !comparison.passes(cfg.checks.tv_bound) {
        failures.push("ensemble-density".to_string());
    }
    if ensemble.flagged() {
        failures.push("drift-clamping".to_string());
    }
    let summary = json!({
        "steps": cfg.solver.steps,
        "dt": cfg.solver.dt,
        "chains": ensemble.chains,
        "seed": ensemble.seed,
        "final_time": ensemble.times.last(),
        "density_comparison": comparison,
        "tv_bound": cfg.checks.tv_bound,
        "clamps": ensemble.clamps,
        "clamp_fraction": ensemble.clamp_fraction(),
        "clamp_flagged": ensemble.flagged(),
        "final_mean": ensemble.mean(ensemble.positions.len() - 1),
        "drift": drift_metrics(&rows),
    });
    finish(cfg, ctx, Command::Sample, summary, failures)
}

fn search_domain(d: usize, center: &ShiftVelocity, rotations: bool) -> SearchDomain {
    let span = |c: f64| (c - c.abs().max(0.5), c + c.abs().max(0.5));
    let lambda = center.lambda_dot().iter().map(|&c| span(c)).collect();
    let zeta = match (rotations, d) {
        (false, _) | (_, 1) => Vec::new(),
        (true, 2) => vec![span(center.zeta_dot()[2])],
        (true, _) => center.zeta_dot().iter().map(|&c| span(c)).collect(),
    };
    SearchDomain { lambda, zeta }
}

fn run_best_match(cfg: &ExperimentConfig, ctx: &Context) -> Result<RunOutcome, IoError> {
    let dt = cfg.solver.dt;
    let backend = cfg.solver.backend;
    let psi = &ctx.psi0;
    let d = psi.grid().spatial_dim();
    let policy = match cfg.shift.policy {
        PolicyKind::Fixed => PolicyKind::BestMatchTranslation,
        p => p,
    };
    let mut out = json!({ "policy": policy, "dt": dt });
    let translation = best_match_translation(psi, &ctx.system, &ctx.potential, dt)?;
    out["translation"] = result_json(&translation);
    if policy.rotational() {
        let rest = galilean_boost(psi, &ctx.system, &translation.lambda_dot)?;
        let rotation = best_match_rotation(&rest, &ctx.system, &ctx.potential, dt)?;
        out["rotation"] = result_json(&rotation);
    }
    let analytic = policy_shift(policy, psi, &ctx.system, &ctx.potential, dt)?;
    let domain = search_domain(d, &analytic, policy.rotational());
    let numerical = numerical_best_match(psi, &ctx.system, &ctx.potential, dt, &domain, backend)?;
    let numeric_shift = numerical.shift()?;
    let gap = analytic
        .lambda_dot3()
        .iter()
        .zip(numeric_shift.lambda_dot3())
        .chain(analytic.zeta_dot().iter().zip(numeric_shift.zeta_dot()))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    out["numerical"] = result_json(&numerical);
    out["analytic_numerical_gap"] = json!(gap);
    out["mismatch_at_analytic"] = serde_json::to_value(mismatch(psi, &ctx.system, &ctx.potential, &analytic, dt, backend)?)
        .unwrap_or(Value::Null);
    out["mismatch_unshifted"] = serde_json::to_value(mismatch(
        psi,
        &ctx.system,
        &ctx.potential,
        &ShiftVelocity::zero(d),
        dt,
        backend,
    )?)
    .unwrap_or(Value::Null);
    write_json(&ctx.out.join("best_match.json"), &out)?;
    let mut failures = Vec::new();
    if gap > 1e-4 {
        failures.push("analytic-vs-numerical".to_string());
    }
    if numerical.non_convex {
        failures.push("non-convex-mismatch".to_string());
    }
    finish(cfg, ctx, Command::BestMatch, out, failures)
}

fn run_parametrized(cfg: &ExperimentConfig, ctx: &Context) -> Result<RunOutcome, IoError> {
    let lapse = cfg.lapse.as_ref().ok_or_else(|| {
        IoError::Validation(vec![super::Violation {
            field: "lapse".into(),
            constraint: "the parametrized command needs a [lapse] block".into(),
        }])
    })?;
    let shift = match cfg.shift.policy {
        PolicyKind::Fixed => cfg.fixed_shift()?,
        p => policy_shift(p, &ctx.psi0, &ctx.system, &ctx.potential, cfg.solver.dt)?,
    };
    let run = parametrized_evolve(
        &ctx.psi0,
        &ctx.system,
        &ctx.potential,
        &shift,
        &lapse.profile,
        lapse.label_steps,
        cfg.solver.backend,
        cfg.solver.tolerance,
    )?;
    let rows: Vec<ObservableRow> = run
        .reports
        .iter()
        .zip(&run.clock)
        .enumerate()
        .filter(|(k, _)| k % cfg.solver.record_stride == 0 || *k == lapse.label_steps)
        .map(|(k, (report, (label, _)))| ObservableRow { step: k, label: *label, report: *report, shift })
        .collect();
    let m = ctx.system.total_mass();
    write_atomic(&ctx.out.join("observables.csv"), observables_csv(&rows, m).as_bytes())?;
    write_checkpoint(&run.final_state, &ctx.system, &ctx.out.join("final.edwf"))?;
    let mut failures = Vec::new();
    if run.super_hamiltonian_residual > 1e-8 {
        failures.push("super-hamiltonian".to_string());
    }
    let summary = json!({
        "label_steps": lapse.label_steps,
        "label_domain": [lapse.profile.start, lapse.profile.end],
        "duration": lapse.profile.duration(),
        "final_time": run.final_state.time(),
        "pi0": run.pi0,
        "super_hamiltonian_residual": run.super_hamiltonian_residual,
        "final_report": run.reports.last(),
    });
    finish(cfg, ctx, Command::Parametrized, summary, failures)
}

/// Writes `summary.json` for a failed run so the failure is machine-readable
/// on disk as well as on stderr.
pub fn write_failure_summary(dir: &Path, command: &str, error: &IoError) {
    let value = json!({
        "command": command,
        "status": "error",
        "exit_code": error.exit_code(),
        "kind": error.kind(),
        "message": error.to_string(),
    });
    if std::fs::create_dir_all(dir).is_ok() {
        let _ = write_json(&dir.join("summary.json"), &value);
    }
}
