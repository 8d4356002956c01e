//! Artifact writers. Text floats use 17 significant digits so every binary64
//! value round-trips; files are written to a temporary name and renamed.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::observables::ObservableReport;
use crate::sampler::TrajectoryEnsemble;
use crate::shift::ShiftVelocity;

use super::IoError;

/// Column order of `observables.csv`. Fixed within a major version.
pub const OBSERVABLES_HEADER: &str = "step,label,time,norm,norm_defect,energy,energy_imag,\
momentum_x,momentum_y,momentum_z,angular_momentum_x,angular_momentum_y,angular_momentum_z,\
inertia_xx,inertia_xy,inertia_xz,inertia_yy,inertia_yz,inertia_zz,com_x,com_y,com_z,\
lambda_dot_x,lambda_dot_y,lambda_dot_z,zeta_dot_x,zeta_dot_y,zeta_dot_z,\
momentum_residual,angular_residual";

/// One row of the observable time series.
#[derive(Debug, Clone, Copy)]
pub struct ObservableRow {
    pub step: usize,
    /// Evolution label: the time itself, or `x0` for parametrized runs.
    pub label: f64,
    pub report: ObservableReport,
    pub shift: ShiftVelocity,
}

/// `{:.16e}`: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn observables_csv(rows: &[ObservableRow], total_mass: f64) -> String {
    let mut out = String::with_capacity(512 * (rows.len() + 1));
    out.push_str(OBSERVABLES_HEADER);
    out.push('\n');
    for row in rows {
        let r = &row.report;
        let lam = row.shift.lambda_dot3();
        let zeta = row.shift.zeta_dot();
        let i = &r.inertia;
        let values = [
            row.label,
            r.time,
            r.norm,
            r.norm_defect,
            r.energy,
            r.energy_imag,
            r.momentum[0],
            r.momentum[1],
            r.momentum[2],
            r.angular_momentum[0],
            r.angular_momentum[1],
            r.angular_momentum[2],
            i[0][0],
            i[0][1],
            i[0][2],
            i[1][1],
            i[1][2],
            i[2][2],
            r.center_of_mass[0],
            r.center_of_mass[1],
            r.center_of_mass[2],
            lam[0],
            lam[1],
            lam[2],
            zeta[0],
            zeta[1],
            zeta[2],
            r.momentum_residual(total_mass, &row.shift),
            r.angular_residual(&row.shift),
        ];
        let _ = write!(out, "{}", row.step);
        for v in values {
            out.push(',');
            out.push_str(&fmt_f64(v));
        }
        out.push('\n');
    }
    out
}

/// `step,time,chain,x0,...` for every recorded instant and chain.
pub fn ensemble_csv(ensemble: &TrajectoryEnsemble) -> String {
    let mut out = String::from("step,time,chain");
    for a in 0..ensemble.dim {
        let _ = write!(out, ",x{a}");
    }
    out.push('\n');
    for ((step, time), positions) in ensemble.steps.iter().zip(&ensemble.times).zip(&ensemble.positions) {
        let t = fmt_f64(*time);
        for (chain, x) in positions.chunks(ensemble.dim).enumerate() {
            let _ = write!(out, "{step},{t},{chain}");
            for v in x {
                out.push(',');
                out.push_str(&fmt_f64(*v));
            }
            out.push('\n');
        }
    }
    out
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let err = |e: std::io::Error| IoError::Io { path: path.to_path_buf(), message: e.to_string() };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(err)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, bytes).map_err(err)?;
    std::fs::rename(&tmp, path).map_err(err)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| IoError::Io { path: path.to_path_buf(), message: e.to_string() })?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}
