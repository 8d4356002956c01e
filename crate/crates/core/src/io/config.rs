//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::evolution::{Backend, LapseProfile, SolverParams};
use crate::grid::GridSpec;
use crate::potential::PotentialSpec;
use crate::sampler::SamplerOptions;
use crate::shift::ShiftVelocity;
use crate::state::{gaussian_packet, plane_wave, vortex_state, WaveFunction};
use crate::system::ParticleSystem;

use super::checkpoint::read_checkpoint;
use super::IoError;

/// A scalar applied to every axis, or one value per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisValues<T> {
    Uniform(T),
    PerAxis(Vec<T>),
}

impl<T: Copy> AxisValues<T> {
    pub fn expand(&self, n: usize) -> Option<Vec<T>> {
        match self {
            AxisValues::Uniform(v) => Some(vec![*v; n]),
            AxisValues::PerAxis(v) if v.len() == n => Some(v.clone()),
            AxisValues::PerAxis(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub spatial_dim: usize,
    pub points: AxisValues<usize>,
    pub length: AxisValues<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub masses: Vec<f64>,
    #[serde(default = "one")]
    pub hbar: f64,
    /// Defaults to `hbar`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialState {
    /// Product of Gaussians; `widths` are density standard deviations.
    Gaussian {
        centers: Vec<Vec<f64>>,
        widths: AxisValues<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        wavevectors: Option<Vec<f64>>,
    },
    Vortex {
        width: f64,
        #[serde(default = "unit_charge")]
        charge: i32,
    },
    PlaneWave {
        modes: Vec<i64>,
    },
    /// State read from a binary checkpoint (relative paths resolve against
    /// the config file).
    Checkpoint {
        path: PathBuf,
    },
}

fn unit_charge() -> i32 {
    1
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    #[default]
    Fixed,
    BestMatchTranslation,
    BestMatchRotation,
    BestMatchBoth,
}

impl PolicyKind {
    pub fn rotational(self) -> bool {
        matches!(self, PolicyKind::BestMatchRotation | PolicyKind::BestMatchBoth)
    }

    pub fn is_best_match(self) -> bool {
        self != PolicyKind::Fixed
    }
}

/// When a best-matching shift is computed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftUpdate {
    /// Matched once on the initial state and held.
    #[default]
    Initial,
    /// Re-matched on the state at the start of every step.
    EveryStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ZetaValue {
    Planar(f64),
    Vector([f64; 3]),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftConfig {
    #[serde(default)]
    pub policy: PolicyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_dot: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta_dot: Option<ZetaValue>,
    #[serde(default)]
    pub update: ShiftUpdate,
}

fn default_backend() -> Backend {
    Backend::SplitStep
}

fn default_tolerance() -> f64 {
    1e-13
}

fn stride_one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub dt: f64,
    pub steps: usize,
    #[serde(default = "default_backend")]
    pub backend: Backend,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "stride_one")]
    pub record_stride: usize,
    /// Write a checkpoint every this many steps (0 disables).
    #[serde(default)]
    pub checkpoint_stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LapseConfig {
    pub label_steps: usize,
    #[serde(flatten)]
    pub profile: LapseProfile,
}

fn default_directory() -> PathBuf {
    PathBuf::from("output")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: default_directory() }
    }
}

fn default_constraint_tolerance() -> f64 {
    1e-6
}

fn default_tv_bound() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksConfig {
    #[serde(default = "default_constraint_tolerance")]
    pub constraint_tolerance: f64,
    #[serde(default = "default_tv_bound")]
    pub tv_bound: f64,
    /// Exit with the acceptance-failure status when a check fails.
    #[serde(default)]
    pub enforce: bool,
}

impl Default for ChecksConfig {
    fn default() -> Self {
        Self { constraint_tolerance: default_constraint_tolerance(), tv_bound: default_tv_bound(), enforce: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub system: SystemConfig,
    #[serde(default)]
    pub potential: PotentialSpec,
    pub initial: InitialState,
    #[serde(default)]
    pub shift: ShiftConfig,
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lapse: Option<LapseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerOptions>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
    /// Directory of the config file, for resolving relative paths.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// A field that failed validation and the constraint it broke.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub constraint: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.constraint)
    }
}

/// Byte offset to 1-based line and column.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::Io { path: path.to_path_buf(), message: e.to_string() })?;
    let mut cfg = parse_config_str(&text)?;
    cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(cfg)
}

/// Parses and validates config text; relative paths resolve against the
/// working directory.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, IoError> {
    let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        IoError::Parse { line, column, message: e.message().to_string() }
    })?;
    if cfg.system.eta.is_none() {
        cfg.system.eta = Some(cfg.system.hbar);
    }
    let violations = cfg.violations();
    if violations.is_empty() { Ok(cfg) } else { Err(IoError::Validation(violations)) }
}

impl ExperimentConfig {
    pub fn particle_count(&self) -> usize {
        self.system.masses.len()
    }

    pub fn config_dim(&self) -> usize {
        self.grid.spatial_dim * self.particle_count()
    }

    /// Every violated constraint, not just the first.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut bad = |field: &str, constraint: String| {
            out.push(Violation { field: field.to_string(), constraint })
        };
        let d = self.grid.spatial_dim;
        let n = self.particle_count();
        let dim = d * n;
        if !(1..=3).contains(&d) {
            bad("grid.spatial_dim", format!("must be 1, 2 or 3 (got {d})"));
        }
        if n == 0 {
            bad("system.masses", "at least one particle is required".into());
        }
        if dim > crate::grid::MAX_CONFIG_DIM {
            bad("system.masses", format!("configuration dimension {dim} exceeds {}", crate::grid::MAX_CONFIG_DIM));
        }
        match self.grid.points.expand(dim) {
            None => bad("grid.points", format!("needs one value or {dim} values")),
            Some(p) if p.iter().any(|&p| p < 8) => bad("grid.points", "at least 8 points per axis".into()),
            _ => {}
        }
        match self.grid.length.expand(dim) {
            None => bad("grid.length", format!("needs one value or {dim} values")),
            Some(l) if l.iter().any(|l| !(*l > 0.0 && l.is_finite())) => bad("grid.length", "must be positive".into()),
            _ => {}
        }
        if self.system.masses.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            bad("system.masses", "every mass must be positive".into());
        }
        if !(self.system.hbar > 0.0 && self.system.hbar.is_finite()) {
            bad("system.hbar", "must be positive".into());
        }
        if let Some(e) = self.system.eta {
            if !(e > 0.0 && e.is_finite()) {
                bad("system.eta", "must be positive".into());
            }
        }
        if let Err(e) = self.potential.validate() {
            bad("potential", e.to_string());
        }
        match &self.initial {
            InitialState::Gaussian { centers, widths, wavevectors } => {
                if centers.len() != n || centers.iter().any(|c| c.len() != d) {
                    bad("initial.centers", format!("needs {n} centers with {d} components"));
                }
                if widths.expand(dim).is_none() {
                    bad("initial.widths", format!("needs one value or {dim} values"));
                }
                if wavevectors.as_ref().is_some_and(|k| k.len() != dim) {
                    bad("initial.wavevectors", format!("needs {dim} values"));
                }
            }
            InitialState::Vortex { width, .. } => {
                if d != 2 || n != 1 {
                    bad("initial.kind", "vortex needs one particle in two dimensions".into());
                }
                if !(*width > 0.0) {
                    bad("initial.width", "must be positive".into());
                }
            }
            InitialState::PlaneWave { modes } => {
                if modes.len() != dim {
                    bad("initial.modes", format!("needs {dim} values"));
                }
            }
            InitialState::Checkpoint { .. } => {}
        }
        let s = &self.shift;
        if d < 2 && (s.policy.rotational() || s.zeta_dot.is_some()) {
            bad("shift.zeta_dot", "rotations need spatial_dim >= 2".into());
        }
        if let Some(l) = &s.lambda_dot {
            if s.policy.is_best_match() {
                bad("shift.lambda_dot", "is set by the best-matching policy".into());
            } else if l.len() != d {
                bad("shift.lambda_dot", format!("needs {d} components"));
            }
        }
        if let Some(z) = &s.zeta_dot {
            if s.policy.is_best_match() {
                bad("shift.zeta_dot", "is set by the best-matching policy".into());
            } else {
                match (d, z) {
                    (2, ZetaValue::Planar(_)) | (3, ZetaValue::Vector(_)) => {}
                    (2, ZetaValue::Vector(_)) => bad("shift.zeta_dot", "is a scalar in two dimensions".into()),
                    (3, ZetaValue::Planar(_)) => bad("shift.zeta_dot", "is a 3-vector in three dimensions".into()),
                    _ => {}
                }
            }
        }
        let sv = &self.solver;
        if !(sv.dt > 0.0 && sv.dt.is_finite()) {
            bad("solver.dt", "must be positive".into());
        }
        if !(sv.tolerance > 0.0 && sv.tolerance < 1.0) {
            bad("solver.tolerance", "must lie in (0, 1)".into());
        }
        if sv.record_stride == 0 {
            bad("solver.record_stride", "must be at least 1".into());
        }
        if let Some(l) = &self.lapse {
            if l.label_steps == 0 {
                bad("lapse.label_steps", "must be at least 1".into());
            }
            if let Err(e) = l.profile.validate() {
                bad("lapse", e.to_string());
            }
        }
        if let Some(sm) = &self.sampler {
            if let Err(e) = sm.validate() {
                bad("sampler", e.to_string());
            }
        }
        if !(self.checks.constraint_tolerance > 0.0) {
            bad("checks.constraint_tolerance", "must be positive".into());
        }
        if !(self.checks.tv_bound > 0.0 && self.checks.tv_bound <= 1.0) {
            bad("checks.tv_bound", "must lie in (0, 1]".into());
        }
        out
    }

    pub fn grid_spec(&self) -> crate::Result<GridSpec> {
        let dim = self.config_dim();
        let points = self.grid.points.expand(dim).unwrap_or_default();
        let lengths = self.grid.length.expand(dim).unwrap_or_default();
        GridSpec::new(self.grid.spatial_dim, self.particle_count(), points, lengths)
    }

    pub fn particle_system(&self) -> crate::Result<ParticleSystem> {
        let s = &self.system;
        ParticleSystem::with_eta(s.masses.clone(), s.hbar, s.eta.unwrap_or(s.hbar))
    }

    pub fn solver_params(&self) -> SolverParams {
        let s = &self.solver;
        SolverParams::new(s.dt, s.steps, s.backend).with_tolerance(s.tolerance).with_stride(s.record_stride)
    }

    /// The fixed shift (zero unless given).
    pub fn fixed_shift(&self) -> crate::Result<ShiftVelocity> {
        let d = self.grid.spatial_dim;
        let lambda = self.shift.lambda_dot.clone().unwrap_or_else(|| vec![0.0; d]);
        let zeta = match self.shift.zeta_dot {
            None => [0.0; 3],
            Some(ZetaValue::Planar(z)) => [0.0, 0.0, z],
            Some(ZetaValue::Vector(z)) => z,
        };
        ShiftVelocity::new(d, &lambda, zeta)
    }

    pub fn resolve_path(&self, path: &Path) -> PathBuf {
        if path.is_absolute() { path.to_path_buf() } else { self.base_dir.join(path) }
    }

    pub fn initial_state(&self) -> Result<WaveFunction, IoError> {
        let grid = self.grid_spec()?;
        let system = self.particle_system()?;
        let dim = grid.config_dim();
        let psi = match &self.initial {
            InitialState::Gaussian { centers, widths, wavevectors } => {
                let w = widths.expand(dim).unwrap_or_default();
                let k = wavevectors.clone().unwrap_or_else(|| vec![0.0; dim]);
                gaussian_packet(&grid, &system, centers, &w, &k)?
            }
            InitialState::Vortex { width, charge } => vortex_state(&grid, *width, *charge)?,
            InitialState::PlaneWave { modes } => plane_wave(&grid, modes)?,
            InitialState::Checkpoint { path } => {
                let cp = read_checkpoint(&self.resolve_path(path))?;
                if cp.state.grid() != &grid {
                    return Err(IoError::Validation(vec![Violation {
                        field: "initial.path".into(),
                        constraint: "checkpoint grid differs from the configured grid".into(),
                    }]));
                }
                cp.state
            }
        };
        Ok(psi)
    }

    /// Resolved config (defaults filled) as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).unwrap_or_else(|e| format!("# unserializable config: {e}\n"))
    }
}
