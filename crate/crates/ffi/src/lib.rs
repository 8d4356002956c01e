//! C ABI over `edlab`.
//!
//! Every entry point returns an [`EdStatus`]; results come back through out
//! pointers. Objects are opaque handles created by `ed_*_new` style functions
//! and released with the matching `ed_*_free`. After a non-OK status,
//! [`ed_last_error`] describes the failure on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use edlab::best_match::{best_match_rotation, best_match_translation};
use edlab::evolution::{evolve, Backend, SolverParams};
use edlab::io::{self, read_checkpoint, run_experiment, run_verify, write_checkpoint, IoError};
use edlab::observables::report_for;
use edlab::state::{gaussian_packet, vortex_state};
use edlab::{Complex64, EdError, GridSpec, ParticleSystem, PotentialSpec, ShiftVelocity, WaveFunction};

/// Status codes returned by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Configuration, parse or validation problem.
    Config = 3,
    /// Numerical failure in the core (node error, solver divergence, ...).
    Numerical = 4,
    /// A run finished but its acceptance checks failed.
    CheckFailed = 5,
    /// File system or checkpoint format error.
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdBackend {
    SplitStep = 0,
    CrankNicolson = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdPotentialKind {
    Free = 0,
    /// `strength` is the spring constant.
    PairSpring = 1,
    /// `strength` is the depth, `width` the range.
    PairGaussian = 2,
    /// `strength` is the trap frequency.
    ExternalHarmonic = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EdPotential {
    pub kind: EdPotentialKind,
    pub strength: f64,
    pub width: f64,
}

/// Rigid shift velocity. Components beyond the spatial dimension must be
/// zero; in 2D only `zeta_dot[2]` may be nonzero.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct EdShift {
    pub lambda_dot: [f64; 3],
    pub zeta_dot: [f64; 3],
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct EdObservables {
    pub time: f64,
    pub norm: f64,
    pub energy: f64,
    pub momentum: [f64; 3],
    pub angular_momentum: [f64; 3],
    pub center_of_mass: [f64; 3],
    /// Row-major 3x3 inertia tensor.
    pub inertia: [f64; 9],
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdCommand {
    Evolve = 0,
    BestMatch = 1,
    Sample = 2,
    Parametrized = 3,
}

/// Opaque periodic configuration-space grid.
pub struct EdGrid(GridSpec);
/// Opaque particle system (masses, hbar, eta).
pub struct EdSystem(ParticleSystem);
/// Opaque wave function on a grid.
pub struct EdState(WaveFunction);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

enum Failure {
    Null(&'static str),
    Arg(String),
    Core(EdError),
    Io(IoError),
}

impl From<EdError> for Failure {
    fn from(e: EdError) -> Self {
        Failure::Core(e)
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::Io(e)
    }
}

fn io_status(e: &IoError) -> EdStatus {
    match e {
        IoError::Numerical(_) => EdStatus::Numerical,
        IoError::CheckFailed(_) => EdStatus::CheckFailed,
        IoError::Parse { .. } | IoError::Validation(_) => EdStatus::Config,
        _ => EdStatus::Io,
    }
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> EdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EdStatus::Ok,
        Ok(Err(Failure::Null(name))) => {
            set_error(&format!("null pointer: {name}"));
            EdStatus::NullPointer
        }
        Ok(Err(Failure::Arg(msg))) => {
            set_error(&msg);
            EdStatus::InvalidArgument
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(&e.to_string());
            match e {
                EdError::InvalidParameter(_) | EdError::DimensionError(_) => EdStatus::InvalidArgument,
                _ => EdStatus::Numerical,
            }
        }
        Ok(Err(Failure::Io(e))) => {
            set_error(&e.to_string());
            io_status(&e)
        }
        Err(_) => {
            set_error("panic inside edlab");
            EdStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn path(p: *const c_char, name: &'static str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| Failure::Arg(format!("{name} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn put<T>(out: *mut *mut T, value: T, name: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(name));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn potential(p: &EdPotential) -> PotentialSpec {
    match p.kind {
        EdPotentialKind::Free => PotentialSpec::Free,
        EdPotentialKind::PairSpring => PotentialSpec::PairSpring { spring: p.strength },
        EdPotentialKind::PairGaussian => PotentialSpec::PairGaussian { depth: p.strength, width: p.width },
        EdPotentialKind::ExternalHarmonic => PotentialSpec::ExternalHarmonic { omega: p.strength },
    }
}

fn shift(s: &EdShift, spatial_dim: usize) -> Result<ShiftVelocity, Failure> {
    if s.lambda_dot[spatial_dim..].iter().any(|&v| v != 0.0) {
        return Err(Failure::Arg(format!("lambda_dot has components beyond dimension {spatial_dim}")));
    }
    Ok(ShiftVelocity::new(spatial_dim, &s.lambda_dot[..spatial_dim], s.zeta_dot)?)
}

fn backend(b: EdBackend) -> Backend {
    match b {
        EdBackend::SplitStep => Backend::SplitStep,
        EdBackend::CrankNicolson => Backend::CrankNicolson,
    }
}

/// Message for the last failure on this thread. Valid until the next failing
/// call on the same thread; never NULL.
#[no_mangle]
pub extern "C" fn ed_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ed_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a grid with `spatial_dim * particle_count` axes.
///
/// # Safety
/// `points` and `lengths` must each point to `spatial_dim * particle_count`
/// readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ed_grid_new(
    spatial_dim: usize,
    particle_count: usize,
    points: *const usize,
    lengths: *const f64,
    out: *mut *mut EdGrid,
) -> EdStatus {
    guard(|| {
        let n = spatial_dim.checked_mul(particle_count).ok_or(Failure::Arg("axis count overflows".into()))?;
        let p = slice(points, n, "points")?.to_vec();
        let l = slice(lengths, n, "lengths")?.to_vec();
        put(out, EdGrid(GridSpec::new(spatial_dim, particle_count, p, l)?), "out")
    })
}

/// # Safety
/// `grid` must come from [`ed_grid_new`] and not be freed twice. NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn ed_grid_free(grid: *mut EdGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Number of grid points.
///
/// # Safety
/// `grid` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ed_grid_len(grid: *const EdGrid, out: *mut usize) -> EdStatus {
    guard(|| {
        let g = deref(grid, "grid")?;
        *out.as_mut().ok_or(Failure::Null("out"))? = g.0.len();
        Ok(())
    })
}

/// Creates a particle system. Pass `eta <= 0` for `eta = hbar`.
///
/// # Safety
/// `masses` must point to `count` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ed_system_new(
    masses: *const f64,
    count: usize,
    hbar: f64,
    eta: f64,
    out: *mut *mut EdSystem,
) -> EdStatus {
    guard(|| {
        let m = slice(masses, count, "masses")?.to_vec();
        let sys = if eta > 0.0 { ParticleSystem::with_eta(m, hbar, eta)? } else { ParticleSystem::new(m, hbar)? };
        put(out, EdSystem(sys), "out")
    })
}

/// # Safety
/// `system` must come from this library and not be freed twice. NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn ed_system_free(system: *mut EdSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// Product Gaussian packet. `centers` holds `particle_count * spatial_dim`
/// values (particle-major), `widths` one per particle and `wavevectors` one
/// per configuration axis.
///
/// # Safety
/// Pointers must be live handles or arrays of the sizes above; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ed_state_gaussian(
    grid: *const EdGrid,
    system: *const EdSystem,
    centers: *const f64,
    widths: *const f64,
    wavevectors: *const f64,
    out: *mut *mut EdState,
) -> EdStatus {
    guard(|| {
        let g = &deref(grid, "grid")?.0;
        let sys = &deref(system, "system")?.0;
        let (n, d) = (g.particle_count(), g.spatial_dim());
        let c: Vec<Vec<f64>> = slice(centers, n * d, "centers")?.chunks(d).map(<[f64]>::to_vec).collect();
        let w = slice(widths, n, "widths")?;
        let k = slice(wavevectors, n * d, "wavevectors")?;
        put(out, EdState(gaussian_packet(g, sys, &c, w, k)?), "out")
    })
}

/// Single-particle 2D vortex `(x + i y)^charge exp(-r^2 / 2 width^2)`.
///
/// # Safety
/// `grid` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ed_state_vortex(grid: *const EdGrid, width: f64, charge: i32, out: *mut *mut EdState) -> EdStatus {
    guard(|| {
        let g = &deref(grid, "grid")?.0;
        put(out, EdState(vortex_state(g, width, charge)?), "out")
    })
}

/// State from interleaved `(re, im)` amplitudes in row-major axis order.
///
/// # Safety
/// `amplitudes` must point to `2 * len` readable values where `len` is the
/// grid size; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ed_state_from_amplitudes(
    grid: *const EdGrid,
    amplitudes: *const f64,
    len: usize,
    time: f64,
    out: *mut *mut EdState,
) -> EdStatus {
    guard(|| {
        let g = &deref(grid, "grid")?.0;
        if len != g.len() {
            return Err(Failure::Arg(format!("expected {} amplitudes, got {len}", g.len())));
        }
        let raw = slice(amplitudes, 2 * len, "amplitudes")?;
        let amps = raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        put(out, EdState(WaveFunction::new(g.clone(), amps, time)?), "out")
    })
}

/// # Safety
/// `state` must come from this library and not be freed twice. NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn ed_state_free(state: *mut EdState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Number of amplitudes and the state's time stamp.
///
/// # Safety
/// `state` must be a live handle; out pointers may be NULL when not wanted.
#[no_mangle]
pub unsafe extern "C" fn ed_state_info(state: *const EdState, len: *mut usize, time: *mut f64) -> EdStatus {
    guard(|| {
        let s = &deref(state, "state")?.0;
        if let Some(l) = len.as_mut() {
            *l = s.amplitudes().len();
        }
        if let Some(t) = time.as_mut() {
            *t = s.time();
        }
        Ok(())
    })
}

/// Copies interleaved `(re, im)` amplitudes into `out`, which must hold
/// `2 * len` values.
///
/// # Safety
/// `state` must be a live handle; `out` must point to `2 * len` writable values.
#[no_mangle]
pub unsafe extern "C" fn ed_state_amplitudes(state: *const EdState, out: *mut f64, len: usize) -> EdStatus {
    guard(|| {
        let s = &deref(state, "state")?.0;
        let amps = s.amplitudes();
        if len != amps.len() {
            return Err(Failure::Arg(format!("buffer holds {len} amplitudes, state has {}", amps.len())));
        }
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let buf = std::slice::from_raw_parts_mut(out, 2 * len);
        for (dst, z) in buf.chunks_exact_mut(2).zip(amps) {
            dst[0] = z.re;
            dst[1] = z.im;
        }
        Ok(())
    })
}

/// Observable functionals of `state` under the shifted Hamiltonian.
///
/// # Safety
/// All pointers must be live handles or valid structs; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ed_observables(
    state: *const EdState,
    system: *const EdSystem,
    potential_spec: *const EdPotential,
    shift_velocity: *const EdShift,
    out: *mut EdObservables,
) -> EdStatus {
    guard(|| {
        let s = &deref(state, "state")?.0;
        let sys = &deref(system, "system")?.0;
        let v = potential(deref(potential_spec, "potential")?);
        let w = shift(deref(shift_velocity, "shift")?, s.grid().spatial_dim())?;
        let r = report_for(s, sys, &v, &w)?;
        let o = out.as_mut().ok_or(Failure::Null("out"))?;
        let mut inertia = [0.0; 9];
        for (i, row) in r.inertia.iter().enumerate() {
            inertia[3 * i..3 * i + 3].copy_from_slice(row);
        }
        *o = EdObservables {
            time: r.time,
            norm: r.norm,
            energy: r.energy,
            momentum: r.momentum,
            angular_momentum: r.angular_momentum,
            center_of_mass: r.center_of_mass,
            inertia,
        };
        Ok(())
    })
}

/// Evolves `state` by `steps` steps of size `dt` under a fixed shift and
/// returns the final state as a new handle.
///
/// # Safety
/// All pointers must be live handles or valid structs; `out` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn ed_evolve(
    state: *const EdState,
    system: *const EdSystem,
    potential_spec: *const EdPotential,
    shift_velocity: *const EdShift,
    dt: f64,
    steps: usize,
    solver: EdBackend,
    tolerance: f64,
    out: *mut *mut EdState,
) -> EdStatus {
    guard(|| {
        let s = &deref(state, "state")?.0;
        let sys = &deref(system, "system")?.0;
        let v = potential(deref(potential_spec, "potential")?);
        let w = shift(deref(shift_velocity, "shift")?, s.grid().spatial_dim())?;
        let mut params = SolverParams::new(dt, steps, backend(solver)).with_stride(steps.max(1));
        if tolerance > 0.0 {
            params = params.with_tolerance(tolerance);
        }
        let series = evolve(s, sys, &v, &w, &params)?;
        let last = series.final_state().cloned().ok_or(Failure::Arg("no final state".into()))?;
        put(out, EdState(last), "out")
    })
}

/// Analytic best-matching shift: translation `P / M`, and with `rotational`
/// set also `zeta_dot = I^-1 L` (the state must be centered).
///
/// # Safety
/// All pointers must be live handles or valid structs; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ed_best_match(
    state: *const EdState,
    system: *const EdSystem,
    potential_spec: *const EdPotential,
    dt: f64,
    rotational: bool,
    out: *mut EdShift,
) -> EdStatus {
    guard(|| {
        let s = &deref(state, "state")?.0;
        let sys = &deref(system, "system")?.0;
        let v = potential(deref(potential_spec, "potential")?);
        let o = out.as_mut().ok_or(Failure::Null("out"))?;
        let mut result = EdShift::default();
        let t = best_match_translation(s, sys, &v, dt)?;
        result.lambda_dot[..t.lambda_dot.len()].copy_from_slice(&t.lambda_dot);
        if rotational {
            result.zeta_dot = best_match_rotation(s, sys, &v, dt)?.zeta_dot;
        }
        *o = result;
        Ok(())
    })
}

/// Writes a binary checkpoint of `state`.
///
/// # Safety
/// Handles must be live; `file` must be a NUL-terminated UTF-8 path.
#[no_mangle]
pub unsafe extern "C" fn ed_checkpoint_write(state: *const EdState, system: *const EdSystem, file: *const c_char) -> EdStatus {
    guard(|| {
        let s = &deref(state, "state")?.0;
        let sys = &deref(system, "system")?.0;
        Ok(write_checkpoint(s, sys, &path(file, "file")?)?)
    })
}

/// Reads a checkpoint into new state and system handles. Nothing is written
/// to the out pointers on failure.
///
/// # Safety
/// `file` must be a NUL-terminated UTF-8 path; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ed_checkpoint_read(
    file: *const c_char,
    state_out: *mut *mut EdState,
    system_out: *mut *mut EdSystem,
) -> EdStatus {
    guard(|| {
        if state_out.is_null() || system_out.is_null() {
            return Err(Failure::Null("out"));
        }
        let cp = read_checkpoint(&path(file, "file")?)?;
        put(state_out, EdState(cp.state), "state_out")?;
        put(system_out, EdSystem(cp.system), "system_out")
    })
}

/// Runs a configured experiment and writes its artifacts like the CLI does.
///
/// # Safety
/// `config` must be a NUL-terminated UTF-8 path.
#[no_mangle]
pub unsafe extern "C" fn ed_run_config(config: *const c_char, command: EdCommand) -> EdStatus {
    guard(|| {
        let cfg = io::parse_config(&path(config, "config")?)?;
        let cmd = match command {
            EdCommand::Evolve => io::Command::Evolve,
            EdCommand::BestMatch => io::Command::BestMatch,
            EdCommand::Sample => io::Command::Sample,
            EdCommand::Parametrized => io::Command::Parametrized,
        };
        run_experiment(&cfg, cmd)?;
        Ok(())
    })
}

/// Runs the built-in invariant suite, writing `verify.json` and
/// `observables.csv` into `output_dir`. Returns `CheckFailed` if any check
/// fails; `passed` and `total` receive the counts when non-NULL.
///
/// # Safety
/// `output_dir` must be a NUL-terminated UTF-8 path; count pointers may be NULL.
#[no_mangle]
pub unsafe extern "C" fn ed_verify(output_dir: *const c_char, seed: u64, passed: *mut usize, total: *mut usize) -> EdStatus {
    guard(|| {
        let dir = path(output_dir, "output_dir")?;
        std::fs::create_dir_all(&dir).map_err(|e| IoError::Io { path: dir.clone(), message: e.to_string() })?;
        let outcome = run_verify(None, seed, &dir)?;
        if let Some(p) = passed.as_mut() {
            *p = outcome.checks.iter().filter(|c| c.passed).count();
        }
        if let Some(t) = total.as_mut() {
            *t = outcome.checks.len();
        }
        if outcome.passed() {
            Ok(())
        } else {
            Err(IoError::CheckFailed(outcome.failures()).into())
        }
    })
}
