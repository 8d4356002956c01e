use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EdError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid particle system: {0}")]
    InvalidSystem(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("packet width {width} is below four grid spacings ({min}) on axis {axis}")]
    UnresolvableWidth { axis: usize, width: f64, min: f64 },
    #[error("packet leaks out of the central half of the box: outside mass {outside:e}")]
    BoundaryLeak { outside: f64 },
    #[error("density floor violated: min/max density ratio {ratio:e} (the (rho, phi) chart is singular here)")]
    NodeError { ratio: f64 },
    #[error("tangent vectors live in different charts or at different base points")]
    ChartMismatch,
    #[error("states live on different grids")]
    GridMismatch,
    #[error("dimension error: {0}")]
    DimensionError(String),
    #[error("state is not normalized: norm {norm}")]
    NotNormalized { norm: f64 },
    #[error("implicit solve failed after {iterations} iterations (relative residual {residual:e})")]
    SolverDivergence { iterations: usize, residual: f64 },
    #[error("geometry requires eta == hbar (eta = {eta}, hbar = {hbar})")]
    EtaMismatch { eta: f64, hbar: f64 },
    #[error("inertia tensor is singular: condition number {condition:e}")]
    SingularInertia { condition: f64 },
    #[error("state is not in the center-of-mass frame: |<x_cm>| = {center:e}, |P| = {momentum:e}")]
    NotCentered { center: f64, momentum: f64 },
    #[error("lapse function is negative at label {label}: {value}")]
    NegativeLapse { label: f64, value: f64 },
    #[error("constraint value {kappa} is unreachable on the lattice support")]
    InfeasibleConstraint { kappa: f64 },
    #[error("too few populated bins: {populated} bins reach {min_count} expected counts")]
    UndersampledBins { populated: usize, min_count: f64 },
    #[error("drift clamped at near-node positions in {clamps} of {steps} chain steps")]
    DriftClamped { clamps: u64, steps: u64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, EdError>;
