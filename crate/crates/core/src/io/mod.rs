//! Configuration, persistence and run orchestration behind the CLI.

pub mod checkpoint;
pub mod config;
pub mod output;
pub mod run;
pub mod verify;

use std::path::PathBuf;

use thiserror::Error;

use crate::error::EdError;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use config::{parse_config, parse_config_str, ExperimentConfig, Violation};
pub use run::{run_experiment, Command, RunOutcome};
pub use verify::{run_verify, CheckResult, VerifyOutcome};

/// Exit status for success.
pub const EXIT_OK: i32 = 0;
/// Exit status for configuration problems.
pub const EXIT_CONFIG: i32 = 2;
/// Exit status for numerical failures.
pub const EXIT_NUMERICAL: i32 = 3;
/// Exit status for failed acceptance checks.
pub const EXIT_CHECK: i32 = 4;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid configuration: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Validation(Vec<Violation>),
    #[error("not a checkpoint file (bad magic bytes)")]
    BadMagic,
    #[error("checkpoint format version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checkpoint truncated: {found} bytes, expected {expected}")]
    TruncatedFile { expected: usize, found: usize },
    #[error("checkpoint checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("invalid checkpoint: {0}")]
    InvalidCheckpoint(String),
    #[error(transparent)]
    Numerical(#[from] EdError),
    #[error("acceptance checks failed: {}", .0.join(", "))]
    CheckFailed(Vec<String>),
}

impl IoError {
    pub fn exit_code(&self) -> i32 {
        match self {
            IoError::Numerical(_) => EXIT_NUMERICAL,
            IoError::CheckFailed(_) => EXIT_CHECK,
            _ => EXIT_CONFIG,
        }
    }

    /// Short machine-readable name of the failure.
    pub fn kind(&self) -> &'static str {
        match self {
            IoError::Io { .. } => "io",
            IoError::Parse { .. } => "parse",
            IoError::Validation(_) => "validation",
            IoError::BadMagic => "bad-magic",
            IoError::VersionMismatch { .. } => "version-mismatch",
            IoError::TruncatedFile { .. } => "truncated-file",
            IoError::ChecksumMismatch { .. } => "checksum-mismatch",
            IoError::InvalidCheckpoint(_) => "invalid-checkpoint",
            IoError::Numerical(_) => "numerical",
            IoError::CheckFailed(_) => "check-failed",
        }
    }
}
