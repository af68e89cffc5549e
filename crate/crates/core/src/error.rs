use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("rotor {rotor} spin rate {omega} Hz outside [0, {omega_max}]")]
    Saturation {
        rotor: usize,
        omega: f64,
        omega_max: f64,
    },

    #[error("allocation matrix is singular at alpha = {alpha} rad (sigma_min = {sigma_min:e})")]
    SingularAllocation { alpha: f64, sigma_min: f64 },

    #[error("non-finite state derivative during integration at t = {t} s")]
    IntegrationFault { t: f64 },

    #[error("bounded least-squares did not converge within {iterations} iterations")]
    SolverFailure { iterations: usize },

    #[error("baseline allocation failed at every grid angle")]
    AllocationFailure,

    #[error("LUT version mismatch: expected {expected}, found {found}")]
    LutVersion { expected: u32, found: u32 },

    #[error("malformed LUT file {path}: {reason}")]
    LutMalformed { path: PathBuf, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("trace is empty")]
    EmptyTrace,

    #[error("stability lost at t = {t:.2} s: |e_p| = {error_norm:.3} m")]
    StabilityLost { t: f64, error_norm: f64 },

    #[error("selector infeasible on {count} control steps, limit {limit}")]
    InfeasibleAbort { count: usize, limit: usize },

    #[error("malformed trace: {0}")]
    TraceFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
