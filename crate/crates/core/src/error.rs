use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A flux argument left the domain where the flux is defined.
    #[error("gradient bound violated: |s| = {value} exceeds 1 - {margin} (Minkowski flux needs eps^2 |u_x| < 1){}", cell.map(|c| format!(" at face {c}")).unwrap_or_default())]
    Domain {
        value: f64,
        margin: f64,
        cell: Option<usize>,
    },

    /// A structural condition on the inputs (not a single bad argument) failed.
    #[error("condition violated: {0}")]
    Condition(String),

    /// A solver step could not be completed; the caller should retry with a smaller dt.
    #[error("step rejected at t = {t}: {reason}")]
    StepRejected { t: f64, reason: String },

    #[error("time step underflow at t = {t}: dt = {dt} < dt_min = {dt_min}")]
    DtUnderflow { t: f64, dt: f64, dt_min: f64 },

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
