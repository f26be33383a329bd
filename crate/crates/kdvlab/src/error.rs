use crate::evolution::EvolutionTrace;

/// Failure modes shared across the crate.
///
/// Validation-style errors (`Domain`, `GridMismatch`, `NonFinite`,
/// `InsufficientSamples`, `Config`, `Json`) mean the inputs were rejected
/// before any numerics ran. `BlowUp`, `SupercriticalCollapse` and
/// `NotConverged` are numerical outcomes. The CLI maps these classes to
/// distinct process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid mismatch: operands live on different grids")]
    GridMismatch,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// The integrator produced a non-finite field. The trace collected up to
    /// the failing step is attached so callers can inspect the run so far.
    #[error("blow-up detected at t = {time}")]
    BlowUp { time: f64, trace: Box<EvolutionTrace> },

    #[error("energy fell below the floor ({energy} at iteration {iteration}): supercritical collapse")]
    SupercriticalCollapse { energy: f64, iteration: usize },

    #[error("minimizer did not converge (residual {residual} after {iterations} iterations)")]
    NotConverged { residual: f64, iterations: usize },

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Process exit code class used by the command-line driver:
    /// 2 validation, 3 numerical failure, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_)
            | Error::GridMismatch
            | Error::NonFinite(_)
            | Error::InsufficientSamples { .. }
            | Error::Config(_)
            | Error::Json(_) => 2,
            Error::BlowUp { .. }
            | Error::SupercriticalCollapse { .. }
            | Error::NotConverged { .. } => 3,
            Error::Io(_) => 4,
        }
    }
}
