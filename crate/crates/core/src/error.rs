use thiserror::Error;

/// Errors surfaced by the solver, optimizer, and configuration layers.
#[derive(Debug, Error)]
pub enum CoreError {
    /// Conjugate gradient failed to reach the requested residual.
    #[error("implicit diffusion solve did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// A state component dropped below the nonnegativity tolerance.
    #[error("state went negative at time index {time_index}: species {species} reached {min_value:.3e}")]
    StateNegative {
        time_index: usize,
        species: &'static str,
        min_value: f64,
    },

    /// Adjoint magnitude exceeded the configured bound (or became non-finite).
    #[error("adjoint blow-up at time index {time_index}: max |phi| = {max_abs:.3e}")]
    AdjointBlowup { time_index: usize, max_abs: f64 },

    /// Two trajectories that must share a time grid (and frame storage) do not.
    #[error("misaligned trajectories: {0}")]
    MisalignedTrajectories(String),

    /// A finite-difference perturbation left the admissible box.
    #[error("infeasible perturbation: {0}")]
    InfeasiblePerturbation(String),

    /// An argument violates its mathematical domain.
    #[error("domain error: {0}")]
    DomainError(String),

    /// A configuration value violates its constraint; `field` names the offender.
    #[error("invalid config: field `{field}` {message}")]
    Validation { field: String, message: String },

    /// Configuration file could not be parsed.
    #[error("config parse error: {0}")]
    ParseError(String),

    /// Unknown experiment preset.
    #[error("unknown preset `{name}`; available: {available}")]
    UnknownPreset { name: String, available: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
