use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A coupled pair has `kappa_i + kappa_j = 0`, so the transition rate diverges.
    #[error("transition rate diverges on bond {bond}: kappa_i + kappa_j = 0")]
    DivergentRate { bond: usize },

    #[error("steady-state system is singular: {0}")]
    SingularSystem(String),

    #[error("bond {bond} is not reducible by a diagonal gauge: t_fwd * t_bwd = {product}")]
    NotGaugeReducible { bond: usize, product: String },

    #[error("bond {bond} has zero coupling product; the chain disconnects there")]
    SingularBond { bond: usize },

    #[error("parameters outside the formula's regime: {0}")]
    InvalidRegime(String),

    #[error("index {index} out of range for a chain of {len} modes")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("integrator could not meet tolerance at t = {time}: {reason}")]
    ToleranceNotMet { time: f64, reason: String },

    #[error("not converged after integrating to t = {time} (residual {residual:e})")]
    NotConverged { time: f64, residual: f64 },

    #[error("Hilbert-space dimension {dim} exceeds the limit {limit}")]
    DimensionTooLarge { dim: usize, limit: usize },

    #[error("configuration error: {0}")]
    Config(String),
}
