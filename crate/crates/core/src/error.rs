use thiserror::Error;

/// Errors raised by the model, the flow machinery and the eigensolver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("unsupported derivative order {0} (expected 1, 2 or 3)")]
    DerivativeOrder(usize),

    #[error("invalid scheme: {0}")]
    InvalidScheme(String),

    #[error("gamma function pole: m + 1 - d/2 = {0} is not positive")]
    GammaPole(f64),

    /// The flow left the domain in which the regulator kernel is defined.
    #[error("positivity violated: {0}")]
    PositivityViolation(String),

    #[error("energy gap undefined: {0}")]
    GapUndefined(String),

    #[error("potential is not confining (lambda = {lambda}, m_squared = {m_squared})")]
    NotConfining { lambda: f64, m_squared: f64 },

    #[error("eigenfunction not contained in [0, {x_max}]: boundary amplitude ratio {ratio:.3e}")]
    DomainTooSmall { x_max: f64, ratio: f64 },

    #[error("m sweep failed at {}: {reason}", m.map_or("m = inf".to_string(), |m| format!("m = {m}")))]
    SweepRun { m: Option<u32>, reason: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
