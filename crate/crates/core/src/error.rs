use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A scenario, policy or parameter failed validation. `field` names the
    /// offending item.
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("degenerate layout: total interference at {point:?} is zero")]
    DegenerateLayout { point: [f64; 2] },

    #[error("state space too large: {size} states exceeds the cap of {cap}")]
    StateSpaceTooLarge { size: u128, cap: usize },

    #[error("constraint infeasible: R0 = {r0} is outside [{min}, {max}]")]
    Infeasible { r0: f64, min: f64, max: f64 },

    #[error("{what} did not converge within {iterations} iterations")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("unknown controller '{0}'")]
    UnknownController(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
