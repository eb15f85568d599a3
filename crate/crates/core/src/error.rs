use thiserror::Error;

/// Errors produced by the simulation, reconstruction and evaluation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(
        "solver diverged at step {step}: loss {loss:.6e} exceeds 10x initial loss {initial:.6e}"
    )]
    SolverDiverged {
        step: usize,
        loss: f64,
        initial: f64,
    },

    #[error("every shot exceeded the data-consistency threshold {threshold}")]
    DegenerateExclusion { threshold: f64 },

    #[error("registration undefined: {0}")]
    RegistrationUndefined(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
