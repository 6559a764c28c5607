use thiserror::Error;

/// Failures that stop a run; failed checks are recorded in the report instead.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] bsrg_core::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("unknown report format `{0}`, expected json or text")]
    Format(String),
}
