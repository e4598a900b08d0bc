//! Maps toolkit errors onto the exit-code taxonomy:
//! 2 usage/input, 3 backend/transport, 4 internal invariant violation.

use detectllm::error::{BackendError, DatasetError, DetectError, EvalError, PerturbError};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Backend(String),
    Invariant(String),
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> CliError {
        CliError::Usage(message.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Backend(_) => 3,
            CliError::Invariant(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Backend(m) | CliError::Invariant(m) => f.write_str(m),
        }
    }
}

impl From<BackendError> for CliError {
    fn from(e: BackendError) -> CliError {
        match &e {
            BackendError::Unavailable { .. }
            | BackendError::UnsupportedStrategy { .. }
            | BackendError::Protocol { .. } => CliError::Backend(e.to_string()),
            BackendError::InvariantViolation { .. } => CliError::Invariant(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<PerturbError> for CliError {
    fn from(e: PerturbError) -> CliError {
        match e {
            PerturbError::Backend(inner) => inner.into(),
            PerturbError::FillFailure { .. } => CliError::Backend(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<DetectError> for CliError {
    fn from(e: DetectError) -> CliError {
        match &e {
            DetectError::InvariantViolation { .. } => CliError::Invariant(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> CliError {
        match &e {
            EvalError::NoUsableSamples { .. } => CliError::Backend(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> CliError {
        match e {
            DatasetError::Backend(inner) => inner.into(),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::Usage(format!("i/o error: {e}"))
    }
}
