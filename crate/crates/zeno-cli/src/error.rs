//! Driver-level errors and their mapping onto process exit codes.

/// Exit code for invalid input: unparseable or inconsistent configuration,
/// bad flag values, or parameters outside the supported regime.
pub const EXIT_INVALID_INPUT: i32 = 1;
/// Exit code for internal failures: I/O, numerical breakdown.
pub const EXIT_INTERNAL: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// The configuration text violates the grammar (positions are 1-based).
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    /// The configuration parses but violates an invariant.
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    /// A computation failed after validation succeeded.
    #[error(transparent)]
    Engine(#[from] zeno::Error),
}

impl CliError {
    pub fn parse(line: usize, col: usize, msg: impl Into<String>) -> Self {
        CliError::Parse { line, col, msg: msg.into() }
    }

    pub fn validation_msg(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    /// Wraps an engine error raised while *constructing* a configuration,
    /// where it describes bad input rather than a runtime failure.
    pub fn validation(err: zeno::Error) -> Self {
        CliError::Validation(err.to_string())
    }

    /// 1 for anything the user can fix by editing input, 2 for everything
    /// that indicates a failure inside the computation.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation(_) => EXIT_INVALID_INPUT,
            CliError::Io(_) => EXIT_INTERNAL,
            CliError::Engine(err) => match err {
                zeno::Error::InvalidParams(_)
                | zeno::Error::RegimeViolation(_)
                | zeno::Error::StepTooLarge { .. }
                | zeno::Error::DivergentPeriod(_) => EXIT_INVALID_INPUT,
                _ => EXIT_INTERNAL,
            },
        }
    }
}
