//! Exit-code mapping: 2 for configuration problems, 3 for data/model
//! mismatches, 4 for runtime failures.

use pairshap::ErrorCategory;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Mismatch(String),
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Mismatch(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Mismatch(_) => "mismatch",
            CliError::Runtime(_) => "runtime",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Mismatch(m) | CliError::Runtime(m) => m,
        }
    }

    /// One-line machine-parsable stderr record.
    pub fn stderr_record(&self) -> String {
        serde_json::json!({
            "error": {
                "code": self.code(),
                "kind": self.kind(),
                "message": self.message(),
            }
        })
        .to_string()
    }
}

impl From<pairshap::Error> for CliError {
    fn from(e: pairshap::Error) -> Self {
        let msg = e.to_string();
        match e.category() {
            ErrorCategory::Config => CliError::Config(msg),
            ErrorCategory::Mismatch => CliError::Mismatch(msg),
            ErrorCategory::Runtime => CliError::Runtime(msg),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
