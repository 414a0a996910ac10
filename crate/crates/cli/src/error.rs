//! Error type shared by all subcommands, mapped onto the documented exit
//! codes: 2 for configuration problems, 3 for input/output problems, and
//! 4 when a remote endpoint kept failing.

use thiserror::Error;
use udstep_core::llm::LlmError;
use udstep_core::metrics::MetricsError;
use udstep_core::prompts::PromptError;
use udstep_core::treebank::TreebankError;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or a bad configuration file.
    #[error("{0}")]
    Config(String),
    /// Missing, unreadable, or malformed files, on either side.
    #[error("{0}")]
    Input(String),
    /// The remote endpoint never yielded a completion.
    #[error("{0}")]
    Endpoint(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Input(_) => 3,
            CliError::Endpoint(_) => 4,
        }
    }
}

impl From<TreebankError> for CliError {
    fn from(e: TreebankError) -> CliError {
        match e {
            // Flag values that cannot be satisfied, regardless of file health.
            TreebankError::SampleTooLarge { .. }
            | TreebankError::SizesNotAscending(..)
            | TreebankError::DuplicateLanguage(_)
            | TreebankError::InvalidFraction { .. }
            | TreebankError::UnknownDownsampleTarget(_) => CliError::Config(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<PromptError> for CliError {
    fn from(e: PromptError) -> CliError {
        match e {
            PromptError::UnknownLanguage(_) => CliError::Config(e.to_string()),
            PromptError::Treebank(t) => t.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> CliError {
        CliError::Config(e.to_string())
    }
}

impl From<LlmError> for CliError {
    fn from(e: LlmError) -> CliError {
        match e {
            LlmError::InvalidRequest(_) | LlmError::InvalidPolicy(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Endpoint(other.to_string()),
        }
    }
}

/// Annotates raw I/O errors with the path they concern.
pub fn io_input(path: &std::path::Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}
