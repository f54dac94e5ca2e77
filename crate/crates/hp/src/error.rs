use std::fmt;

use thiserror::Error;

/// Syntax error with a 1-based position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
    /// Tokens that would have been accepted here, if known.
    pub expected: Vec<String>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("unsupported in executable subset: {0}")]
    Unsupported(String),
    #[error("nondeterministic assignment to `{0}` has no adjacent bounding test")]
    UnboundedNondet(String),
    #[error("invalid budget: {0}")]
    Budget(String),
    #[error("replay diverged: {0}")]
    Replay(String),
}
