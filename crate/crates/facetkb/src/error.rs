//! Shared error type for the line-oriented text formats.

use thiserror::Error;

/// A parse failure in one of the text formats (outline, refactor script,
/// ISCED map, query, N-Triples, mapping spec).
///
/// `line` and `col` are 1-based.  Parsers stop at the first failure.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, col {col}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl SyntaxError {
    pub fn new(line: usize, col: usize, message: impl Into<String>) -> Self {
        SyntaxError {
            line,
            col,
            message: message.into(),
        }
    }
}
