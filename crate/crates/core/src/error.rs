use alloc::string::String;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("consistency error: {0}")]
    Consistency(String),
    #[error("gradient probe error: {0}")]
    Probe(String),
    #[error("every action has already failed")]
    ExhaustedActions,
    #[error("protocol violation: action {action}: {reason}")]
    ProtocolViolation { action: usize, reason: &'static str },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("instance generation failed: {0}")]
    Generation(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            got,
        })
    }
}
