use std::fmt;

use thiserror::Error;

/// Terminal outcomes of an evolution. These are results, not failures:
/// a flow that loses its curve has answered the question being asked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    /// The zero set of the level-set function is empty.
    Vanished,
    /// A marker polygon crossed itself.
    SelfIntersection,
}

impl fmt::Display for Terminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Terminal::Vanished => f.write_str("curve vanished"),
            Terminal::SelfIntersection => f.write_str("curve self-intersected"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({x}, {y}) is outside the valid domain")]
    Domain { x: f64, y: f64 },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("terminal state: {0}")]
    Terminal(Terminal),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    /// The terminal state carried by this error, if any.
    pub fn terminal(&self) -> Option<Terminal> {
        match self {
            Error::Terminal(t) => Some(*t),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
