use thiserror::Error;

/// Errors raised across the engine, belief, learning and search layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid variant: {0}")]
    InvalidVariant(String),

    #[error("game over")]
    GameOver,

    #[error("illegal action {action}: {reason}")]
    IllegalAction { action: String, reason: String },

    #[error("inconsistent observation: slot {slot} has no plausible card")]
    InconsistentObservation { slot: usize },

    #[error("belief-space too large: more than {bound} candidate hands")]
    BeliefSpaceTooLarge { bound: usize },

    #[error("belief filtered to empty after {event}")]
    FilteredToEmpty { event: String },

    #[error("encoder version mismatch: model expects {expected:#018x}, context has {found:#018x}")]
    EncoderMismatch { expected: u64, found: u64 },

    #[error("training diverged at step {step} (loss {loss})")]
    Diverged { step: usize, loss: f64 },

    #[error("empty dataset: {0}")]
    EmptyData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("at turn {turn}: {source}")]
    AtTurn {
        turn: u32,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn illegal(action: impl std::fmt::Display, reason: impl Into<String>) -> Self {
        Error::IllegalAction {
            action: action.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }

    /// Unwraps turn annotations down to the originating error.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtTurn { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn is_belief_space_too_large(&self) -> bool {
        matches!(self.root(), Error::BeliefSpaceTooLarge { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
