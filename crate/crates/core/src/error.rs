use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

/// Pipeline stage a failure is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Signal,
    Features,
    Labeler,
    Split,
    Train,
    Predict,
    Metric,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Signal => "signal",
            Stage::Features => "features",
            Stage::Labeler => "labeler",
            Stage::Split => "split",
            Stage::Train => "train",
            Stage::Predict => "predict",
            Stage::Metric => "metric",
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("observation point not captured: example `{example_id}` has no capture at token {token_index}")]
    ObservationNotCaptured { example_id: String, token_index: u32 },

    #[error("width mismatch: expected {expected}, found {found}")]
    WidthMismatch { expected: usize, found: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("single-class data: {positives} positive, {negatives} negative")]
    SingleClass { positives: usize, negatives: usize },

    #[error("example `{0}` has no similarity score")]
    MissingScore(String),

    #[error("example `{0}` has no answer or reference text")]
    MissingText(String),

    #[error("example `{0}` has no feature vector")]
    MissingFeature(String),

    #[error("token {token} is outside the vocabulary of size {vocab}")]
    TokenOutOfVocab { token: u32, vocab: usize },

    #[error("{stage} stage failed{}: {source}", .example_id.as_ref().map(|id| alloc::format!(" on example `{id}`")).unwrap_or_default())]
    Stage {
        stage: Stage,
        example_id: Option<String>,
        source: Box<Error>,
    },
}

impl Error {
    /// Attributes the error to a pipeline stage and, optionally, an example.
    pub fn at(self, stage: Stage, example_id: Option<&str>) -> Self {
        Error::Stage {
            stage,
            example_id: example_id.map(String::from),
            source: Box::new(self),
        }
    }

    /// The stage this error was raised in, when it was wrapped by the pipeline.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }

    /// Innermost error, with stage wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

macro_rules! bail {
    ($variant:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$variant(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
