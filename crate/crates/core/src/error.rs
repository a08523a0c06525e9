use alloc::string::String;

/// Errors raised by the core crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("action {action} out of range (environment has {num_actions} actions)")]
    InvalidAction { action: usize, num_actions: usize },
    #[error("episode already finished; reset before stepping")]
    EpisodeDone,
    #[error("operation not supported: {0}")]
    Unsupported(&'static str),
    #[error("observation kind does not match the model representation")]
    ObservationKind,
    #[error("reward source {found} does not match explorer kind {expected}")]
    RewardKindMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("skill index {index} out of range for {num_skills} skills")]
    InvalidSkill { index: usize, num_skills: usize },
    #[error("design matrix is rank deficient; use a ridge penalty lambda > 0")]
    RankDeficient,
    #[error("need at least {needed} samples, got {got}")]
    NotEnoughSamples { needed: usize, got: usize },
    #[error("unknown variant `{name}`; valid names: {valid}")]
    UnknownVariant { name: String, valid: String },
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = core::result::Result<T, Error>;
