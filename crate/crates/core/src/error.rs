use thiserror::Error;

use crate::poset::Arm;

/// Errors produced by the poset, environment, comparison and harness layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown arm {0}")]
    UnknownArm(Arm),

    #[error("cannot duel arm {0} against itself")]
    SameArm(Arm),

    #[error("invalid poset: {0}")]
    InvalidPoset(String),

    #[error("analysis cap exceeded: {size} arms > cap {cap}")]
    AnalysisCapExceeded { size: usize, cap: usize },

    #[error("budget exhausted after {duels} duels")]
    BudgetExhausted { duels: u64 },

    #[error("mode error: {0}")]
    Mode(String),

    #[error("no common evaluator for items {0} and {1}")]
    NoCommonEvaluator(Arm, Arm),

    #[error("empty arm set")]
    EmptySet,

    #[error("ratings file line {line}: {message}")]
    MalformedRatings { line: u64, message: String },

    #[error("no items retained with at least {min_count} ratings")]
    NoItemsRetained { min_count: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than a failing run.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::InvalidPoset(_)
                | Error::Mode(_)
                | Error::AnalysisCapExceeded { .. }
                | Error::MalformedRatings { .. }
                | Error::Json(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
