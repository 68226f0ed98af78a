//! Crate-wide error type.
//!
//! Variants map onto CLI exit codes: 2 for input/validation problems,
//! 3 for numeric failures, 4 for scale limits.

use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is singular: {0}")]
    SingularMatrix(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix outside the log convergence region: {0}")]
    OutOfConvergenceRegion(String),
    #[error("unknown group: {0}")]
    UnknownGroup(String),
    #[error("group has no bounded sampling window: {0}")]
    NoWindow(String),
    #[error("epsilon too large: {0}")]
    EpsilonTooLarge(String),
    #[error("sampling window too small: {0}")]
    WindowTooSmall(String),
    #[error("rank too large: {0}")]
    RankTooLarge(String),
    #[error("singular block: {0}")]
    SingularBlock(String),
    #[error("nonpositive input: {0}")]
    NonpositiveInput(String),
    #[error("empty intersection: {0}")]
    EmptyIntersection(String),
    #[error("degenerate minus estimate: {0}")]
    DegenerateMinus(String),
    #[error("nonpositive modulus bound: {0}")]
    NonpositiveF(String),
    #[error("empty certificate list")]
    EmptyList,
    #[error("group mismatch: {0}")]
    GroupMismatch(String),
    #[error("chart overflow: {0}")]
    ChartOverflow(String),
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),
    #[error("body is not star-shaped about the origin: {0}")]
    NotStarShaped(String),
    #[error("scale too large: {0}")]
    ScaleTooLarge(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable tag, stable across versions.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::SingularMatrix(_) => "SingularMatrix",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::OutOfConvergenceRegion(_) => "OutOfConvergenceRegion",
            Error::UnknownGroup(_) => "UnknownGroup",
            Error::NoWindow(_) => "NoWindow",
            Error::EpsilonTooLarge(_) => "EpsilonTooLarge",
            Error::WindowTooSmall(_) => "WindowTooSmall",
            Error::RankTooLarge(_) => "RankTooLarge",
            Error::SingularBlock(_) => "SingularBlock",
            Error::NonpositiveInput(_) => "NonpositiveInput",
            Error::EmptyIntersection(_) => "EmptyIntersection",
            Error::DegenerateMinus(_) => "DegenerateMinus",
            Error::NonpositiveF(_) => "NonpositiveF",
            Error::EmptyList => "EmptyList",
            Error::GroupMismatch(_) => "GroupMismatch",
            Error::ChartOverflow(_) => "ChartOverflow",
            Error::ParameterOutOfRange(_) => "ParameterOutOfRange",
            Error::NotStarShaped(_) => "NotStarShaped",
            Error::ScaleTooLarge(_) => "ScaleTooLarge",
            Error::InvalidInput(_) => "InvalidInput",
            Error::Io(_) => "Io",
        }
    }

    /// Process exit code for the CLI: 2 validation, 3 numeric, 4 scale.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::DimensionMismatch(_)
            | Error::UnknownGroup(_)
            | Error::NoWindow(_)
            | Error::EpsilonTooLarge(_)
            | Error::NonpositiveInput(_)
            | Error::EmptyIntersection(_)
            | Error::NonpositiveF(_)
            | Error::EmptyList
            | Error::GroupMismatch(_)
            | Error::ParameterOutOfRange(_)
            | Error::InvalidInput(_)
            | Error::Io(_) => 2,
            Error::SingularMatrix(_)
            | Error::OutOfConvergenceRegion(_)
            | Error::SingularBlock(_)
            | Error::DegenerateMinus(_)
            | Error::NotStarShaped(_) => 3,
            Error::RankTooLarge(_)
            | Error::ScaleTooLarge(_)
            | Error::WindowTooSmall(_)
            | Error::ChartOverflow(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
