use alloc::string::String;

use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("row {row}: malformed value ({reason})")]
    MalformedRow { row: usize, reason: String },
    #[error("row {row}: timestamp {timestamp} does not increase")]
    NonMonotonicTimestamp { row: usize, timestamp: i64 },
    #[error("row {row}: non-positive price")]
    NegativePrice { row: usize },
    #[error("row {row}: high/low bounds violated")]
    InvalidRange { row: usize },
    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("no date is common to every series")]
    EmptyIntersection,
    #[error("series {asset} is not at the expected frequency")]
    WrongFrequency { asset: String },
    #[error("insufficient history for {as_of}: {detail}")]
    InsufficientHistory { as_of: NaiveDate, detail: String },
    #[error("missing candle at timestamp {timestamp} ({asset})")]
    FrequencyGap { asset: String, timestamp: i64 },
    #[error("zero volatility")]
    ZeroVolatility,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("need at least {needed} rows, got {got}")]
    InsufficientRows { needed: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("loss became non-finite at epoch {epoch}")]
    DivergenceDetected { epoch: usize },
    #[error("missing feature window for {date} / asset {asset}")]
    MissingWindow { date: NaiveDate, asset: String },
    #[error("asset lists differ")]
    AssetMismatch,
    #[error("date {0} is not present in the returns panel")]
    DateMisalignment(NaiveDate),
    #[error("fewer than 3 common days between pnl series {left} and {right}")]
    InsufficientOverlap { left: usize, right: usize },
    #[error("weight shape mismatch: expected {expected}, got {got}")]
    WeightShapeMismatch { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
