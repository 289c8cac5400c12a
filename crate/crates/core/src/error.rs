use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Error, Debug)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("unknown suppression flag {0:?}")]
    UnknownFlag(String),

    #[error("invalid size-class table: {0}")]
    SizeClass(String),

    #[error("invalid crosswalk: {0}")]
    Crosswalk(String),

    #[error("year {requested} not in panel (available: {available:?})")]
    YearAbsent { requested: i32, available: Vec<i32> },

    #[error("zero total employment")]
    ZeroTotal,

    #[error("unknown strategy {0:?} (expected one of BM, RLQ, WM, Presence, CM)")]
    UnknownStrategy(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate network: {0}")]
    DegenerateNetwork(String),

    #[error("matrix has empty rows or columns; run prune_empty first")]
    Unpruned,

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("rank deficient design; collinear columns: {0:?}")]
    RankDeficient(Vec<String>),

    #[error("too few observations: n = {n}, k = {k}")]
    TooFewObservations { n: usize, k: usize },

    #[error("missing variables: {0:?}")]
    MissingVariables(Vec<String>),

    #[error("invalid model specification: {0}")]
    ModelSpec(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("missing input file {0}")]
    MissingFile(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
