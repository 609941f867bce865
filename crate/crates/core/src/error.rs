use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    Instance(String),
    #[error("edge {edge}: {message}")]
    Weight { edge: String, message: String },
    #[error("encode: {0}")]
    Encode(String),
    #[error("dfj cut rejected: {0}")]
    Cut(String),
    #[error(transparent)]
    Lp(#[from] milp::LpError),
    #[error("tsplib: {0}")]
    Tsplib(String),
    #[error("unsupported EDGE_WEIGHT_TYPE {0}")]
    UnsupportedWeightType(String),
    #[error("cost model: {0}")]
    Cost(String),
    #[error("plan extraction: {0}")]
    Extraction(String),
    #[error("brute force: {0}")]
    BruteForce(String),
    #[error("solution file line {line}: {message}")]
    SolutionFormat { line: usize, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
