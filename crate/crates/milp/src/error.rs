use thiserror::Error;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("variable {name}: lower bound {lower} exceeds upper bound {upper}")]
    InvalidBounds { name: String, lower: f64, upper: f64 },
    #[error("row {row}: non-finite coefficient or right-hand side")]
    NonFinite { row: String },
    #[error("variable index {index} out of range in row {row}")]
    BadIndex { row: String, index: usize },
    #[error("simplex stalled after {iterations} iterations ({detail})")]
    Stalled { iterations: usize, detail: String },
}

pub type Result<T> = std::result::Result<T, LpError>;
