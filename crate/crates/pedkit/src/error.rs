use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid box ({x1}, {y1}, {x2}, {y2}): {reason}")]
    InvalidBox {
        x1: f64,
        y1: f64,
        x2: f64,
        y2: f64,
        reason: &'static str,
    },
    #[error("invalid part spec ({fx1}, {fy1}, {fx2}, {fy2}): {reason}")]
    InvalidPartSpec {
        fx1: f64,
        fy1: f64,
        fx2: f64,
        fy2: f64,
        reason: &'static str,
    },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("no sampleable RoIs (all excluded)")]
    NoSampleableRois,
    #[error("no evaluated ground truth")]
    NoEvaluatedGroundTruth,
    #[error("schema violation in {file} (image {image_id}, record {index}): {reason}")]
    Schema {
        file: String,
        image_id: i64,
        index: usize,
        reason: String,
    },
    #[error("malformed document {file}: {reason}")]
    Malformed { file: String, reason: String },
    #[error("detection branch mismatch: expected {expected}")]
    BranchMismatch { expected: &'static str },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
