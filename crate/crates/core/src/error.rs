//! Crate-wide error type. Modules return `Result<T>` with variants scoped to
//! the subsystem that raised them, which keeps the FFI error-code mapping flat.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Scene or config document failed to parse; message carries the path to
    /// the offending field.
    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },

    /// A structural invariant was violated (non-unit axis, bad limits, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// Referenced id does not exist in the scene.
    #[error("unknown id: {0}")]
    UnknownId(String),

    /// Planner could not produce or verify a plan.
    #[error("planning error: {0}")]
    Planning(String),

    /// Grasp synthesis found no feasible candidate.
    #[error("grasp selection error: {0}")]
    GraspSelection(String),

    /// Perception input too weak to act on (too few target points).
    #[error("perception error: {0}")]
    Perception(String),

    /// Policy training / inference failure (shape mismatch, bad checkpoint).
    #[error("policy error: {0}")]
    Policy(String),

    /// Condition encoding failure (empty conditioning cloud).
    #[error("encoding error: {0}")]
    Encoding(String),

    /// Training failure (empty dataset, non-finite loss, divergence).
    #[error("training error: {0}")]
    Training(String),

    /// Affordance memory failure (empty bank, embedding degenerate input).
    #[error("memory error: {0}")]
    Memory(String),

    /// Geometric embedding could not be computed (degenerate cloud).
    #[error("embedding error: {0}")]
    Embedding(String),

    /// Part segmentation produced no pixels (part occluded or absent).
    #[error("segmentation error: {0}")]
    Segmentation(String),

    /// Contact correspondence could not be established (empty mask).
    #[error("match error: {0}")]
    Match(String),

    /// Cross-instance registration failed (too few points, no consensus).
    #[error("registration error: {0}")]
    Registration(String),

    /// Benchmark harness misconfiguration (split overlap, missing checkpoint).
    #[error("benchmark error: {0}")]
    Bench(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn parse(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
