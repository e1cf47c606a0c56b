//! Status codes returned by every FFI call.

use articulab::Error;

/// Result of an FFI call. Zero is success; anything else identifies the
/// failing subsystem. `ab_last_error_message` returns the detail string.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    ValidationError = 4,
    UnknownId = 5,
    PlanningError = 6,
    GraspError = 7,
    PolicyError = 8,
    MemoryError = 9,
    EmbeddingError = 10,
    RegistrationError = 11,
    BenchError = 12,
    IoError = 13,
    InternalError = 14,
    SegmentationError = 15,
    MatchError = 16,
    PerceptionError = 17,
    EncodingError = 18,
    TrainingError = 19,
}

impl From<&Error> for AbStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Parse { .. } => AbStatus::ParseError,
            Error::Validation(_) => AbStatus::ValidationError,
            Error::UnknownId(_) => AbStatus::UnknownId,
            Error::Planning(_) => AbStatus::PlanningError,
            Error::GraspSelection(_) => AbStatus::GraspError,
            Error::Perception(_) => AbStatus::PerceptionError,
            Error::Policy(_) => AbStatus::PolicyError,
            Error::Encoding(_) => AbStatus::EncodingError,
            Error::Training(_) => AbStatus::TrainingError,
            Error::Memory(_) => AbStatus::MemoryError,
            Error::Embedding(_) => AbStatus::EmbeddingError,
            Error::Segmentation(_) => AbStatus::SegmentationError,
            Error::Match(_) => AbStatus::MatchError,
            Error::Registration(_) => AbStatus::RegistrationError,
            Error::Bench(_) => AbStatus::BenchError,
            Error::Io(_) => AbStatus::IoError,
            Error::Json(_) => AbStatus::ParseError,
        }
    }
}
