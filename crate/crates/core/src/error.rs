use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),

    #[error("generator index {index} out of range for a system of rank {rank}")]
    GeneratorOutOfRange { index: usize, rank: usize },

    #[error("invalid Coxeter system: {0}")]
    InvalidSystem(String),

    #[error("no compact right-angled {0}-gon exists (need at least 5 sides)")]
    PolygonTooSmall(usize),

    #[error("element is not a reflection: {0}")]
    NotAReflection(String),

    #[error("walls must be distinct")]
    SameWall,

    #[error("boundary point {angle} lies on a wall endpoint")]
    DegenerateBoundaryPoint { angle: f64 },

    #[error("the identity has no limit point")]
    IdentityLimitPoint,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("empty spherical layer at t = {0}")]
    EmptyLayer(f64),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
