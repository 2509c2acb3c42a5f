use thiserror::Error;

use crate::geom::Vec3;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("non-finite field value at {location:?}")]
    NonFiniteValue { location: Vec3 },

    #[error("field carries no 1-form data")]
    NoOneForm,

    #[error("regular value is not certified: worst singular value {worst:.3e} in cell {cell:?}")]
    NotRegular { worst: f64, cell: [usize; 3] },

    #[error("dangling segment inside the domain near cell {cell:?}; resolution too coarse")]
    Chaining { cell: [usize; 3] },

    #[error("degenerate configuration persisted after {attempts} jitter attempts")]
    JitterExhausted { attempts: usize },

    #[error("singular Jacobian at {location:?}")]
    SingularJacobian { location: Vec3 },

    #[error("ambiguous pushoff pairing: component {component} is equidistant to two preimage components; decrease delta")]
    AmbiguousPairing { component: usize },

    #[error("pushoff preimage has no partner for component {component}")]
    UnpairedComponent { component: usize },

    #[error("tubular neighbourhoods overlap or self-intersect: {0}")]
    TubeOverlap(String),

    #[error("curves intersect or nearly intersect (distance {distance:.3e})")]
    CurvesTooClose { distance: f64 },

    #[error("linking number requires closed curves")]
    OpenCurve,

    #[error("Gauss integral {value} is not near an integer (residual {residual:.3})")]
    NotNearInteger { value: f64, residual: f64 },

    #[error("invariant methods disagree: {0}")]
    MethodDisagreement(String),

    #[error("fields differ outside the ball (max deviation {deviation:.3e})")]
    FieldsDifferOutsideBall { deviation: f64 },

    #[error("fields are sampled on different lattices")]
    LatticeMismatch,

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("regular value {value:?} lies within the exclusion cone of the point at infinity")]
    ExcludedValue { value: Vec3 },

    #[error("preimage is not closed: {0}")]
    NotClosed(String),

    #[error("attaching arc crosses the dividing set {0} times (expected 3)")]
    ArcCrossingCount(usize),

    #[error("invalid dividing set: {0}")]
    InvalidDividingSet(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
