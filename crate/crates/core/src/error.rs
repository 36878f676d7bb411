use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A target value is outside the range of the function being inverted.
    #[error("range error: {0}")]
    Range(String),

    /// A caller-side contract was broken (wrong shapes, missing data, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Declared monotonicity does not hold; `index` is the first offending grid index.
    #[error("monotonicity violated at grid index {index}: {detail}")]
    Monotonicity { index: usize, detail: String },

    /// The input families are not jointly realizable.
    #[error("inconsistent input: {0}")]
    Inconsistent(String),

    /// A ratio or logarithm was requested where all probability mass is gone.
    #[error("support error: {0}")]
    Support(String),

    /// The marginal survival function is not continuous, positive and strictly decreasing.
    #[error("condition (H) violated: {0}")]
    ConditionH(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("singularity: {0}")]
    Singularity(String),

    #[error("bound violation: {0}")]
    BoundViolation(String),

    #[error("construction error: {0}")]
    Construction(String),

    /// Two coordinates coincide where the no-ties assumption is required.
    #[error("no-ties violation: {0}")]
    NoTies(String),

    /// A probability left [0, 1] by more than the arithmetic slack.
    #[error("probability {value} outside [0, 1]")]
    Probability { value: f64 },

    /// A quantity cannot be computed for the given model type.
    #[error("capability error: {0}")]
    Capability(String),

    #[error("model pathology: {0}")]
    Pathology(String),

    #[error("invalid model file: {0}")]
    Spec(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Spec(e.to_string())
    }
}
