use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid value for `{field}` ({value}): {reason}")]
    InvalidParameter {
        field: String,
        value: f64,
        reason: &'static str,
    },

    #[error("network must contain at least one pipe ({0})")]
    EmptyNetwork(&'static str),

    #[error(
        "degenerate junction: cofactor total {total:e} is negligible against cofactor scale {scale:e}"
    )]
    DegenerateJunction { total: f64, scale: f64 },

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),

    #[error("label mismatch: {0}")]
    LabelMismatch(String),

    #[error("{what} is singular: rank {rank} of {dim} (rank deficiency {})", dim - rank)]
    Singular {
        what: &'static str,
        rank: usize,
        dim: usize,
    },

    #[error(
        "assembled realization disagrees with block formula in {block}[{row},{col}]: {assembled:e} vs {printed:e}"
    )]
    RealizationMismatch {
        block: &'static str,
        row: usize,
        col: usize,
        assembled: f64,
        printed: f64,
    },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error(
        "jw I - A is near-singular at omega = {omega:e} rad/s (condition estimate {condition:e})"
    )]
    NearSingularFrequency { omega: f64, condition: f64 },

    #[error(
        "integration blew up at t = {time:e} (step {step:e}); try a step below {suggested_step:e}"
    )]
    Unstable {
        time: f64,
        step: f64,
        suggested_step: f64,
    },

    #[error("initial state is inconsistent with the constraint {0}")]
    InconsistentInitialState(String),

    #[error("algebraic solve failed at step {step}: {reason}")]
    AlgebraicSolve { step: usize, reason: String },
}
