use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("vector is not on the unit sphere (|x| - 1 = {0:e})")]
    NotUnit(f64),

    #[error("tangent vectors have different base points")]
    BaseMismatch,

    #[error("rank-deficient basis: {0}")]
    RankDeficient(String),

    #[error("degenerate Gram matrix in chart `{chart}` at node {node:?}")]
    DegenerateGram { chart: String, node: Vec<usize> },

    #[error("singular point on real locus at {point:?} (|grad f| = {grad_norm:e})")]
    SingularLocus { point: Vec<f64>, grad_norm: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("binary form is identically zero")]
    ZeroForm,

    #[error("sign self-check failed: {0}")]
    Configuration(String),

    #[error("input body is not horizontal (defect {0:e})")]
    NotHorizontal(f64),

    #[error("step size too large: renormalization drift {drift:e} at t = {t}")]
    StepSize { t: f64, drift: f64 },

    #[error("Jacobian rank loss at t = {t}, node {node:?}")]
    JacobianRankLoss { t: f64, node: Vec<usize> },

    #[error("parameters mismatch: estimate has (m, n) = ({m_est}, {n_est}), requested ({m}, {n})")]
    ParameterMismatch {
        m_est: usize,
        n_est: usize,
        m: usize,
        n: usize,
    },

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}
