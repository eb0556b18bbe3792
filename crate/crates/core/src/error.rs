use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Boundary damping violates |λ̃₀ + λ̃₁| < 2√(λ₀λ₁) (or λ₀, λ₁ not positive).
    #[error("A2: |lambda_tilde0 + lambda_tilde1| = {sum_abs} >= 2*sqrt(lambda0*lambda1) = {bound}")]
    Admissibility { sum_abs: f64, bound: f64 },

    #[error("boundary transformation undefined: determinant alpha02*beta12 - alpha12*beta02 is zero")]
    SingularDeterminant,

    #[error("grid needs at least 2 subdivisions, got {0}")]
    GridTooSmall(usize),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("expression error at column {column}: {message}")]
    Expression { column: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("functional H = {0} is not positive; L is undefined outside the blow-up regime")]
    NonPositiveH(f64),

    #[error("Phi needs lambda_tilde0 == lambda_tilde1 (got {0} and {1})")]
    ModeMismatch(f64, f64),

    #[error("delta = {delta} outside (0, {limit}); sandwich constant beta1 would be nonpositive")]
    DeltaOutOfRange { delta: f64, limit: f64 },

    #[error("series value {value} at t = {t} is not positive; cannot fit a log-linear decay")]
    NonPositiveSeries { t: f64, value: f64 },

    #[error("decay fit needs at least 3 points in the window, got {0}")]
    TooFewPoints(usize),

    #[error("trajectory ended in blow-up at t = {0}; error norms need a completed run")]
    BlownUpTrajectory(f64),
}
