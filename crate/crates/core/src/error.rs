use thiserror::Error;

/// Errors raised by the distribution, risk, dual, solver and patrol layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DdroError {
    #[error("distribution must have at least one outcome")]
    EmptyDistribution,
    #[error("negative probability mass {value} at outcome {index}")]
    NegativeMass { index: usize, value: f64 },
    #[error("probability masses sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    #[error("reference distribution must be strictly positive, outcome {index} has mass {value}")]
    NonPositiveReference { index: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("radius must be positive, got {radius}")]
    NonPositiveRadius { radius: f64 },
    #[error("cost entry {index} is not finite")]
    NonFiniteCost { index: usize },
    #[error("probability level must lie in [0, 1), got {beta}")]
    InvalidProbabilityLevel { beta: f64 },
    #[error("count {count} out of range 1..={outcomes}")]
    CountOutOfRange { count: usize, outcomes: usize },
    #[error("multiplier must be positive, got {value}")]
    NonPositiveLambda { value: f64 },
    #[error("exponent {exponent} exceeds the overflow guard")]
    OverflowGuard { exponent: f64 },
    #[error("oracle supports at most {max} outcomes, got {outcomes}")]
    TooLarge { outcomes: usize, max: usize },
    #[error("ball kind {kind} is not supported by this operation")]
    UnsupportedBall { kind: &'static str },
    #[error("invalid input: {reason}")]
    InvalidInput { reason: String },
    #[error("solver did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },
    #[error("model gradient disagrees with finite differences (relative error {relative_error:.3e} at outcome {outcome})")]
    ModelGradientMismatch { outcome: usize, relative_error: f64 },
    #[error("cost model evaluation failed: {reason}")]
    ModelEvaluation { reason: String },
    #[error("invalid graph: {reason}")]
    InvalidGraph { reason: String },
    #[error("graph is not connected")]
    DisconnectedGraph,
    #[error("infeasible chain parameter: {reason}")]
    InfeasibleParam { reason: String },
    #[error("singular linear system (goal {goal} unreachable or chain reducible)")]
    SingularSystem { goal: usize },
}

pub type Result<T, E = DdroError> = std::result::Result<T, E>;
