//! Discrete distributionally robust optimization.
//!
//! Worst-case expectations over weighted-L2, density-ratio and total-variation
//! balls around a discrete reference distribution, the smooth convex dual
//! objectives that turn the min-max problem into a single-layer minimization,
//! and a patrol-agent design application built on Markov-chain hitting times.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar to `f64`.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distribution;
pub mod dual;
pub mod error;
pub mod linalg;
pub mod patrol;
pub mod risk;
pub mod sampling;
mod scalar;
pub(crate) mod search;
pub mod solver;
pub mod verification;
pub mod worst_case;

pub use distribution::{
    minimal_radius, Ball, BallKind, DensityRatioVector, DiscreteDistribution,
    ReferenceDistribution,
};
pub use dual::{DualGradient, DualPoint, DualPointDR, DualPointL2, Extended};
pub use error::{DdroError, Result};
pub use risk::{CostVector, ProbabilityLevel};
pub use patrol::{Graph, HittingTimeCost};
pub use scalar::Real;
pub use solver::{CostModel, QuadraticModel, SolveReport, SolverConfig};
pub use verification::{run_verification, VerifyOptions, VerifyReport};
pub use worst_case::WorstCaseResult;

pub type Distribution = DiscreteDistribution<f64>;
pub type Reference = ReferenceDistribution<f64>;
pub type DensityRatios = DensityRatioVector<f64>;
pub type AmbiguityBall = Ball<f64>;
pub type Costs = CostVector<f64>;
pub type Level = ProbabilityLevel<f64>;
pub type Dual = DualPoint<f64>;
pub type WorstCase = WorstCaseResult<f64>;
pub type Config = SolverConfig<f64>;
pub type Report = SolveReport<f64>;
pub type ChainParam = patrol::ReversibleChainParam<f64>;
