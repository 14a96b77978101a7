//! Outer minimization of the dual objective over the decision and the
//! multipliers, the plain expected-cost baseline and radius sweeps.
//!
//! Each barrier round minimizes
//!
//! ```text
//! Phi(x, lambda, nu) = g(J(x), lambda, nu) - w * sum(ln lambda)
//! ```
//!
//! with `lambda >= 1e-10`. At fixed costs `Phi` is a small convex problem in
//! the multipliers, so they are minimized exactly at every evaluation and the
//! spectral projected gradient runs on `x` alone, projected by the model. The
//! gradient in `x` is `J'(x)^T dg/dJ` at the minimizing multipliers, which is
//! also the full projected gradient of `Phi` there. After each round the
//! multipliers are re-minimized without the barrier, so the reported
//! objective is the worst-case expectation at `x_star` up to the floor.

mod inner;
mod model;
mod spg;

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::{check_len, check_radius, BallKind, ReferenceDistribution};
use crate::dual::{DualPoint, DualPointDR, DualPointL2};
use crate::error::{DdroError, Result};
use crate::risk::{moments, CostVector};
use crate::scalar::{dot, Real};

use inner::barrier_duals;
pub use inner::{minimize_duals, LAMBDA_FLOOR};
pub use model::{relative_error, CostModel, QuadraticModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct SolverConfig<T: Real> {
    /// Weight of `-sum(ln lambda)` in the first round.
    pub barrier_weight: T,
    /// Factor applied to the barrier weight between rounds.
    pub barrier_decay: T,
    pub barrier_rounds: usize,
    /// Iteration cap per round.
    pub max_iterations: usize,
    /// Projected-gradient infinity norm that counts as converged.
    pub gradient_tolerance: T,
    pub armijo_shrink: T,
    pub armijo_slope: T,
    /// Length of the nonmonotone line-search window.
    pub nonmonotone_memory: usize,
    /// Run the model's finite-difference check at the start point.
    pub verify_model_gradient: bool,
    pub gradient_check_tolerance: f64,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            barrier_weight: T::lit(0.1),
            barrier_decay: T::lit(0.2),
            barrier_rounds: 4,
            max_iterations: 5000,
            gradient_tolerance: T::lit(1e-7),
            armijo_shrink: T::lit(0.5),
            armijo_slope: T::lit(1e-4),
            nonmonotone_memory: 10,
            verify_model_gradient: true,
            gradient_check_tolerance: 1e-4,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: T, name: &str| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(DdroError::InvalidInput { reason: format!("{name} must be positive") })
            }
        };
        positive(self.barrier_weight, "barrier_weight")?;
        positive(self.barrier_decay, "barrier_decay")?;
        positive(self.gradient_tolerance, "gradient_tolerance")?;
        positive(self.armijo_slope, "armijo_slope")?;
        if !(self.armijo_shrink > T::zero() && self.armijo_shrink < T::one()) {
            return Err(DdroError::InvalidInput { reason: "armijo_shrink must lie in (0, 1)".into() });
        }
        if self.barrier_rounds == 0 || self.max_iterations == 0 || self.nonmonotone_memory == 0 {
            return Err(DdroError::InvalidInput {
                reason: "barrier_rounds, max_iterations and nonmonotone_memory must be positive".into(),
            });
        }
        Ok(())
    }

    fn spg(&self) -> spg::SpgSettings<T> {
        spg::SpgSettings {
            max_iterations: self.max_iterations,
            tolerance: self.gradient_tolerance,
            shrink: self.armijo_shrink,
            slope: self.armijo_slope,
            memory: self.nonmonotone_memory,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct HistoryEntry<T: Real> {
    pub iteration: usize,
    pub objective: T,
    pub gradient_norm: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct SolveReport<T: Real> {
    /// `None` for the expected-cost baseline.
    pub ball: Option<BallKind>,
    pub radius: Option<T>,
    pub x_star: Vec<T>,
    pub dual_star: Option<DualPoint<T>>,
    /// Dual objective at `(x_star, dual_star)`, or `E_ref[J(x_star)]` for the baseline.
    pub objective: T,
    pub costs: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: T,
    /// Objective at the decision reached after each barrier round.
    pub round_objectives: Vec<T>,
    /// For the L2 ball: whether every outcome is active at the solution, i.e.
    /// the smooth formulation without the `max(0, .)` applies there.
    pub smooth_conditions: Option<bool>,
    pub history: Vec<HistoryEntry<T>>,
}

impl<T: Real> SolveReport<T> {
    /// History as CSV with header `iteration,objective,gradient_norm`.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("iteration,objective,gradient_norm\n");
        for h in &self.history {
            let _ = writeln!(out, "{},{:e},{:e}", h.iteration, h.objective.as_f64(), h.gradient_norm.as_f64());
        }
        out
    }

    /// Reference mean and standard deviation of the costs at `x_star`.
    pub fn mean_std(&self, reference: &ReferenceDistribution<T>) -> Result<(T, T)> {
        check_len(reference.len(), self.costs.len())?;
        let (mean, var) = moments(&self.costs, reference.mass());
        Ok((mean, var.sqrt()))
    }
}

fn check_model<T: Real, M: CostModel<T> + ?Sized>(
    model: &M,
    reference: &ReferenceDistribution<T>,
    config: &SolverConfig<T>,
) -> Result<Vec<T>> {
    config.validate()?;
    check_len(model.outcomes(), reference.len())?;
    let x0 = model.project(&model.feasible_start());
    check_len(model.dimension(), x0.len())?;
    if config.verify_model_gradient {
        model.verify_gradient(&x0, config.gradient_check_tolerance)?;
    }
    Ok(x0)
}

/// Barrier-augmented dual minimized over the multipliers, with its gradient in `x`.
fn reduced_objective<T: Real, M: CostModel<T> + ?Sized>(
    model: &M,
    reference: &[T],
    kind: BallKind,
    c: T,
    weight: T,
    x: &[T],
) -> Result<(T, Vec<T>)> {
    let (costs, jac) = model.evaluate_with_jacobian(x)?;
    if let Some(i) = costs.iter().position(|v| !v.is_finite()) {
        return Err(DdroError::NonFiniteCost { index: i });
    }
    let inner = barrier_duals(&costs, reference, kind, c, weight)?;
    let mut grad = vec![T::zero(); x.len()];
    for (row, &w) in jac.iter().zip(&inner.d_costs) {
        if w != T::zero() {
            for (g, &r) in grad.iter_mut().zip(row) {
                *g += w * r;
            }
        }
    }
    Ok((inner.value, grad))
}

/// Objective, decision, costs and multipliers after a barrier round.
type RoundResult<T> = (T, Vec<T>, Vec<T>, DualPoint<T>);

/// Minimizes the worst-case expectation over an L2 or density-ratio ball.
///
/// A report with `converged = false` is still returned when the iteration cap
/// is hit; callers decide whether that is an error.
pub fn solve_ddro<T: Real, M: CostModel<T> + ?Sized>(
    model: &M,
    reference: &ReferenceDistribution<T>,
    kind: BallKind,
    c: T,
    config: &SolverConfig<T>,
) -> Result<SolveReport<T>> {
    check_radius(c)?;
    if kind == BallKind::TotalVariation {
        return Err(DdroError::UnsupportedBall { kind: kind.name() });
    }
    let mut x = check_model(model, reference, config)?;
    let q = reference.mass();

    let settings = config.spg();
    let mut history = Vec::new();
    let mut round_objectives = Vec::with_capacity(config.barrier_rounds);
    let mut best: Option<RoundResult<T>> = None;
    let mut iterations = 0;
    let mut weight = config.barrier_weight;
    let mut last = None;
    for _ in 0..config.barrier_rounds {
        let out = spg::minimize(
            x,
            |x: &[T]| reduced_objective(model, q, kind, c, weight, x),
            |x: &[T]| model.project(x),
            &settings,
            &mut history,
            iterations,
        )?;
        iterations += out.iterations;
        x = out.z;

        let costs = model.evaluate_all(&x)?;
        let (objective, dual) = minimize_duals(&CostVector::new(costs.clone())?, reference, kind, c)?;
        round_objectives.push(objective);
        if best.as_ref().is_none_or(|b| objective < b.0) {
            best = Some((objective, x.clone(), costs, dual));
        }
        last = Some((out.converged, out.gradient_norm));
        weight *= config.barrier_decay;
    }
    let (objective, x_star, costs, dual) = best.expect("at least one barrier round");
    let (converged, gradient_norm) = last.expect("at least one barrier round");

    let smooth_conditions = match &dual {
        DualPoint::WeightedL2(DualPointL2 { lambda, nu }) => {
            Some(costs.iter().all(|&j| j + T::lit(2.0) * *lambda - *nu > T::zero()))
        }
        DualPoint::DensityRatio(DualPointDR { .. }) => None,
    };
    Ok(SolveReport {
        ball: Some(kind),
        radius: Some(c),
        x_star,
        dual_star: Some(dual),
        objective,
        costs,
        iterations,
        converged,
        gradient_norm,
        round_objectives,
        smooth_conditions,
        history,
    })
}

/// Minimizes the plain expectation `E_ref[J(x, .)]`.
pub fn solve_soc<T: Real, M: CostModel<T> + ?Sized>(
    model: &M,
    reference: &ReferenceDistribution<T>,
    config: &SolverConfig<T>,
) -> Result<SolveReport<T>> {
    let x0 = check_model(model, reference, config)?;
    let q = reference.mass();
    let f = |x: &[T]| -> Result<(T, Vec<T>)> {
        let (costs, jac) = model.evaluate_with_jacobian(x)?;
        let value = dot(&costs, q);
        if !value.is_finite() {
            return Err(DdroError::ModelEvaluation { reason: "non-finite expected cost".into() });
        }
        let mut grad = vec![T::zero(); x.len()];
        for (row, &w) in jac.iter().zip(q) {
            for (g, &r) in grad.iter_mut().zip(row) {
                *g += w * r;
            }
        }
        Ok((value, grad))
    };
    let mut history = Vec::new();
    let out = spg::minimize(x0, f, |x: &[T]| model.project(x), &config.spg(), &mut history, 0)?;
    let costs = model.evaluate_all(&out.z)?;
    let objective = dot(&costs, q);
    Ok(SolveReport {
        ball: None,
        radius: None,
        x_star: out.z,
        dual_star: None,
        objective,
        costs,
        iterations: out.iterations,
        converged: out.converged,
        gradient_norm: out.gradient_norm,
        round_objectives: vec![objective],
        smooth_conditions: None,
        history,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct ParetoPoint<T: Real> {
    pub c: T,
    pub mean: Option<T>,
    pub std: Option<T>,
    pub objective: Option<T>,
    pub converged: bool,
    pub x_star: Option<Vec<T>>,
    /// Whether the mean-std closed form applies at this solution. Mean and
    /// spread are monotone in `c` only between points where it does.
    pub smooth_conditions: Option<bool>,
    /// Solver error for this point, if any.
    pub error: Option<String>,
}

/// Validates a radius list: non-empty, positive and ascending.
pub fn check_radius_list<T: Real>(c_list: &[T]) -> Result<()> {
    if c_list.is_empty() {
        return Err(DdroError::InvalidInput { reason: "radius list is empty".into() });
    }
    for &c in c_list {
        check_radius(c)?;
    }
    if c_list.windows(2).any(|w| w[1] < w[0]) {
        return Err(DdroError::InvalidInput { reason: "radius list must be sorted ascending".into() });
    }
    Ok(())
}

/// One L2-ball solve per radius, reporting the reference mean and standard
/// deviation of the costs at each solution.
///
/// Points run in parallel when the model declares itself concurrent-safe;
/// the output order always follows `c_list`. A failing point is recorded and
/// the sweep continues.
pub fn pareto_sweep<T: Real, M: CostModel<T> + Sync + ?Sized>(
    model: &M,
    reference: &ReferenceDistribution<T>,
    c_list: &[T],
    config: &SolverConfig<T>,
) -> Result<Vec<ParetoPoint<T>>> {
    check_radius_list(c_list)?;
    let run = |&c: &T| match solve_ddro(model, reference, BallKind::WeightedL2, c, config) {
        Ok(r) => {
            let (mean, std) = moments(&r.costs, reference.mass());
            ParetoPoint {
                c,
                mean: Some(mean),
                std: Some(std.sqrt()),
                objective: Some(r.objective),
                converged: r.converged,
                x_star: Some(r.x_star),
                smooth_conditions: r.smooth_conditions,
                error: None,
            }
        }
        Err(e) => ParetoPoint {
            c,
            mean: None,
            std: None,
            objective: None,
            converged: false,
            x_star: None,
            smooth_conditions: None,
            error: Some(e.to_string()),
        },
    };
    Ok(if model.concurrent_safe() { c_list.par_iter().map(run).collect() } else { c_list.iter().map(run).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::seeded;
    use crate::worst_case::oracle_worst_expectation;
    use crate::Ball;

    fn toy(a: &[f64]) -> QuadraticModel<f64> {
        QuadraticModel::scalar(a).unwrap()
    }

    fn u(m: usize) -> ReferenceDistribution<f64> {
        ReferenceDistribution::uniform(m).unwrap()
    }

    #[test]
    fn dr_toy_example() {
        let r = solve_ddro(&toy(&[0.0, 1.0, 2.0, 3.0]), &u(4), BallKind::DensityRatio, 1.0, &SolverConfig::default()).unwrap();
        assert!((r.x_star[0] - 1.5).abs() < 1e-3, "{:?}", r.x_star);
        assert!((r.objective - 2.25).abs() < 1e-3, "{}", r.objective);
    }

    #[test]
    fn near_zero_radius_matches_soc() {
        let m = toy(&[0.0, 1.0, 2.0, 3.0]);
        let r = solve_ddro(&m, &u(4), BallKind::DensityRatio, 1e-6, &SolverConfig::default()).unwrap();
        assert!((r.x_star[0] - 1.5).abs() < 1e-3);
        assert!((r.objective - 1.25).abs() < 1e-4, "{}", r.objective);
        let s = solve_soc(&m, &u(4), &SolverConfig::default()).unwrap();
        assert!(s.converged);
        assert!((s.x_star[0] - 1.5).abs() < 1e-7);
        assert!((s.objective - 1.25).abs() < 1e-12);
    }

    #[test]
    fn soc_degenerate_models() {
        let one = toy(&[2.5]);
        let s = solve_soc(&one, &u(1), &SolverConfig::default()).unwrap();
        assert!((s.x_star[0] - 2.5).abs() < 1e-7 && s.objective < 1e-12);

        struct Constant;
        impl CostModel<f64> for Constant {
            fn dimension(&self) -> usize {
                2
            }
            fn outcomes(&self) -> usize {
                3
            }
            fn evaluate(&self, _: &[f64], _: usize) -> Result<f64> {
                Ok(7.0)
            }
            fn gradient_x(&self, _: &[f64], _: usize) -> Result<Vec<f64>> {
                Ok(vec![0.0, 0.0])
            }
            fn project(&self, x: &[f64]) -> Vec<f64> {
                x.to_vec()
            }
            fn feasible_start(&self) -> Vec<f64> {
                vec![0.0, 0.0]
            }
        }
        let s = solve_soc(&Constant, &u(3), &SolverConfig::default()).unwrap();
        assert!((s.objective - 7.0).abs() < 1e-12);
        assert!(s.converged);
    }

    #[test]
    fn end_to_end_duality_and_report_invariant() {
        let m = toy(&[0.0, 1.0, 2.0, 7.0]);
        let mut rng = seeded(2);
        for kind in [BallKind::WeightedL2, BallKind::DensityRatio] {
            for c in [0.3, 1.0] {
                let r = solve_ddro(&m, &u(4), kind, c, &SolverConfig::default()).unwrap();
                assert!(r.converged, "{kind} {c} {}", r.gradient_norm);
                let costs = CostVector::new(r.costs.clone()).unwrap();
                let oracle = oracle_worst_expectation(&costs, &Ball::new(kind, c, u(4)).unwrap(), &mut rng).unwrap();
                assert!((r.objective - oracle).abs() <= 1e-4, "{kind} {c}: {} vs {oracle}", r.objective);
                let g = crate::dual::dual_objective(&costs, &u(4), c, r.dual_star.as_ref().unwrap()).unwrap();
                assert!((g - r.objective).abs() <= 1e-10);
                for w in r.round_objectives.windows(2) {
                    assert!(w[1] <= w[0] + 1e-9, "{:?}", r.round_objectives);
                }
            }
        }
    }

    #[test]
    fn ddro_dominates_soc_in_worst_case() {
        let m = toy(&[0.0, 1.0, 2.0, 7.0]);
        let s = solve_soc(&m, &u(4), &SolverConfig::default()).unwrap();
        for kind in [BallKind::WeightedL2, BallKind::DensityRatio] {
            let r = solve_ddro(&m, &u(4), kind, 1.0, &SolverConfig::default()).unwrap();
            let (soc_worst, _) = minimize_duals(&CostVector::new(s.costs.clone()).unwrap(), &u(4), kind, 1.0).unwrap();
            assert!(r.objective <= soc_worst + 1e-6);
        }
    }

    #[test]
    fn deterministic_history() {
        let m = toy(&[0.0, 1.0, 2.0, 7.0]);
        let a = solve_ddro(&m, &u(4), BallKind::DensityRatio, 0.7, &SolverConfig::default()).unwrap();
        let b = solve_ddro(&m, &u(4), BallKind::DensityRatio, 0.7, &SolverConfig::default()).unwrap();
        assert_eq!(a.history_csv(), b.history_csv());
        assert_eq!(a, b);
    }

    #[test]
    fn pareto_sweep_examples() {
        let m = toy(&[0.0, 1.0, 2.0, 7.0]);
        let cfg = SolverConfig::default();
        let pts = pareto_sweep(&m, &u(4), &[1e-6, 0.25, 0.5, 1.0, 1.0], &cfg).unwrap();
        let soc = solve_soc(&m, &u(4), &cfg).unwrap();
        let (sm, ss) = soc.mean_std(&u(4)).unwrap();
        assert!((pts[0].mean.unwrap() - sm).abs() < 1e-4 && (pts[0].std.unwrap() - ss).abs() < 1e-3);
        for w in pts.windows(2) {
            assert!(w[1].mean.unwrap() >= w[0].mean.unwrap() - 1e-6);
            assert!(w[1].std.unwrap() <= w[0].std.unwrap() + 1e-6);
        }
        assert!((pts[3].mean.unwrap() - pts[4].mean.unwrap()).abs() < 1e-6);
        assert!(pareto_sweep(&m, &u(4), &[], &cfg).is_err());
        assert!(pareto_sweep(&m, &u(4), &[1.0, 0.5], &cfg).is_err());
    }

    #[test]
    fn report_serializes() {
        let r = solve_soc(&toy(&[0.0, 1.0]), &u(2), &SolverConfig::default()).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        let back: SolveReport<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back.x_star, r.x_star);
        assert!(r.history_csv().starts_with("iteration,objective,gradient_norm\n0,"));
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = toy(&[0.0, 1.0]);
        let cfg = SolverConfig::default();
        assert!(matches!(solve_ddro(&m, &u(2), BallKind::WeightedL2, 0.0, &cfg), Err(DdroError::NonPositiveRadius { .. })));
        assert!(matches!(solve_ddro(&m, &u(2), BallKind::TotalVariation, 1.0, &cfg), Err(DdroError::UnsupportedBall { .. })));
        assert!(matches!(solve_ddro(&m, &u(3), BallKind::WeightedL2, 1.0, &cfg), Err(DdroError::DimensionMismatch { .. })));
    }
}
