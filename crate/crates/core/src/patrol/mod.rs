//! Robust patrol design: choose the transition weights of a symmetric random
//! walk on a graph so that the mean time to reach a goal node is small under
//! the worst-case distribution over goals.

mod chain;
mod graph;

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use chain::{
    build_transition_matrix, mean_hitting_time, mean_hitting_time_gradient, ReversibleChainParam, MAX_ROW_SUM,
    MIN_WEIGHT,
};
pub use graph::Graph;

use crate::distribution::{BallKind, ReferenceDistribution};
use crate::error::{DdroError, Result};
use crate::risk::{f_beta_slice, moments, var_slice, ProbabilityLevel};
use crate::scalar::Real;
use crate::solver::{solve_ddro, solve_soc, CostModel, SolveReport, SolverConfig};

/// Mean hitting time of each singleton goal, as a cost model over edge weights.
#[derive(Debug, Clone)]
pub struct HittingTimeCost {
    graph: Graph,
    incidence: Vec<Vec<usize>>,
}

impl HittingTimeCost {
    pub fn new(graph: Graph) -> Result<Self> {
        if !graph.is_connected() {
            return Err(DdroError::DisconnectedGraph);
        }
        if graph.nodes() < 2 {
            return Err(DdroError::InvalidGraph { reason: "need at least two nodes".into() });
        }
        let incidence = graph.incidence();
        Ok(Self { graph, incidence })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    /// Final safety pass after Dykstra: clip to the weight box and shrink any
    /// row still above the cap toward the lower bound.
    fn repair<T: Real>(&self, w: &mut [T]) {
        let (lo, cap) = (T::lit(MIN_WEIGHT), T::lit(MAX_ROW_SUM));
        // A few ulps of headroom so the rescaled sum cannot round above the cap.
        let hi = cap - T::epsilon() * T::lit(8.0);
        for v in w.iter_mut() {
            *v = v.max(lo).min(hi);
        }
        for edges in &self.incidence {
            let sum: T = edges.iter().map(|&e| w[e]).sum();
            if sum > cap {
                let base = lo * T::from_count(edges.len());
                let f = (hi - base) / (sum - base);
                for &e in edges {
                    w[e] = lo + (w[e] - lo) * f;
                }
            }
        }
    }
}

const DYKSTRA_SWEEPS: usize = 20_000;

impl<T: Real> CostModel<T> for HittingTimeCost {
    fn dimension(&self) -> usize {
        self.graph.edges().len()
    }

    fn outcomes(&self) -> usize {
        self.graph.nodes()
    }

    fn evaluate(&self, x: &[T], outcome: usize) -> Result<T> {
        mean_hitting_time(&self.graph, &chain::assemble(&self.graph, x), outcome)
    }

    fn gradient_x(&self, x: &[T], outcome: usize) -> Result<Vec<T>> {
        Ok(chain::hitting_time_and_gradient(&self.graph, &chain::assemble(&self.graph, x), outcome)?.1)
    }

    fn evaluate_with_jacobian(&self, x: &[T]) -> Result<(Vec<T>, Vec<Vec<T>>)> {
        let p = chain::assemble(&self.graph, x);
        let rows: Vec<(T, Vec<T>)> = (0..self.graph.nodes())
            .into_par_iter()
            .map(|goal| chain::hitting_time_and_gradient(&self.graph, &p, goal))
            .collect::<Result<_>>()?;
        Ok(rows.into_iter().unzip())
    }

    /// Euclidean projection onto `{w >= 1e-9, row sums <= 1 - 1e-9}` by
    /// Dykstra's alternating projections over the box and each row halfspace.
    fn project(&self, x: &[T]) -> Vec<T> {
        let (lo, cap) = (T::lit(MIN_WEIGHT), T::lit(MAX_ROW_SUM));
        let feasible = |w: &[T]| {
            w.iter().all(|&v| v >= lo)
                && self.incidence.iter().all(|edges| edges.iter().map(|&e| w[e]).sum::<T>() <= cap)
        };
        if feasible(x) {
            return x.to_vec();
        }
        let mut w = x.to_vec();
        let sets = self.incidence.len() + 1;
        let mut corrections = vec![vec![T::zero(); w.len()]; sets];
        for _ in 0..DYKSTRA_SWEEPS {
            let mut change = T::zero();
            for (s, corr) in corrections.iter_mut().enumerate() {
                let y: Vec<T> = w.iter().zip(corr.iter()).map(|(&a, &b)| a + b).collect();
                let mut next = y.clone();
                if s == 0 {
                    next.iter_mut().for_each(|v| *v = v.max(lo));
                } else {
                    let edges = &self.incidence[s - 1];
                    let sum: T = edges.iter().map(|&e| y[e]).sum();
                    if sum > cap {
                        let shift = (sum - cap) / T::from_count(edges.len());
                        for &e in edges {
                            next[e] -= shift;
                        }
                    }
                }
                for k in 0..w.len() {
                    corr[k] = y[k] - next[k];
                    change = change.max((next[k] - w[k]).abs());
                }
                w = next;
            }
            if change <= T::epsilon() * T::lit(4.0) {
                break;
            }
        }
        self.repair(&mut w);
        w
    }

    fn feasible_start(&self) -> Vec<T> {
        ReversibleChainParam::<T>::interior(&self.graph).edge_weights
    }
}

/// One row of a risk summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct RiskRow<T: Real> {
    pub beta: T,
    pub var: T,
    pub cvar: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct PatrolSummary<T: Real> {
    pub mean: T,
    pub std: T,
    pub risk: Vec<RiskRow<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct PatrolOutcome<T: Real> {
    pub report: SolveReport<T>,
    pub summary: PatrolSummary<T>,
}

/// Mean, standard deviation and `(VaR, CVaR)` of hitting times at each level.
///
/// CVaR here is `F_beta` at `VaR_beta`, the tail mean that splits the atom at
/// the quantile; at level 0 it is the plain mean.
pub fn summarize<T: Real>(costs: &[T], reference: &ReferenceDistribution<T>, betas: &[T]) -> Result<PatrolSummary<T>> {
    let q = reference.mass();
    let (mean, var) = moments(costs, q);
    let risk = betas
        .iter()
        .map(|&b| {
            let beta = ProbabilityLevel::new(b)?.value();
            let v = var_slice(costs, q, beta);
            Ok(RiskRow { beta, var: v, cvar: f_beta_slice(costs, q, beta, v) })
        })
        .collect::<Result<_>>()?;
    Ok(PatrolSummary { mean, std: var.sqrt(), risk })
}

pub fn patrol_ddro<T: Real>(
    graph: &Graph,
    kind: BallKind,
    c: T,
    config: &SolverConfig<T>,
    betas: &[T],
) -> Result<PatrolOutcome<T>> {
    let model = HittingTimeCost::new(graph.clone())?;
    let reference = ReferenceDistribution::uniform(graph.nodes())?;
    let report = solve_ddro(&model, &reference, kind, c, config)?;
    let summary = summarize(&report.costs, &reference, betas)?;
    Ok(PatrolOutcome { report, summary })
}

pub fn patrol_soc<T: Real>(graph: &Graph, config: &SolverConfig<T>, betas: &[T]) -> Result<PatrolOutcome<T>> {
    let model = HittingTimeCost::new(graph.clone())?;
    let reference = ReferenceDistribution::uniform(graph.nodes())?;
    let report = solve_soc(&model, &reference, config)?;
    let summary = summarize(&report.costs, &reference, betas)?;
    Ok(PatrolOutcome { report, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct CvarTableRow<T: Real> {
    /// Design level; 0 is the expected-cost baseline.
    pub beta_design: T,
    pub beta_eval: T,
    pub cvar: T,
    pub mean: T,
    pub std: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct CvarTable<T: Real> {
    pub rows: Vec<CvarTableRow<T>>,
    /// One solve per design level, in table order.
    pub solves: Vec<PatrolOutcome<T>>,
}

impl<T: Real> CvarTable<T> {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("beta_design,beta_eval,cvar,mean,std\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:.12e},{:.12e},{:.12e}",
                r.beta_design,
                r.beta_eval,
                r.cvar.as_f64(),
                r.mean.as_f64(),
                r.std.as_f64()
            );
        }
        out
    }

    /// One row per design level and one cvar column per evaluation level.
    pub fn to_matrix_csv(&self) -> String {
        let mut evals: Vec<T> = Vec::new();
        let mut designs: Vec<T> = Vec::new();
        for r in &self.rows {
            if !evals.contains(&r.beta_eval) {
                evals.push(r.beta_eval);
            }
            if !designs.contains(&r.beta_design) {
                designs.push(r.beta_design);
            }
        }
        let mut out = String::from("beta_design");
        for b in &evals {
            let _ = write!(out, ",cvar_{b}");
        }
        out.push('\n');
        for &d in &designs {
            let _ = write!(out, "{d}");
            for &b in &evals {
                match self.get(d, b) {
                    Some(v) => {
                        let _ = write!(out, ",{:.12e}", v.as_f64());
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }

    /// The cvar entry for a design/evaluation pair.
    pub fn get(&self, beta_design: T, beta_eval: T) -> Option<T> {
        self.rows.iter().find(|r| r.beta_design == beta_design && r.beta_eval == beta_eval).map(|r| r.cvar)
    }
}

/// Solves the baseline plus one density-ratio design per positive level
/// (radius `beta / (1 - beta)`) and evaluates every solution at every
/// evaluation level.
pub fn cvar_table<T: Real>(
    graph: &Graph,
    design_betas: &[T],
    eval_betas: &[T],
    config: &SolverConfig<T>,
) -> Result<CvarTable<T>> {
    if eval_betas.is_empty() {
        return Err(DdroError::InvalidInput { reason: "evaluation level list is empty".into() });
    }
    for &b in design_betas.iter().chain(eval_betas) {
        ProbabilityLevel::new(b)?;
    }
    let mut designs = vec![T::zero()];
    designs.extend(design_betas.iter().copied().filter(|&b| b > T::zero()));
    let solves: Vec<PatrolOutcome<T>> = designs
        .par_iter()
        .map(|&b| {
            if b == T::zero() {
                patrol_soc(graph, config, eval_betas)
            } else {
                patrol_ddro(graph, BallKind::DensityRatio, ProbabilityLevel::new(b)?.to_radius(), config, eval_betas)
            }
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (&design, solve) in designs.iter().zip(&solves) {
        for r in &solve.summary.risk {
            rows.push(CvarTableRow {
                beta_design: design,
                beta_eval: r.beta,
                cvar: r.cvar,
                mean: solve.summary.mean,
                std: solve.summary.std,
            });
        }
    }
    Ok(CvarTable { rows, solves })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::CostVector;
    use crate::sampling::seeded;
    use crate::worst_case::oracle_worst_expectation;
    use crate::Ball;
    use rand::Rng;

    #[test]
    fn projection_is_feasible_and_idempotent() {
        let g = Graph::random_connected(12, 0.3, 1).unwrap();
        let model = HittingTimeCost::new(g.clone()).unwrap();
        let mut rng = seeded(2);
        for _ in 0..50 {
            let x: Vec<f64> = g.edges().iter().map(|_| rng.random_range(-0.5..1.5)).collect();
            let p = CostModel::<f64>::project(&model, &x);
            ReversibleChainParam::new(&g, p.clone()).unwrap();
            assert_eq!(CostModel::<f64>::project(&model, &p), p);
        }
    }

    #[test]
    fn projection_is_nearest_point() {
        // Any feasible point must be at least as far from x as the projection.
        let g = Graph::cycle(5).unwrap();
        let model = HittingTimeCost::new(g.clone()).unwrap();
        let mut rng = seeded(3);
        for _ in 0..30 {
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..1.2)).collect();
            let p = CostModel::<f64>::project(&model, &x);
            let d = |y: &[f64]| y.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            for _ in 0..200 {
                let y: Vec<f64> = (0..5).map(|_| rng.random_range(1e-9..0.5)).collect();
                assert!(d(&p) <= d(&y) + 1e-12);
            }
        }
    }

    #[test]
    fn cycle_ddro_matches_oracle() {
        let g = Graph::cycle(5).unwrap();
        let cfg = SolverConfig::default();
        let out = patrol_ddro::<f64>(&g, BallKind::DensityRatio, 1.0, &cfg, &[0.5]).unwrap();
        assert!(out.report.converged, "{}", out.report.gradient_norm);
        let q = ReferenceDistribution::uniform(5).unwrap();
        let costs = CostVector::new(out.report.costs.clone()).unwrap();
        let oracle =
            oracle_worst_expectation(&costs, &Ball::new(BallKind::DensityRatio, 1.0, q).unwrap(), &mut seeded(0)).unwrap();
        assert!((out.report.objective - oracle).abs() <= 1e-4);

        let tiny = patrol_ddro::<f64>(&g, BallKind::DensityRatio, 1e-6, &cfg, &[]).unwrap();
        let soc = patrol_soc::<f64>(&g, &cfg, &[]).unwrap();
        assert!((tiny.report.objective - soc.report.objective).abs() <= 1e-4);
    }

    #[test]
    fn matrix_csv_layout() {
        let row = |d: f64, b: f64, cvar: f64| CvarTableRow { beta_design: d, beta_eval: b, cvar, mean: 1.0, std: 0.5 };
        let table = CvarTable {
            rows: vec![row(0.0, 0.0, 1.0), row(0.0, 0.5, 2.0), row(0.5, 0.0, 1.5), row(0.5, 0.5, 1.75)],
            solves: Vec::new(),
        };
        assert_eq!(
            table.to_matrix_csv(),
            "beta_design,cvar_0,cvar_0.5\n0,1.000000000000e0,2.000000000000e0\n0.5,1.500000000000e0,1.750000000000e0\n"
        );
        assert!(table.to_csv().starts_with("beta_design,beta_eval,cvar,mean,std\n0,0,1.000000000000e0,"));
    }

    #[test]
    fn rejects_disconnected() {
        let g = Graph::new(4, &[(0, 1), (2, 3)]).unwrap();
        assert!(matches!(HittingTimeCost::new(g), Err(DdroError::DisconnectedGraph)));
    }

    #[test]
    fn summary_level_zero_is_mean() {
        let q = ReferenceDistribution::uniform(4).unwrap();
        let s = summarize(&[1.0, 2.0, 3.0, 4.0], &q, &[0.0, 0.5]).unwrap();
        assert_eq!(s.risk[0].cvar, 2.5);
        assert_eq!(s.risk[1].cvar, 3.5);
        assert!(summarize(&[1.0, 2.0, 3.0, 4.0], &q, &[1.0]).is_err());
    }
}
