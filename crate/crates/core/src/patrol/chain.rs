//! Symmetric transition matrices parameterized by one weight per edge, and
//! mean hitting times of singleton goals.
//!
//! With a uniform stationary distribution, reversibility is symmetry of `P`:
//! `P[u][v] = P[v][u] = w_e` on edge `e = (u, v)` and `P[j][j] = 1 - sum`.

use serde::{Deserialize, Serialize};

use super::graph::Graph;
use crate::error::{DdroError, Result};
use crate::linalg::{Lu, Matrix};
use crate::scalar::Real;

/// Smallest admissible edge weight.
pub const MIN_WEIGHT: f64 = 1e-9;
/// Every row sum of off-diagonal weights stays at or below this.
pub const MAX_ROW_SUM: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct ReversibleChainParam<T: Real> {
    pub edge_weights: Vec<T>,
}

impl<T: Real> ReversibleChainParam<T> {
    /// Checks the weight bounds and row-sum caps against `graph`.
    pub fn new(graph: &Graph, edge_weights: Vec<T>) -> Result<Self> {
        if edge_weights.len() != graph.edges().len() {
            return Err(DdroError::DimensionMismatch { expected: graph.edges().len(), actual: edge_weights.len() });
        }
        if let Some((e, w)) = edge_weights.iter().enumerate().find(|(_, w)| !(**w >= T::lit(MIN_WEIGHT))) {
            return Err(DdroError::InfeasibleParam { reason: format!("edge {e} weight {w} below {MIN_WEIGHT:e}") });
        }
        for (node, edges) in graph.incidence().iter().enumerate() {
            let sum: T = edges.iter().map(|&e| edge_weights[e]).sum();
            if !(sum <= T::lit(MAX_ROW_SUM)) {
                return Err(DdroError::InfeasibleParam {
                    reason: format!("row {node} off-diagonal sum {sum} exceeds {MAX_ROW_SUM}"),
                });
            }
        }
        Ok(Self { edge_weights })
    }

    /// The uniform interior point `1 / (max degree + 1)` on every edge.
    pub fn interior(graph: &Graph) -> Self {
        let d = graph.degrees().into_iter().max().unwrap_or(0);
        Self { edge_weights: vec![T::one() / T::from_count(d + 1); graph.edges().len()] }
    }
}

pub fn build_transition_matrix<T: Real>(graph: &Graph, param: &ReversibleChainParam<T>) -> Result<Matrix<T>> {
    let param = ReversibleChainParam::new(graph, param.edge_weights.clone())?;
    Ok(assemble(graph, &param.edge_weights))
}

/// Assembles `P` without validating the weights.
pub(crate) fn assemble<T: Real>(graph: &Graph, weights: &[T]) -> Matrix<T> {
    let n = graph.nodes();
    let mut p = Matrix::zeros(n, n);
    let mut row = vec![T::zero(); n];
    for (&(u, v), &w) in graph.edges().iter().zip(weights) {
        p[(u, v)] = w;
        p[(v, u)] = w;
        row[u] += w;
        row[v] += w;
    }
    for (j, s) in row.into_iter().enumerate() {
        p[(j, j)] = T::one() - s;
    }
    p
}

/// Expected steps to reach `goal` from each node (zero at the goal), and the
/// factorization of `I - Q` over the other nodes.
fn hitting_times<T: Real>(p: &Matrix<T>, goal: usize) -> Result<(Vec<T>, Option<Lu<T>>)> {
    let n = p.rows();
    if goal >= n {
        return Err(DdroError::DimensionMismatch { expected: n, actual: goal + 1 });
    }
    if n == 1 {
        return Ok((vec![T::zero()], None));
    }
    let others: Vec<usize> = (0..n).filter(|&j| j != goal).collect();
    let k = others.len();
    let mut a = Matrix::zeros(k, k);
    for (r, &j) in others.iter().enumerate() {
        for (s, &l) in others.iter().enumerate() {
            let delta = if r == s { T::one() } else { T::zero() };
            a[(r, s)] = delta - p[(j, l)];
        }
    }
    let lu = Lu::factor(a).ok_or(DdroError::SingularSystem { goal })?;
    let h_sub = lu.solve(&vec![T::one(); k]);
    if h_sub.iter().any(|v| !v.is_finite() || *v < T::zero()) {
        return Err(DdroError::SingularSystem { goal });
    }
    let mut h = vec![T::zero(); n];
    for (&j, v) in others.iter().zip(h_sub) {
        h[j] = v;
    }
    Ok((h, Some(lu)))
}

/// Stationary-weighted mean of the expected time to first reach `goal`,
/// `J = (1/n) sum_j h_j` with `h` solving the absorbed-chain system.
pub fn mean_hitting_time<T: Real>(graph: &Graph, p: &Matrix<T>, goal: usize) -> Result<T> {
    if p.rows() != graph.nodes() || p.cols() != graph.nodes() {
        return Err(DdroError::DimensionMismatch { expected: graph.nodes(), actual: p.rows() });
    }
    let (h, _) = hitting_times(p, goal)?;
    Ok(h.iter().copied().sum::<T>() / T::from_count(graph.nodes()))
}

/// Value and edge-weight gradient of the mean hitting time, by one forward and
/// one adjoint solve with the same factorization.
pub(crate) fn hitting_time_and_gradient<T: Real>(graph: &Graph, p: &Matrix<T>, goal: usize) -> Result<(T, Vec<T>)> {
    let n = graph.nodes();
    let (h, lu) = hitting_times(p, goal)?;
    let value = h.iter().copied().sum::<T>() / T::from_count(n);
    let Some(lu) = lu else {
        return Ok((value, vec![T::zero(); graph.edges().len()]));
    };
    let pi = T::one() / T::from_count(n);
    let w_sub = lu.solve_transpose(&vec![pi; n - 1]);
    let mut w = vec![T::zero(); n];
    for (j, v) in (0..n).filter(|&j| j != goal).zip(w_sub) {
        w[j] = v;
    }
    // dJ = w^T dQ h; a weight raises P[a][b], P[b][a] and lowers P[a][a], P[b][b].
    let grad = graph.edges().iter().map(|&(a, b)| -(w[a] - w[b]) * (h[a] - h[b])).collect();
    Ok((value, grad))
}

pub fn mean_hitting_time_gradient<T: Real>(
    graph: &Graph,
    param: &ReversibleChainParam<T>,
    goal: usize,
) -> Result<Vec<T>> {
    let p = build_transition_matrix(graph, param)?;
    Ok(hitting_time_and_gradient(graph, &p, goal)?.1)
}
