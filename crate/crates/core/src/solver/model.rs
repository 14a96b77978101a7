use crate::error::{DdroError, Result};
use crate::scalar::Real;

/// A decision-dependent cost `J(x, i)` over `outcomes()` outcomes.
///
/// `x` ranges over a closed convex set the model knows how to project onto.
pub trait CostModel<T: Real> {
    /// Length of the decision vector.
    fn dimension(&self) -> usize;

    /// Number of outcomes `m`.
    fn outcomes(&self) -> usize;

    fn evaluate(&self, x: &[T], outcome: usize) -> Result<T>;

    fn gradient_x(&self, x: &[T], outcome: usize) -> Result<Vec<T>>;

    /// Euclidean (or otherwise nearest) feasible point.
    fn project(&self, x: &[T]) -> Vec<T>;

    /// A strictly feasible starting decision.
    fn feasible_start(&self) -> Vec<T>;

    fn evaluate_all(&self, x: &[T]) -> Result<Vec<T>> {
        (0..self.outcomes()).map(|i| self.evaluate(x, i)).collect()
    }

    /// All costs together with the Jacobian rows `dJ(x, i)/dx`.
    fn evaluate_with_jacobian(&self, x: &[T]) -> Result<(Vec<T>, Vec<Vec<T>>)> {
        let costs = self.evaluate_all(x)?;
        let jac = (0..self.outcomes()).map(|i| self.gradient_x(x, i)).collect::<Result<_>>()?;
        Ok((costs, jac))
    }

    /// Whether `evaluate` and `gradient_x` may run concurrently from several
    /// threads on one shared instance.
    fn concurrent_safe(&self) -> bool {
        true
    }

    /// Compares `gradient_x` with central differences at `x`.
    ///
    /// The step is `1e-6` scaled by the largest coordinate magnitude; the
    /// relative error is measured in the Euclidean norm per outcome.
    fn verify_gradient(&self, x: &[T], tolerance: f64) -> Result<()> {
        let x64: Vec<f64> = x.iter().map(|v| v.as_f64()).collect();
        let h = 1e-6 * x64.iter().fold(1f64, |m, v| m.max(v.abs()));
        for i in 0..self.outcomes() {
            let analytic: Vec<f64> = self.gradient_x(x, i)?.iter().map(|v| v.as_f64()).collect();
            if analytic.len() != x.len() {
                return Err(DdroError::DimensionMismatch { expected: x.len(), actual: analytic.len() });
            }
            let mut numeric = Vec::with_capacity(x.len());
            for k in 0..x.len() {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[k] = T::lit(x64[k] + h);
                xm[k] = T::lit(x64[k] - h);
                let d = (self.evaluate(&xp, i)?.as_f64() - self.evaluate(&xm, i)?.as_f64()) / (2.0 * h);
                numeric.push(d);
            }
            let err = relative_error(&analytic, &numeric);
            if !(err <= tolerance) {
                return Err(DdroError::ModelGradientMismatch { outcome: i, relative_error: err });
            }
        }
        Ok(())
    }
}

/// `||a - b|| / max(||a||, ||b||)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Toy model `J(x, i) = ||x - a_i||^2` on the box `[lower, upper]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel<T> {
    anchors: Vec<Vec<T>>,
    lower: T,
    upper: T,
}

impl<T: Real> QuadraticModel<T> {
    pub fn new(anchors: Vec<Vec<T>>, lower: T, upper: T) -> Result<Self> {
        let d = anchors.first().map(Vec::len).ok_or(DdroError::EmptyDistribution)?;
        if d == 0 {
            return Err(DdroError::InvalidInput { reason: "anchors must have at least one coordinate".into() });
        }
        if let Some(a) = anchors.iter().find(|a| a.len() != d) {
            return Err(DdroError::DimensionMismatch { expected: d, actual: a.len() });
        }
        if !(lower < upper) {
            return Err(DdroError::InvalidInput { reason: "box lower bound must be below the upper bound".into() });
        }
        Ok(Self { anchors, lower, upper })
    }

    /// One-dimensional anchors on `[-10, 10]`.
    pub fn scalar(anchors: &[T]) -> Result<Self> {
        Self::new(anchors.iter().map(|&a| vec![a]).collect(), T::lit(-10.0), T::lit(10.0))
    }

    pub fn anchors(&self) -> &[Vec<T>] {
        &self.anchors
    }
}

impl<T: Real> CostModel<T> for QuadraticModel<T> {
    fn dimension(&self) -> usize {
        self.anchors[0].len()
    }

    fn outcomes(&self) -> usize {
        self.anchors.len()
    }

    fn evaluate(&self, x: &[T], outcome: usize) -> Result<T> {
        Ok(x.iter().zip(&self.anchors[outcome]).map(|(&a, &b)| (a - b) * (a - b)).sum())
    }

    fn gradient_x(&self, x: &[T], outcome: usize) -> Result<Vec<T>> {
        let two = T::lit(2.0);
        Ok(x.iter().zip(&self.anchors[outcome]).map(|(&a, &b)| two * (a - b)).collect())
    }

    fn project(&self, x: &[T]) -> Vec<T> {
        x.iter().map(|v| v.max(self.lower).min(self.upper)).collect()
    }

    fn feasible_start(&self) -> Vec<T> {
        vec![(self.lower + self.upper) / T::lit(2.0); self.dimension()]
    }
}
