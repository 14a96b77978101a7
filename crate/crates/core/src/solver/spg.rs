//! Spectral projected gradient with a nonmonotone Armijo line search.

use crate::error::Result;
use crate::scalar::{max_abs, Real};

use super::HistoryEntry;

pub(crate) struct SpgSettings<T> {
    pub max_iterations: usize,
    pub tolerance: T,
    pub shrink: T,
    pub slope: T,
    pub memory: usize,
}

pub(crate) struct SpgOutcome<T> {
    pub z: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: T,
}

const STEP_MIN: f64 = 1e-10;
const STEP_MAX: f64 = 1e10;
const MAX_BACKTRACKS: usize = 60;

fn clamp_step<T: Real>(a: T) -> T {
    a.max(T::lit(STEP_MIN)).min(T::lit(STEP_MAX))
}

/// Minimizes `f` over the set `project` maps onto, starting from `z0`.
///
/// `f` returns the value and gradient; evaluation errors at trial points are
/// treated as rejected steps. The error at the starting point is returned.
pub(crate) fn minimize<T: Real>(
    z0: Vec<T>,
    mut f: impl FnMut(&[T]) -> Result<(T, Vec<T>)>,
    project: impl Fn(&[T]) -> Vec<T>,
    settings: &SpgSettings<T>,
    history: &mut Vec<HistoryEntry<T>>,
    iteration_offset: usize,
) -> Result<SpgOutcome<T>> {
    let mut z = project(&z0);
    let (mut value, mut grad) = f(&z)?;
    let pg_norm = |z: &[T], g: &[T]| {
        let trial: Vec<T> = z.iter().zip(g).map(|(&a, &b)| a - b).collect();
        let p = project(&trial);
        let d: Vec<T> = p.iter().zip(z).map(|(&a, &b)| a - b).collect();
        max_abs(&d)
    };
    let mut norm = pg_norm(&z, &grad);
    let mut recent = vec![value];
    let mut alpha = clamp_step(T::one() / norm.max(T::lit(STEP_MIN)));

    let mut iterations = 0;
    while iterations < settings.max_iterations {
        history.push(HistoryEntry { iteration: iteration_offset + iterations, objective: value, gradient_norm: norm });
        if norm <= settings.tolerance {
            return Ok(SpgOutcome { z, iterations, converged: true, gradient_norm: norm });
        }
        iterations += 1;

        let trial: Vec<T> = z.iter().zip(&grad).map(|(&a, &b)| a - alpha * b).collect();
        let d: Vec<T> = project(&trial).iter().zip(&z).map(|(&a, &b)| a - b).collect();
        let slope: T = d.iter().zip(&grad).map(|(&a, &b)| a * b).sum();
        let reference = recent.iter().copied().fold(T::neg_infinity(), T::max);

        let mut t = T::one();
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let candidate: Vec<T> = z.iter().zip(&d).map(|(&a, &b)| a + t * b).collect();
            if let Ok((fc, gc)) = f(&candidate) {
                if fc.is_finite() && fc <= reference + settings.slope * t * slope {
                    accepted = Some((candidate, fc, gc));
                    break;
                }
            }
            t *= settings.shrink;
        }
        let Some((next, next_value, next_grad)) = accepted else {
            // No acceptable step along a descent direction: numerically stalled.
            break;
        };

        let s: Vec<T> = next.iter().zip(&z).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = next_grad.iter().zip(&grad).map(|(&a, &b)| a - b).collect();
        let sy: T = s.iter().zip(&y).map(|(&a, &b)| a * b).sum();
        let ss: T = s.iter().map(|&a| a * a).sum();
        alpha = if sy > T::zero() { clamp_step(ss / sy) } else { T::lit(STEP_MAX) };

        z = next;
        value = next_value;
        grad = next_grad;
        norm = pg_norm(&z, &grad);
        recent.push(value);
        if recent.len() > settings.memory {
            recent.remove(0);
        }
    }
    history.push(HistoryEntry { iteration: iteration_offset + iterations, objective: value, gradient_norm: norm });
    let converged = norm <= settings.tolerance;
    Ok(SpgOutcome { z, iterations, converged, gradient_norm: norm })
}
