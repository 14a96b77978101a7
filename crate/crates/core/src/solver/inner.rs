//! Minimization of the dual objectives over the multipliers at fixed costs.
//!
//! These routines only ever evaluate the smooth dual objectives, so they give
//! an independent route to the worst-case expectation.

use crate::distribution::{check_len, check_radius, BallKind, ReferenceDistribution};
use crate::dual::{dr_gradient, dr_value, l2_gradient, l2_value, DualPoint, DualPointDR, DualPointL2, EXPONENT_GUARD};
use crate::error::{DdroError, Result};
use crate::risk::{moments, CostVector};
use crate::scalar::Real;
use crate::search::{bisect_increasing, golden_section};

/// Hard lower bound on every inequality multiplier.
pub const LAMBDA_FLOOR: f64 = 1e-10;

/// Infimum of the dual objective over the multipliers, with the minimizer.
///
/// Multipliers stay in the smooth domain (`lambda >= 1e-10`), so boundary
/// optima are approached to within that floor.
pub fn minimize_duals<T: Real>(
    costs: &CostVector<T>,
    reference: &ReferenceDistribution<T>,
    kind: BallKind,
    c: T,
) -> Result<(T, DualPoint<T>)> {
    check_len(reference.len(), costs.len())?;
    check_radius(c)?;
    match kind {
        BallKind::WeightedL2 => {
            let (v, d) = inner_l2(costs.values(), reference.mass(), c);
            Ok((v, DualPoint::WeightedL2(d)))
        }
        BallKind::DensityRatio => {
            let (v, d) = inner_dr(costs.values(), reference.mass(), c)?;
            Ok((v, DualPoint::DensityRatio(d)))
        }
        BallKind::TotalVariation => Err(DdroError::UnsupportedBall { kind: kind.name() }),
    }
}

/// Minimizer over `nu` of `g_l2(lambda, .)`; `dg/dnu` is non-decreasing in `nu`.
fn best_nu_l2<T: Real>(costs: &[T], reference: &[T], lambda: T, mean: T, max: T) -> T {
    let mut scratch = vec![T::zero(); costs.len()];
    let two = T::lit(2.0);
    bisect_increasing(mean, max + two * lambda, |nu| {
        l2_gradient(costs, reference, T::zero(), lambda, nu, &mut scratch).1
    })
}

pub(crate) fn inner_l2<T: Real>(costs: &[T], reference: &[T], c: T) -> (T, DualPointL2<T>) {
    let d = barrier_l2(costs, reference, c, T::zero());
    (l2_value(costs, reference, c, d.lambda, d.nu), d)
}

/// Minimizer of `g_l2 - w ln(lambda)` over `lambda >= floor` and `nu`.
fn barrier_l2<T: Real>(costs: &[T], reference: &[T], c: T, weight: T) -> DualPointL2<T> {
    let (mean, var) = moments(costs, reference);
    let max = costs.iter().copied().fold(T::neg_infinity(), T::max);
    let floor = T::lit(LAMBDA_FLOOR);
    let mut scratch = vec![T::zero(); costs.len()];
    // Envelope derivative of lambda -> min_nu Phi(lambda, nu).
    let mut slope = |lambda: T| {
        let nu = best_nu_l2(costs, reference, lambda, mean, max);
        l2_gradient(costs, reference, c, lambda, nu, &mut scratch).0 - weight / lambda
    };

    let lambda = if slope(floor) >= T::zero() {
        floor
    } else {
        let mut hi = (var.sqrt() / c).max(floor * T::lit(2.0));
        for _ in 0..200 {
            if slope(hi) >= T::zero() {
                break;
            }
            hi *= T::lit(4.0);
        }
        bisect_increasing(floor.ln(), hi.ln(), |s| slope(s.exp())).exp()
    };
    let nu = best_nu_l2(costs, reference, lambda, mean, max);
    DualPointL2 { lambda, nu }
}

/// Per-outcome minimizer over `lambda_i` at fixed `nu`: the derivative
/// `(1+c) e_i (1 - (J_i - nu) / lambda_i)` vanishes at `lambda_i = J_i - nu`
/// and is positive everywhere when `J_i <= nu`.
fn best_lambdas_dr<T: Real>(costs: &[T], nu: T) -> Vec<T> {
    let floor = T::lit(LAMBDA_FLOOR);
    costs.iter().map(|&j| (j - nu).max(floor)).collect()
}

pub(crate) fn inner_dr<T: Real>(costs: &[T], reference: &[T], c: T) -> Result<(T, DualPointDR<T>)> {
    let min = costs.iter().copied().fold(T::infinity(), T::min);
    let max = costs.iter().copied().fold(T::neg_infinity(), T::max);
    let profile = |nu: T| dr_value(costs, reference, c, &best_lambdas_dr(costs, nu), nu).unwrap_or(T::infinity());
    let (nu, _) = golden_section(min, max, profile);
    let lambdas = best_lambdas_dr(costs, nu);
    let value = dr_value(costs, reference, c, &lambdas, nu)?;
    Ok((value, DualPointDR { lambdas, nu }))
}

/// Minimizer over `lambda >= floor` of `a lambda exp(d / lambda - 1) - w ln(lambda)`.
///
/// The function is convex; its derivative `a e (1 - d / lambda) - w / lambda`
/// is bisected in `ln(lambda)`. The bracket end `max(2|d|, w e^2 / a)` has a
/// non-negative derivative.
fn barrier_dr_lambda<T: Real>(a: T, d: T, weight: T) -> T {
    let floor = T::lit(LAMBDA_FLOOR);
    let slope = |lambda: T| {
        let u = d / lambda - T::one();
        if u > T::lit(EXPONENT_GUARD) {
            return T::neg_infinity();
        }
        a * u.exp() * (T::one() - d / lambda) - weight / lambda
    };
    if slope(floor) >= T::zero() {
        return floor;
    }
    let two = T::lit(2.0);
    let mut hi = (two * d.abs()).max(weight * T::lit(2.0).exp() / a).max(two * floor);
    for _ in 0..200 {
        if slope(hi) >= T::zero() {
            break;
        }
        hi *= two;
    }
    bisect_increasing(floor.ln(), hi.ln(), |s| slope(s.exp())).exp()
}

/// Multipliers minimizing `g_dr - w sum(ln lambda_i)` at fixed costs.
///
/// For fixed `nu` the problem separates over outcomes; the profile in `nu` is
/// convex with derivative `1 - (1+c) sum ref_i e_i`. Outcomes with zero
/// reference mass carry no barrier term and take the unweighted minimizer.
fn barrier_dr<T: Real>(costs: &[T], reference: &[T], c: T, weight: T) -> DualPointDR<T> {
    let floor = T::lit(LAMBDA_FLOOR);
    let lambdas_at = |nu: T| -> Vec<T> {
        costs
            .iter()
            .zip(reference)
            .map(|(&j, &q)| {
                if q > T::zero() {
                    barrier_dr_lambda(q * (T::one() + c), j - nu, weight)
                } else {
                    (j - nu).max(floor)
                }
            })
            .collect()
    };
    let slope = |nu: T| {
        let lambdas = lambdas_at(nu);
        let mass: T = costs
            .iter()
            .zip(reference)
            .zip(&lambdas)
            .map(|((&j, &q), &l)| q * ((j - nu) / l - T::one()).exp())
            .sum();
        T::one() - (T::one() + c) * mass
    };
    let min = costs.iter().copied().fold(T::infinity(), T::min);
    let max = costs.iter().copied().fold(T::neg_infinity(), T::max);
    let width = (max - min).max(T::one());
    let (mut lo, mut hi) = (min - width, max + width);
    for _ in 0..200 {
        if slope(lo) <= T::zero() {
            break;
        }
        lo -= width;
    }
    for _ in 0..200 {
        if slope(hi) >= T::zero() {
            break;
        }
        hi += width;
    }
    let nu = bisect_increasing(lo, hi, slope);
    DualPointDR { lambdas: lambdas_at(nu), nu }
}

/// Barrier-augmented dual minimized over the multipliers at fixed costs.
pub(crate) struct BarrierDuals<T> {
    /// `g + w * sum(-ln lambda)` at the minimizer.
    pub value: T,
    /// Derivative of that value with respect to each cost.
    pub d_costs: Vec<T>,
}

pub(crate) fn barrier_duals<T: Real>(
    costs: &[T],
    reference: &[T],
    kind: BallKind,
    c: T,
    weight: T,
) -> Result<BarrierDuals<T>> {
    let mut d_costs = vec![T::zero(); costs.len()];
    let value = match kind {
        BallKind::WeightedL2 => {
            let d = barrier_l2(costs, reference, c, weight);
            l2_gradient(costs, reference, c, d.lambda, d.nu, &mut d_costs);
            l2_value(costs, reference, c, d.lambda, d.nu) - weight * d.lambda.ln()
        }
        BallKind::DensityRatio => {
            let d = barrier_dr(costs, reference, c, weight);
            let mut d_lambdas = vec![T::zero(); costs.len()];
            dr_gradient(costs, reference, c, &d.lambdas, d.nu, &mut d_lambdas, &mut d_costs)?;
            let log_sum: T =
                d.lambdas.iter().zip(reference).filter(|(_, &q)| q > T::zero()).map(|(l, _)| l.ln()).sum();
            dr_value(costs, reference, c, &d.lambdas, d.nu)? - weight * log_sum
        }
        BallKind::TotalVariation => return Err(DdroError::UnsupportedBall { kind: kind.name() }),
    };
    Ok(BarrierDuals { value, d_costs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worst_case::{worst_expectation_dr, worst_expectation_l2};
    use crate::sampling::{random_reference, seeded, uniform_costs};

    #[test]
    fn reproduces_worst_case_values() {
        let mut rng = seeded(31);
        for k in 0..50 {
            let m = 3 + k % 6;
            let j = CostVector::new(uniform_costs(&mut rng, m, 0.0, 10.0)).unwrap();
            let q = random_reference::<f64, _>(&mut rng, m);
            let c = [0.3, 0.7, 1.5][k % 3];
            let (l2, _) = minimize_duals(&j, &q, BallKind::WeightedL2, c).unwrap();
            let exact = worst_expectation_l2(&j, &q, c).unwrap().value;
            assert!((l2 - exact).abs() <= 1e-5, "{l2} {exact}");
            let (dr, _) = minimize_duals(&j, &q, BallKind::DensityRatio, c).unwrap();
            let exact = worst_expectation_dr(&j, &q, c).unwrap().value;
            assert!((dr - exact).abs() <= 1e-9, "{dr} {exact}");
        }
    }

    #[test]
    fn boundary_optimum_uses_floor() {
        let j = CostVector::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let q = ReferenceDistribution::uniform(4).unwrap();
        let (v, d): (f64, _) = minimize_duals(&j, &q, BallKind::WeightedL2, 2.0).unwrap();
        assert!((v - 4.0).abs() < 1e-8);
        assert_eq!(d.lambdas()[0], LAMBDA_FLOOR);
    }

    fn barrier_phi(j: &[f64], q: &[f64], c: f64, w: f64, d: &DualPoint<f64>) -> f64 {
        let log_sum: f64 = d.lambdas().iter().zip(q).filter(|(_, &m)| m > 0.0).map(|(l, _)| l.ln()).sum();
        let g = match d {
            DualPoint::WeightedL2(p) => l2_value(j, q, c, p.lambda, p.nu),
            DualPoint::DensityRatio(p) => dr_value(j, q, c, &p.lambdas, p.nu).unwrap(),
        };
        g - w * log_sum
    }

    #[test]
    fn barrier_multipliers_are_stationary() {
        let mut rng = seeded(33);
        for k in 0..40 {
            let m = 3 + k % 5;
            let j: Vec<f64> = uniform_costs(&mut rng, m, 0.0, 50.0);
            let q = random_reference::<f64, _>(&mut rng, m);
            let c = [0.4, 1.0, 3.0][k % 3];
            let w = [0.1, 0.004][k % 2];
            for kind in [BallKind::WeightedL2, BallKind::DensityRatio] {
                let d = match kind {
                    BallKind::WeightedL2 => DualPoint::WeightedL2(barrier_l2(&j, q.mass(), c, w)),
                    _ => DualPoint::DensityRatio(barrier_dr(&j, q.mass(), c, w)),
                };
                let base = barrier_phi(&j, q.mass(), c, w, &d);
                let value = barrier_duals(&j, q.mass(), kind, c, w).unwrap().value;
                assert!((base - value).abs() <= 1e-12 * (1.0 + base.abs()));
                // Relative perturbations of each multiplier never decrease Phi.
                let count = d.lambdas().len();
                for i in 0..=count {
                    for step in [1e-4, -1e-4] {
                        let mut p = d.clone();
                        match &mut p {
                            DualPoint::WeightedL2(p) if i == 0 => p.lambda *= 1.0 + step,
                            DualPoint::DensityRatio(p) if i < count => p.lambdas[i] *= 1.0 + step,
                            DualPoint::WeightedL2(p) => p.nu += step,
                            DualPoint::DensityRatio(p) => p.nu += step,
                        }
                        let v = barrier_phi(&j, q.mass(), c, w, &p);
                        assert!(v >= base - 1e-9 * (1.0 + base.abs()), "{kind:?} {i} {v} {base}");
                    }
                }
            }
        }
    }

    #[test]
    fn barrier_cost_gradient_matches_differences() {
        let mut rng = seeded(34);
        for k in 0..30 {
            let m = 3 + k % 5;
            let j: Vec<f64> = uniform_costs(&mut rng, m, 0.0, 20.0);
            let q = random_reference::<f64, _>(&mut rng, m);
            let c = [0.5, 2.0][k % 2];
            for kind in [BallKind::WeightedL2, BallKind::DensityRatio] {
                let b = barrier_duals(&j, q.mass(), kind, c, 0.05).unwrap();
                let fd: Vec<f64> = (0..m)
                    .map(|i| {
                        let at = |h: f64| {
                            let mut jj = j.clone();
                            jj[i] += h;
                            barrier_duals(&jj, q.mass(), kind, c, 0.05).unwrap().value
                        };
                        (at(1e-5) - at(-1e-5)) / 2e-5
                    })
                    .collect();
                let err = crate::solver::relative_error(&b.d_costs, &fd);
                assert!(err <= 1e-5, "{kind:?} {err}");
            }
        }
    }

    #[test]
    fn zero_mass_outcomes_stay_finite() {
        let j = [1.0f64, 5.0, 3.0];
        let q = [0.5, 0.0, 0.5];
        let b = barrier_duals(&j, &q, BallKind::DensityRatio, 1.0, 0.1).unwrap();
        assert!(b.value.is_finite());
        assert_eq!(b.d_costs[1], 0.0);
    }

    #[test]
    fn tv_is_unsupported() {
        let j = CostVector::new(vec![1.0, 2.0]).unwrap();
        let q = ReferenceDistribution::uniform(2).unwrap();
        assert!(matches!(
            minimize_duals(&j, &q, BallKind::TotalVariation, 0.5),
            Err(DdroError::UnsupportedBall { .. })
        ));
    }
}
