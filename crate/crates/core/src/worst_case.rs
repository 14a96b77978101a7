//! Inner maximization: the worst-case expectation over a ball, its maximizer
//! and its multipliers.
//!
//! [`oracle_worst_expectation`] is a deliberately independent brute-force
//! path (greedy linear programs and projected ascent) kept for verification.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distribution::{check_len, check_radius, Ball, BallKind, DiscreteDistribution, ReferenceDistribution};
use crate::dual::{DualPoint, DualPointDR, DualPointL2};
use crate::error::{DdroError, Result};
use crate::risk::{f_beta_slice, moments, var_slice, CostVector};
use crate::scalar::{dot, Real};
use crate::sampling::dirichlet_mass;

/// Largest instance the oracle accepts.
pub const ORACLE_MAX_OUTCOMES: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct WorstCaseResult<T: Real> {
    pub value: T,
    /// An attaining distribution, when one is reconstructed.
    pub distribution: Option<DiscreteDistribution<T>>,
    /// Optimal multipliers. A zero `lambda` marks a boundary optimum that only
    /// the extended-value objective attains.
    pub multipliers: Option<DualPoint<T>>,
    /// True when the L2 value came from the mean-plus-deviation closed form.
    #[serde(default)]
    pub closed_form: bool,
}

/// Solution of the L2 inner problem in raw form.
#[derive(Debug, Clone)]
pub(crate) struct L2Inner<T> {
    pub value: T,
    pub lambda: T,
    pub nu: T,
    pub ratio: Vec<T>,
    pub closed_form: bool,
}

/// Exact maximizer of `E_ref[J r]` over `E_ref[r] = 1`, `E_ref[(r-1)^2] <= c^2`, `r >= 0`.
///
/// Optimal densities have the form `r = (J - tau)_+ / E_ref[(J - tau)_+]`. The
/// squared norm `E[(J-tau)_+^2] / E[(J-tau)_+]^2` is non-decreasing in `tau`, so
/// the active radius fixes `tau` by bisection. When all outcomes stay active the
/// root is `tau = E[J] - std / c`, which gives the closed form.
pub(crate) fn l2_inner<T: Real>(costs: &[T], reference: &[T], c: T) -> L2Inner<T> {
    let two = T::lit(2.0);
    let (mean, var) = moments(costs, reference);
    let std = var.sqrt();
    let max = costs.iter().copied().fold(T::neg_infinity(), T::max);
    let min = costs.iter().copied().fold(T::infinity(), T::min);

    if std > T::zero() && min > mean - std / c && mean + c * std < max {
        let lambda = std / (two * c);
        let ratio = costs.iter().map(|&j| (T::one() + (j - mean) / (two * lambda)).max(T::zero())).collect();
        return L2Inner { value: mean + c * std, lambda, nu: mean, ratio, closed_form: true };
    }

    // Mass of the argmax set; the reference restricted to it is the closest
    // distribution attaining max J.
    let top: T = costs.iter().zip(reference).filter(|(&j, _)| j == max).map(|(_, &q)| q).sum();
    if T::one() / top - T::one() <= c * c {
        let ratio = costs.iter().map(|&j| if j == max { T::one() / top } else { T::zero() }).collect();
        return L2Inner { value: max, lambda: T::zero(), nu: max, ratio, closed_form: false };
    }

    let target = T::one() + c * c;
    let norm = |tau: T| {
        let (mut a, mut b) = (T::zero(), T::zero());
        for (&j, &q) in costs.iter().zip(reference) {
            let d = (j - tau).max(T::zero());
            a += q * d;
            b += q * d * d;
        }
        (a, b)
    };
    // norm ratio at `min` is <= target here, and tends to 1/top > target at `max`.
    let (mut lo, mut hi) = (min, max);
    for _ in 0..400 {
        let mid = (lo + hi) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        let (a, b) = norm(mid);
        if b > target * a * a {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let tau = lo;
    let (a, _) = norm(tau);
    let ratio: Vec<T> = costs.iter().map(|&j| (j - tau).max(T::zero()) / a).collect();
    let value = costs.iter().zip(reference).zip(&ratio).map(|((&j, &q), &r)| q * j * r).sum();
    // r = (J + 2 lambda - nu)_+ / (2 lambda) identifies the multipliers.
    let lambda = a / two;
    L2Inner { value, lambda, nu: tau + two * lambda, ratio, closed_form: false }
}

/// Solution of the density-ratio inner problem: `(value, nu*, lambda*)`.
pub(crate) fn dr_inner<T: Real>(costs: &[T], reference: &[T], c: T) -> (T, T, Vec<T>) {
    let beta = c / (T::one() + c);
    let nu = var_slice(costs, reference, beta);
    let value = f_beta_slice(costs, reference, beta, nu);
    let lambdas = costs.iter().map(|&j| (j - nu).max(T::zero())).collect();
    (value, nu, lambdas)
}

/// Fills the caps `(1 + c) ref(i)` in descending cost order.
fn greedy_fill<T: Real>(costs: &[T], reference: &[T], c: T) -> Vec<T> {
    let mut order: Vec<usize> = (0..costs.len()).collect();
    order.sort_by(|&a, &b| costs[b].partial_cmp(&costs[a]).expect("finite costs"));
    let mut p = vec![T::zero(); costs.len()];
    let mut remaining = T::one();
    for i in order {
        if remaining <= T::zero() {
            break;
        }
        let take = ((T::one() + c) * reference[i]).min(remaining);
        p[i] = take;
        remaining -= take;
    }
    p
}

fn prepare<T: Real>(costs: &CostVector<T>, reference: &ReferenceDistribution<T>, c: T) -> Result<()> {
    check_radius(c)?;
    check_len(reference.len(), costs.len())
}

fn from_ratio<T: Real>(reference: &[T], ratio: &[T]) -> Result<DiscreteDistribution<T>> {
    DiscreteDistribution::new(reference.iter().zip(ratio).map(|(&q, &r)| q * r).collect())
}

pub fn worst_expectation_l2<T: Real>(
    costs: &CostVector<T>,
    reference: &ReferenceDistribution<T>,
    c: T,
) -> Result<WorstCaseResult<T>> {
    prepare(costs, reference, c)?;
    let (_, var) = moments(costs.values(), reference.mass());
    if var == T::zero() {
        return Ok(WorstCaseResult {
            value: costs.max(),
            distribution: Some(reference.as_distribution().clone()),
            multipliers: None,
            closed_form: false,
        });
    }
    let sol = l2_inner(costs.values(), reference.mass(), c);
    Ok(WorstCaseResult {
        value: sol.value,
        distribution: Some(from_ratio(reference.mass(), &sol.ratio)?),
        multipliers: Some(DualPoint::WeightedL2(DualPointL2 { lambda: sol.lambda, nu: sol.nu })),
        closed_form: sol.closed_form,
    })
}

pub fn worst_expectation_dr<T: Real>(
    costs: &CostVector<T>,
    reference: &ReferenceDistribution<T>,
    c: T,
) -> Result<WorstCaseResult<T>> {
    prepare(costs, reference, c)?;
    let (value, nu, lambdas) = dr_inner(costs.values(), reference.mass(), c);
    let p = greedy_fill(costs.values(), reference.mass(), c);
    Ok(WorstCaseResult {
        value,
        distribution: Some(DiscreteDistribution::new(p)?),
        multipliers: Some(DualPoint::DensityRatio(DualPointDR { lambdas, nu })),
        closed_form: false,
    })
}

/// Exact total-variation worst case: move up to `c/2` mass from the cheapest
/// outcomes onto the most expensive one.
pub fn worst_expectation_tv<T: Real>(
    costs: &CostVector<T>,
    reference: &ReferenceDistribution<T>,
    c: T,
) -> Result<WorstCaseResult<T>> {
    prepare(costs, reference, c)?;
    let p = tv_shift(costs.values(), reference.mass(), c);
    let value = dot(&p, costs.values());
    Ok(WorstCaseResult {
        value,
        distribution: Some(DiscreteDistribution::new(p)?),
        multipliers: None,
        closed_form: false,
    })
}

fn tv_shift<T: Real>(costs: &[T], reference: &[T], c: T) -> Vec<T> {
    let mut order: Vec<usize> = (0..costs.len()).collect();
    order.sort_by(|&a, &b| costs[a].partial_cmp(&costs[b]).expect("finite costs"));
    let top = *order.last().expect("non-empty");
    let mut p = reference.to_vec();
    let mut budget = (c / T::lit(2.0)).min(T::one() - reference[top]);
    for &i in &order[..order.len() - 1] {
        if budget <= T::zero() {
            break;
        }
        let moved = p[i].min(budget);
        p[i] -= moved;
        p[top] += moved;
        budget -= moved;
    }
    p
}

/// Worst-case expectation over any supported ball.
pub fn worst_expectation<T: Real>(costs: &CostVector<T>, ball: &Ball<T>) -> Result<WorstCaseResult<T>> {
    match ball.kind() {
        BallKind::WeightedL2 => worst_expectation_l2(costs, ball.reference(), ball.radius()),
        BallKind::DensityRatio => worst_expectation_dr(costs, ball.reference(), ball.radius()),
        BallKind::TotalVariation => worst_expectation_tv(costs, ball.reference(), ball.radius()),
    }
}

/// Brute-force worst-case expectation for small instances.
///
/// Density-ratio and total-variation balls are solved as greedy linear
/// programs. The L2 ball uses projected gradient ascent over density ratios
/// with 20 random restarts; that path is an oracle only.
pub fn oracle_worst_expectation<T: Real, R: Rng + ?Sized>(
    costs: &CostVector<T>,
    ball: &Ball<T>,
    rng: &mut R,
) -> Result<T> {
    let m = costs.len();
    if m > ORACLE_MAX_OUTCOMES {
        return Err(DdroError::TooLarge { outcomes: m, max: ORACLE_MAX_OUTCOMES });
    }
    check_len(ball.reference().len(), m)?;
    let (j, q, c) = (costs.values(), ball.reference().mass(), ball.radius());
    Ok(match ball.kind() {
        BallKind::DensityRatio => dot(&greedy_fill(j, q, c), j),
        BallKind::TotalVariation => dot(&tv_shift(j, q, c), j),
        BallKind::WeightedL2 => {
            let j64: Vec<f64> = j.iter().map(|v| v.as_f64()).collect();
            let q64: Vec<f64> = q.iter().map(|v| v.as_f64()).collect();
            T::lit(l2_projected_ascent(&j64, &q64, c.as_f64(), rng))
        }
    })
}

const ASCENT_RESTARTS: usize = 20;
const ASCENT_ITERATIONS: usize = 10_000;

/// Projected ascent on `E_ref[J r]` in the reference-weighted metric.
pub(crate) fn l2_projected_ascent<R: Rng + ?Sized>(j: &[f64], q: &[f64], c: f64, rng: &mut R) -> f64 {
    let objective = |r: &[f64]| j.iter().zip(q).zip(r).map(|((a, b), c)| a * b * c).sum::<f64>();
    let mean: f64 = j.iter().zip(q).map(|(a, b)| a * b).sum();
    let spread = j.iter().fold(0f64, |s, &v| s.max((v - mean).abs())).max(1e-300);
    let direction: Vec<f64> = j.iter().map(|v| (v - mean) / spread).collect();
    let max_step = 1e4;

    let mut best = f64::NEG_INFINITY;
    for _ in 0..ASCENT_RESTARTS {
        let start: Vec<f64> = dirichlet_mass(rng, j.len()).iter().zip(q).map(|(p, w)| p / w).collect();
        let mut r = project_l2_feasible(&start, q, c);
        let mut f = objective(&r);
        let mut step = 1.0;
        let mut stalls = 0;
        for _ in 0..ASCENT_ITERATIONS {
            let trial: Vec<f64> = r.iter().zip(&direction).map(|(a, d)| a + step * d).collect();
            let next = project_l2_feasible(&trial, q, c);
            let fnext = objective(&next);
            if fnext > f {
                let gain = fnext - f;
                r = next;
                f = fnext;
                step = (step * 2.0).min(max_step);
                stalls = if gain <= 1e-14 * (1.0 + f.abs()) { stalls + 1 } else { 0 };
            } else {
                step *= 0.5;
                stalls += 1;
            }
            if stalls >= 60 {
                break;
            }
        }
        best = best.max(f);
    }
    best
}

/// Dykstra's projection onto `{E[r] = 1, E[(r-1)^2] <= c^2} ∩ {r >= 0}` in the
/// reference-weighted inner product.
fn project_l2_feasible(y: &[f64], q: &[f64], c: f64) -> Vec<f64> {
    let m = y.len();
    let mut x = y.to_vec();
    let mut p = vec![0.0; m];
    let mut s = vec![0.0; m];
    for _ in 0..5000 {
        let a: Vec<f64> = x.iter().zip(&p).map(|(x, p)| x + p).collect();
        let u = project_plane_ball(&a, q, c);
        p = a.iter().zip(&u).map(|(a, u)| a - u).collect();
        let b: Vec<f64> = u.iter().zip(&s).map(|(u, s)| u + s).collect();
        let next: Vec<f64> = b.iter().map(|v| v.max(0.0)).collect();
        s = b.iter().zip(&next).map(|(b, n)| b - n).collect();
        let change = next.iter().zip(&x).fold(0f64, |d, (a, b)| d.max((a - b).abs()));
        x = next;
        if change <= 1e-14 {
            break;
        }
    }
    feasible_repair(&x, q, c)
}

/// Maps a non-negative vector to an exactly feasible density ratio: rescale
/// to unit reference mean, then shrink toward 1 into the ball.
fn feasible_repair(x: &[f64], q: &[f64], c: f64) -> Vec<f64> {
    let mass: f64 = x.iter().zip(q).map(|(a, b)| a.max(0.0) * b).sum();
    if !(mass > 0.0) {
        return vec![1.0; x.len()];
    }
    let mut r: Vec<f64> = x.iter().map(|a| a.max(0.0) / mass).collect();
    let dist = r.iter().zip(q).map(|(v, w)| w * (v - 1.0).powi(2)).sum::<f64>().sqrt();
    if dist > c {
        let k = c / dist;
        r.iter_mut().for_each(|v| *v = 1.0 + k * (*v - 1.0));
    }
    r
}

fn project_plane_ball(y: &[f64], q: &[f64], c: f64) -> Vec<f64> {
    let shift: f64 = y.iter().zip(q).map(|(a, b)| a * b).sum::<f64>() - 1.0;
    let mut u: Vec<f64> = y.iter().map(|v| v - shift).collect();
    let dist = u.iter().zip(q).map(|(v, w)| w * (v - 1.0).powi(2)).sum::<f64>().sqrt();
    if dist > c {
        let k = c / dist;
        u.iter_mut().for_each(|v| *v = 1.0 + k * (*v - 1.0));
    }
    u
}
