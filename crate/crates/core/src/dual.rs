//! Smooth dual objectives of the inner worst-case expectation.
//!
//! For a fixed decision the worst-case expectation over a weighted-L2 ball
//! equals the infimum over `(lambda, nu)` of
//!
//! ```text
//! g_l2 = lambda * E_ref[max(0, (J + 2 lambda - nu) / (2 lambda))^2] + lambda (c^2 - 1) + nu
//! ```
//!
//! and over a density-ratio ball the infimum over `(lambda_1..lambda_m, nu)` of
//!
//! ```text
//! g_dr = E_ref[(1 + c) lambda_i exp((J_i - lambda_i - nu) / lambda_i)] + nu.
//! ```
//!
//! The `*_extended` variants add the `lambda = 0` boundary cases, where the
//! value is `nu` if every affected cost is at most `nu` and `+inf` otherwise.
//!
//! Gradients come back with respect to the multipliers and with respect to
//! each cost entry, so callers can chain through `dJ/dx`.

use serde::{Deserialize, Serialize};

use crate::distribution::{check_len, check_radius, ReferenceDistribution};
use crate::error::{DdroError, Result};
use crate::risk::CostVector;
use crate::scalar::Real;

/// Exponent arguments above this value are rejected by `g_dr`.
pub const EXPONENT_GUARD: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct DualPointL2<T: Real> {
    pub lambda: T,
    pub nu: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct DualPointDR<T: Real> {
    pub lambdas: Vec<T>,
    pub nu: T,
}

/// Lagrange multipliers of either ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "kind",
    rename_all = "snake_case",
    bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>")
)]
pub enum DualPoint<T: Real> {
    WeightedL2(DualPointL2<T>),
    DensityRatio(DualPointDR<T>),
}

impl<T: Real> DualPoint<T> {
    pub fn nu(&self) -> T {
        match self {
            DualPoint::WeightedL2(d) => d.nu,
            DualPoint::DensityRatio(d) => d.nu,
        }
    }

    /// The inequality multipliers, one for L2 and `m` for the density-ratio ball.
    pub fn lambdas(&self) -> &[T] {
        match self {
            DualPoint::WeightedL2(d) => std::slice::from_ref(&d.lambda),
            DualPoint::DensityRatio(d) => &d.lambdas,
        }
    }
}

/// A value on the extended real line `R ∪ {+inf}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended<T> {
    Finite(T),
    Infinite,
}

impl<T: Real> Extended<T> {
    pub fn is_finite(&self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    pub fn finite(self) -> Option<T> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::Infinite => None,
        }
    }
}

/// Partial derivatives of a dual objective.
#[derive(Debug, Clone, PartialEq)]
pub struct DualGradient<T> {
    /// `(d/dlambda_1, ..., d/dlambda_k, d/dnu)`.
    pub multipliers: Vec<T>,
    /// `d/dJ(i)` for every outcome.
    pub costs: Vec<T>,
}

fn check_inputs<T: Real>(costs: &CostVector<T>, reference: &ReferenceDistribution<T>, c: T) -> Result<()> {
    check_len(reference.len(), costs.len())?;
    check_radius(c)
}

fn check_lambda<T: Real>(lambda: T) -> Result<()> {
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(DdroError::NonPositiveLambda { value: lambda.as_f64() });
    }
    Ok(())
}

pub fn g_l2<T: Real>(
    costs: &CostVector<T>,
    reference: &ReferenceDistribution<T>,
    c: T,
    dual: &DualPointL2<T>,
) -> Result<T> {
    check_inputs(costs, reference, c)?;
    check_lambda(dual.lambda)?;
    Ok(l2_value(costs.values(), reference.mass(), c, dual.lambda, dual.nu))
}

pub fn g_l2_extended<T: Real>(
    costs: &CostVector<T>,
    reference: &ReferenceDistribution<T>,
    c: T,
    lambda: T,
    nu: T,
) -> Result<Extended<T>> {
    check_inputs(costs, reference, c)?;
    Ok(if lambda > T::zero() {
        Extended::Finite(l2_value(costs.values(), reference.mass(), c, lambda, nu))
    } else if lambda == T::zero() && costs.max() <= nu {
        Extended::Finite(nu)
    } else {
        Extended::Infinite
    })
}

pub fn g_dr<T: Real>(
    costs: &CostVector<T>,
    reference: &ReferenceDistribution<T>,
    c: T,
    dual: &DualPointDR<T>,
) -> Result<T> {
    check_inputs(costs, reference, c)?;
    check_len(costs.len(), dual.lambdas.len())?;
    for &l in &dual.lambdas {
        check_lambda(l)?;
    }
    dr_value(costs.values(), reference.mass(), c, &dual.lambdas, dual.nu)
}

pub fn g_dr_extended<T: Real>(
    costs: &CostVector<T>,
    reference: &ReferenceDistribution<T>,
    c: T,
    lambdas: &[T],
    nu: T,
) -> Result<Extended<T>> {
    check_inputs(costs, reference, c)?;
    check_len(costs.len(), lambdas.len())?;
    let scale = T::one() + c;
    let mut total = T::zero();
    for ((&j, &q), &l) in costs.values().iter().zip(reference.mass()).zip(lambdas) {
        let term = if l > T::zero() {
            scale * l * ((j - l - nu) / l).exp()
        } else if l == T::zero() && j <= nu {
            T::zero()
        } else {
            return Ok(Extended::Infinite);
        };
        total += q * term;
    }
    let value = total + nu;
    Ok(if value.is_finite() { Extended::Finite(value) } else { Extended::Infinite })
}

/// Dual objective of whichever ball `dual` belongs to.
pub fn dual_objective<T: Real>(
    costs: &CostVector<T>,
    reference: &ReferenceDistribution<T>,
    c: T,
    dual: &DualPoint<T>,
) -> Result<T> {
    match dual {
        DualPoint::WeightedL2(d) => g_l2(costs, reference, c, d),
        DualPoint::DensityRatio(d) => g_dr(costs, reference, c, d),
    }
}

/// Analytic gradient of the dual objective in the smooth parameterization.
pub fn grad_duals<T: Real>(
    costs: &CostVector<T>,
    reference: &ReferenceDistribution<T>,
    c: T,
    dual: &DualPoint<T>,
) -> Result<DualGradient<T>> {
    check_inputs(costs, reference, c)?;
    let m = costs.len();
    match dual {
        DualPoint::WeightedL2(d) => {
            check_lambda(d.lambda)?;
            let mut d_costs = vec![T::zero(); m];
            let (d_lambda, d_nu) =
                l2_gradient(costs.values(), reference.mass(), c, d.lambda, d.nu, &mut d_costs);
            Ok(DualGradient { multipliers: vec![d_lambda, d_nu], costs: d_costs })
        }
        DualPoint::DensityRatio(d) => {
            check_len(m, d.lambdas.len())?;
            for &l in &d.lambdas {
                check_lambda(l)?;
            }
            let mut d_lambdas = vec![T::zero(); m];
            let mut d_costs = vec![T::zero(); m];
            let d_nu = dr_gradient(
                costs.values(),
                reference.mass(),
                c,
                &d.lambdas,
                d.nu,
                &mut d_lambdas,
                &mut d_costs,
            )?;
            d_lambdas.push(d_nu);
            Ok(DualGradient { multipliers: d_lambdas, costs: d_costs })
        }
    }
}

// Kernels over raw slices. Inputs are assumed validated by the caller.

/// `g_l2` written as `lambda * (E[q(v)] + c^2) + nu` with `v = (J - nu) / (2 lambda)`
/// and `q(v) = max(0, 1 + v)^2 - 1`, which avoids cancelling `lambda` against
/// `-lambda` when `lambda` is large.
pub(crate) fn l2_value<T: Real>(costs: &[T], reference: &[T], c: T, lambda: T, nu: T) -> T {
    let two = T::lit(2.0);
    let mut eq = T::zero();
    for (&j, &q) in costs.iter().zip(reference) {
        let v = (j - nu) / (two * lambda);
        let qv = if v > -T::one() { v * (v + two) } else { -T::one() };
        eq += q * qv;
    }
    lambda * (eq + c * c) + nu
}

/// Returns `(dg/dlambda, dg/dnu)` and writes `dg/dJ(i)` into `d_costs`.
pub(crate) fn l2_gradient<T: Real>(
    costs: &[T],
    reference: &[T],
    c: T,
    lambda: T,
    nu: T,
    d_costs: &mut [T],
) -> (T, T) {
    let two = T::lit(2.0);
    let mut d_lambda = c * c;
    let mut active = T::zero();
    for ((&j, &q), dj) in costs.iter().zip(reference).zip(d_costs.iter_mut()) {
        let v = (j - nu) / (two * lambda);
        if v > -T::one() {
            d_lambda -= q * v * v;
            active += q * (T::one() + v);
            *dj = q * (T::one() + v);
        } else {
            d_lambda -= q;
            *dj = T::zero();
        }
    }
    (d_lambda, T::one() - active)
}

fn dr_exponent<T: Real>(j: T, lambda: T, nu: T) -> Result<T> {
    let a = (j - lambda - nu) / lambda;
    if a > T::lit(EXPONENT_GUARD) || a.is_nan() {
        return Err(DdroError::OverflowGuard { exponent: a.as_f64() });
    }
    Ok(a)
}

pub(crate) fn dr_value<T: Real>(costs: &[T], reference: &[T], c: T, lambdas: &[T], nu: T) -> Result<T> {
    let scale = T::one() + c;
    let mut total = T::zero();
    for ((&j, &q), &l) in costs.iter().zip(reference).zip(lambdas) {
        total += q * scale * l * dr_exponent(j, l, nu)?.exp();
    }
    Ok(total + nu)
}

/// Returns `dg/dnu`; writes `dg/dlambda_i` and `dg/dJ(i)`.
pub(crate) fn dr_gradient<T: Real>(
    costs: &[T],
    reference: &[T],
    c: T,
    lambdas: &[T],
    nu: T,
    d_lambdas: &mut [T],
    d_costs: &mut [T],
) -> Result<T> {
    let scale = T::one() + c;
    let mut mass = T::zero();
    for i in 0..costs.len() {
        let (j, q, l) = (costs[i], reference[i], lambdas[i]);
        let e = dr_exponent(j, l, nu)?.exp();
        d_lambdas[i] = q * scale * e * (T::one() - (j - nu) / l);
        d_costs[i] = q * scale * e;
        mass += q * e;
    }
    Ok(T::one() - scale * mass)
}
