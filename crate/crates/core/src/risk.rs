//! Discrete risk measures: VaR, the two conditional tail expectations, the
//! `F_beta` auxiliary function, mean-plus-deviation and worst-C averages.
//!
//! All expectations are taken under a [`ReferenceDistribution`].

use serde::{Deserialize, Serialize};

use crate::distribution::{check_len, ReferenceDistribution};
use crate::error::{DdroError, Result};
use crate::scalar::Real;

/// Slack used when comparing cumulative mass against a probability level.
const LEVEL_TOLERANCE: f64 = 1e-12;

/// Costs `J(x, i)` of every outcome for one fixed decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "Vec<T>",
    into = "Vec<T>",
    bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>")
)]
pub struct CostVector<T: Real> {
    values: Vec<T>,
}

impl<T: Real> CostVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(DdroError::NonFiniteCost { index });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> T {
        self.values.iter().fold(T::neg_infinity(), |m, &v| m.max(v))
    }

    pub fn min(&self) -> T {
        self.values.iter().fold(T::infinity(), |m, &v| m.min(v))
    }
}

impl<T: Real> TryFrom<Vec<T>> for CostVector<T> {
    type Error = DdroError;

    fn try_from(values: Vec<T>) -> Result<Self> {
        Self::new(values)
    }
}

impl<T: Real> From<CostVector<T>> for Vec<T> {
    fn from(c: CostVector<T>) -> Self {
        c.values
    }
}

/// Probability level `beta` in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbabilityLevel<T: Real>(T);

impl<T: Real> ProbabilityLevel<T> {
    pub fn new(beta: T) -> Result<Self> {
        if !(beta >= T::zero() && beta < T::one()) {
            return Err(DdroError::InvalidProbabilityLevel { beta: beta.as_f64() });
        }
        Ok(Self(beta))
    }

    /// Level `c / (1 + c)` matched to a density-ratio ball of radius `c`.
    pub fn from_radius(c: T) -> Result<Self> {
        crate::distribution::check_radius(c)?;
        Self::new(c / (T::one() + c))
    }

    /// Radius `beta / (1 - beta)` of the density-ratio ball matched to this level.
    pub fn to_radius(self) -> T {
        self.0 / (T::one() - self.0)
    }

    pub fn value(self) -> T {
        self.0
    }
}

/// Smallest support value whose cumulative reference mass reaches `beta`.
pub fn value_at_risk<T: Real>(
    costs: &CostVector<T>,
    reference: &ReferenceDistribution<T>,
    beta: ProbabilityLevel<T>,
) -> Result<T> {
    check_len(reference.len(), costs.len())?;
    Ok(var_slice(costs.values(), reference.mass(), beta.value()))
}

pub(crate) fn var_slice<T: Real>(costs: &[T], reference: &[T], beta: T) -> T {
    let mut order: Vec<usize> = (0..costs.len()).collect();
    order.sort_by(|&a, &b| costs[a].partial_cmp(&costs[b]).expect("finite costs"));
    let target = beta - T::lit(LEVEL_TOLERANCE);
    let mut cumulative = T::zero();
    for &i in &order {
        cumulative += reference[i];
        if cumulative >= target {
            return costs[i];
        }
    }
    costs[*order.last().expect("non-empty costs")]
}

/// Conditional mean over the strict exceedance `{J > VaR_beta}`.
///
/// Falls back to `VaR_beta` itself when that event has zero reference mass.
pub fn cvar_hat<T: Real>(
    costs: &CostVector<T>,
    reference: &ReferenceDistribution<T>,
    beta: ProbabilityLevel<T>,
) -> Result<T> {
    let var = value_at_risk(costs, reference, beta)?;
    Ok(conditional_mean(costs.values(), reference.mass(), |j| j > var).unwrap_or(var))
}

/// Conditional mean over the non-strict exceedance `{J >= VaR_beta}`.
pub fn cvar_nonstrict<T: Real>(
    costs: &CostVector<T>,
    reference: &ReferenceDistribution<T>,
    beta: ProbabilityLevel<T>,
) -> Result<T> {
    let var = value_at_risk(costs, reference, beta)?;
    Ok(conditional_mean(costs.values(), reference.mass(), |j| j >= var).unwrap_or(var))
}

fn conditional_mean<T: Real>(costs: &[T], reference: &[T], event: impl Fn(T) -> bool) -> Option<T> {
    let (mass, weighted) = costs
        .iter()
        .zip(reference)
        .filter(|(&j, _)| event(j))
        .fold((T::zero(), T::zero()), |(m, w), (&j, &q)| (m + q, w + q * j));
    (mass > T::zero()).then(|| weighted / mass)
}

/// `nu + E_ref[max(0, J - nu)] / (1 - beta)`.
pub fn f_beta<T: Real>(
    costs: &CostVector<T>,
    reference: &ReferenceDistribution<T>,
    beta: ProbabilityLevel<T>,
    nu: T,
) -> Result<T> {
    check_len(reference.len(), costs.len())?;
    Ok(f_beta_slice(costs.values(), reference.mass(), beta.value(), nu))
}

pub(crate) fn f_beta_slice<T: Real>(costs: &[T], reference: &[T], beta: T, nu: T) -> T {
    let excess: T = costs.iter().zip(reference).map(|(&j, &q)| q * (j - nu).max(T::zero())).sum();
    nu + excess / (T::one() - beta)
}

/// `f_beta` evaluated at its minimizer `nu = VaR_beta`.
pub fn f_beta_at_var<T: Real>(
    costs: &CostVector<T>,
    reference: &ReferenceDistribution<T>,
    beta: ProbabilityLevel<T>,
) -> Result<T> {
    let var = value_at_risk(costs, reference, beta)?;
    f_beta(costs, reference, beta, var)
}

pub fn mean<T: Real>(costs: &CostVector<T>, reference: &ReferenceDistribution<T>) -> Result<T> {
    reference.expectation(costs.values())
}

/// Two-pass variance `E[(J - E[J])^2]`.
pub fn variance<T: Real>(costs: &CostVector<T>, reference: &ReferenceDistribution<T>) -> Result<T> {
    check_len(reference.len(), costs.len())?;
    Ok(moments(costs.values(), reference.mass()).1)
}

pub fn std_dev<T: Real>(costs: &CostVector<T>, reference: &ReferenceDistribution<T>) -> Result<T> {
    Ok(variance(costs, reference)?.sqrt())
}

pub(crate) fn moments<T: Real>(costs: &[T], reference: &[T]) -> (T, T) {
    let mean = crate::scalar::dot(costs, reference);
    let var = costs.iter().zip(reference).map(|(&j, &q)| q * (j - mean).powi(2)).sum();
    (mean, var)
}

/// `E[J] + c * sqrt(Var[J])`.
pub fn mean_std_objective<T: Real>(
    costs: &CostVector<T>,
    reference: &ReferenceDistribution<T>,
    c: T,
) -> Result<T> {
    check_len(reference.len(), costs.len())?;
    if !(c >= T::zero()) {
        return Err(DdroError::NonPositiveRadius { radius: c.as_f64() });
    }
    let (mean, var) = moments(costs.values(), reference.mass());
    Ok(mean + c * var.sqrt())
}

/// Average of the `count` largest costs.
pub fn worst_c_average<T: Real>(costs: &CostVector<T>, count: usize) -> Result<T> {
    let m = costs.len();
    if count == 0 || count > m {
        return Err(DdroError::CountOutOfRange { count, outcomes: m });
    }
    let mut sorted = costs.values().to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite costs"));
    let top: T = sorted[..count].iter().copied().sum();
    Ok(top / T::from_count(count))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn costs(v: &[f64]) -> CostVector<f64> {
        CostVector::new(v.to_vec()).unwrap()
    }

    fn level(b: f64) -> ProbabilityLevel<f64> {
        ProbabilityLevel::new(b).unwrap()
    }

    fn u4() -> ReferenceDistribution<f64> {
        ReferenceDistribution::uniform(4).unwrap()
    }

    #[test]
    fn var_examples() {
        let j = costs(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(value_at_risk(&j, &u4(), level(0.5)).unwrap(), 2.0);
        assert_eq!(value_at_risk(&j, &u4(), level(0.0)).unwrap(), 1.0);
        assert_eq!(value_at_risk(&costs(&[5.0; 4]), &u4(), level(0.7)).unwrap(), 5.0);
        // Unsorted input and a level reached between atoms.
        let j = costs(&[4.0, 1.0, 3.0, 2.0]);
        assert_eq!(value_at_risk(&j, &u4(), level(0.6)).unwrap(), 3.0);
    }

    #[test]
    fn cvar_examples() {
        let j = costs(&[1.0, 2.0, 3.0, 4.0]);
        assert_abs_diff_eq!(cvar_hat(&j, &u4(), level(0.5)).unwrap(), 3.5);
        assert_abs_diff_eq!(cvar_hat(&costs(&[5.0; 4]), &u4(), level(0.5)).unwrap(), 5.0);
        assert_abs_diff_eq!(cvar_hat(&j, &u4(), level(0.0)).unwrap(), 3.0);
        assert_abs_diff_eq!(cvar_nonstrict(&j, &u4(), level(0.5)).unwrap(), 3.0);
        assert_abs_diff_eq!(cvar_nonstrict(&costs(&[5.0; 4]), &u4(), level(0.3)).unwrap(), 5.0);
        assert_abs_diff_eq!(cvar_nonstrict(&j, &u4(), level(0.0)).unwrap(), 2.5);
    }

    #[test]
    fn f_beta_examples() {
        let j = costs(&[1.0, 2.0, 3.0, 4.0]);
        assert_abs_diff_eq!(f_beta(&j, &u4(), level(0.5), 2.0).unwrap(), 3.5);
        assert_abs_diff_eq!(f_beta(&j, &u4(), level(0.5), 4.5).unwrap(), 4.5);
        assert_abs_diff_eq!(f_beta(&j, &u4(), level(0.0), 1.0).unwrap(), 2.5);
    }

    #[test]
    fn mean_std_examples() {
        let j = costs(&[1.0, 2.0, 3.0, 4.0]);
        assert_abs_diff_eq!(mean_std_objective(&j, &u4(), 0.5).unwrap(), 3.059017, epsilon = 1e-6);
        assert_abs_diff_eq!(mean_std_objective(&j, &u4(), 0.0).unwrap(), 2.5);
        assert_abs_diff_eq!(mean_std_objective(&costs(&[5.0; 4]), &u4(), 3.0).unwrap(), 5.0);
        assert_abs_diff_eq!(variance(&j, &u4()).unwrap(), 1.25);
    }

    #[test]
    fn worst_c_examples() {
        let j = costs(&[1.0, 2.0, 3.0, 4.0]);
        assert_abs_diff_eq!(worst_c_average(&j, 2).unwrap(), 3.5);
        assert_abs_diff_eq!(worst_c_average(&j, 4).unwrap(), 2.5);
        assert_abs_diff_eq!(worst_c_average(&j, 1).unwrap(), 4.0);
        assert!(matches!(worst_c_average(&j, 0), Err(DdroError::CountOutOfRange { .. })));
        assert!(matches!(worst_c_average(&j, 5), Err(DdroError::CountOutOfRange { .. })));
    }

    #[test]
    fn worst_c_matches_enumeration_of_tuples() {
        // Brute force over all distinct C-subsets.
        let j = [3.0, -1.0, 7.5, 2.0, 7.5, 0.25];
        let cv = costs(&j);
        for count in 1..=j.len() {
            let mut best = f64::NEG_INFINITY;
            for mask in 0u32..(1 << j.len()) {
                if mask.count_ones() as usize == count {
                    let s: f64 = (0..j.len()).filter(|i| mask & (1 << i) != 0).map(|i| j[i]).sum();
                    best = best.max(s / count as f64);
                }
            }
            assert_abs_diff_eq!(worst_c_average(&cv, count).unwrap(), best, epsilon = 1e-12);
        }
    }

    #[test]
    fn level_validation() {
        assert!(ProbabilityLevel::new(1.0).is_err());
        assert!(ProbabilityLevel::new(-0.1).is_err());
        assert_abs_diff_eq!(ProbabilityLevel::from_radius(3.0).unwrap().value(), 0.75);
        assert_abs_diff_eq!(level(0.75).to_radius(), 3.0);
        assert!(CostVector::new(vec![1.0, f64::INFINITY]).is_err());
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
        (3usize..=10).prop_flat_map(|m| {
            (
                proptest::collection::vec(0.0..10.0f64, m),
                proptest::collection::vec(0.05..1.0f64, m),
                0.0..0.99f64,
            )
        })
    }

    fn normalized(w: &[f64]) -> ReferenceDistribution<f64> {
        let s: f64 = w.iter().sum();
        ReferenceDistribution::new(w.iter().map(|v| v / s).collect()).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn sandwich_ordering((j, w, beta) in instance()) {
            let (j, q, b) = (costs(&j), normalized(&w), level(beta));
            let lower = cvar_nonstrict(&j, &q, b).unwrap();
            let mid = f_beta_at_var(&j, &q, b).unwrap();
            let upper = cvar_hat(&j, &q, b).unwrap();
            prop_assert!(lower <= mid + 1e-9, "{lower} > {mid}");
            prop_assert!(mid <= upper + 1e-9, "{mid} > {upper}");
        }

        #[test]
        fn var_minimizes_f_beta((j, w, beta) in instance()) {
            let (j, q, b) = (costs(&j), normalized(&w), level(beta));
            let at_var = f_beta_at_var(&j, &q, b).unwrap();
            let (lo, hi) = (j.min() - 1.0, j.max() + 1.0);
            let steps = ((hi - lo) / 1e-3) as usize;
            for k in 0..=steps {
                let nu = lo + k as f64 * 1e-3;
                prop_assert!(f_beta(&j, &q, b, nu).unwrap() >= at_var - 1e-6);
            }
        }

        #[test]
        fn mean_std_is_permutation_invariant((j, w, _b) in instance(), c in 0.0..3.0f64, shift in 0usize..10) {
            let q = normalized(&w);
            let base = mean_std_objective(&costs(&j), &q, c).unwrap();
            let m = j.len();
            let k = shift % m;
            let rot_j: Vec<f64> = (0..m).map(|i| j[(i + k) % m]).collect();
            let rot_q: Vec<f64> = (0..m).map(|i| q.mass()[(i + k) % m]).collect();
            let rotated = mean_std_objective(&costs(&rot_j), &ReferenceDistribution::new(rot_q).unwrap(), c).unwrap();
            prop_assert!((base - rotated).abs() <= 1e-9);
        }
    }

    #[test]
    fn tight_level_makes_f_beta_equal_cvar_hat() {
        // Uniform reference with m(1 - beta) integral: every level is attained exactly.
        let mut rng = crate::sampling::seeded(7);
        for m in 2..=10usize {
            let q = ReferenceDistribution::uniform(m).unwrap();
            for k in 1..m {
                let b = level(k as f64 / m as f64);
                for _ in 0..20 {
                    let j = costs(&crate::sampling::uniform_costs(&mut rng, m, 0.0, 10.0));
                    let lhs = f_beta_at_var(&j, &q, b).unwrap();
                    let rhs = cvar_hat(&j, &q, b).unwrap();
                    assert!((lhs - rhs).abs() <= 1e-9, "m={m} k={k}: {lhs} vs {rhs}");
                }
            }
        }
    }

    #[test]
    fn worst_c_bridges_to_f_beta() {
        let mut rng = crate::sampling::seeded(11);
        for m in [4usize, 6, 9] {
            let q = ReferenceDistribution::uniform(m).unwrap();
            for count in 1..=m {
                let b = level(1.0 - count as f64 / m as f64);
                let j = costs(&crate::sampling::uniform_costs(&mut rng, m, 0.0, 10.0));
                let lhs = worst_c_average(&j, count).unwrap();
                let rhs = f_beta_at_var(&j, &q, b).unwrap();
                assert!((lhs - rhs).abs() <= 1e-9);
            }
        }
    }
}
