//! Discrete distributions, density ratios and the three ambiguity balls.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{DdroError, Result};
use crate::scalar::Real;

const NEGATIVE_MASS_TOLERANCE: f64 = 1e-12;
const NORMALIZATION_TOLERANCE: f64 = 1e-9;
/// Additive slack on the radius used by every membership test.
pub const MEMBERSHIP_TOLERANCE: f64 = 1e-12;

/// Loosens an `f64` tolerance to the round-off level of narrower scalars.
fn tolerance<T: Real>(base: f64) -> T {
    T::lit(base).max(T::epsilon() * T::lit(64.0))
}

/// Probability mass vector over outcomes `0..m`.
///
/// Entries are non-negative and sum to one. Masses in `[-1e-12, 0)` are
/// accepted as round-off and clamped to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "Vec<T>",
    into = "Vec<T>",
    bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>")
)]
pub struct DiscreteDistribution<T: Real> {
    mass: Vec<T>,
}

impl<T: Real> DiscreteDistribution<T> {
    pub fn new(mass: Vec<T>) -> Result<Self> {
        if mass.is_empty() {
            return Err(DdroError::EmptyDistribution);
        }
        let mut mass = mass;
        let floor = -tolerance::<T>(NEGATIVE_MASS_TOLERANCE);
        for (index, p) in mass.iter_mut().enumerate() {
            if p.is_nan() || *p < floor {
                return Err(DdroError::NegativeMass { index, value: p.as_f64() });
            }
            if *p < T::zero() {
                *p = T::zero();
            }
        }
        let sum: T = mass.iter().copied().sum();
        if !sum.is_finite() || (sum - T::one()).abs() > tolerance::<T>(NORMALIZATION_TOLERANCE) {
            return Err(DdroError::NotNormalized { sum: sum.as_f64() });
        }
        Ok(Self { mass })
    }

    /// Uniform distribution over `m` outcomes.
    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(DdroError::EmptyDistribution);
        }
        let p = T::one() / T::from_count(m);
        Ok(Self { mass: vec![p; m] })
    }

    /// Point mass on `index` among `m` outcomes.
    pub fn point_mass(m: usize, index: usize) -> Result<Self> {
        if index >= m {
            return Err(DdroError::DimensionMismatch { expected: m, actual: index + 1 });
        }
        let mut mass = vec![T::zero(); m];
        mass[index] = T::one();
        Ok(Self { mass })
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn mass(&self) -> &[T] {
        &self.mass
    }

    /// Expectation of `values` under this distribution.
    pub fn expectation(&self, values: &[T]) -> Result<T> {
        check_len(self.len(), values.len())?;
        Ok(crate::scalar::dot(&self.mass, values))
    }
}

impl<T: Real> TryFrom<Vec<T>> for DiscreteDistribution<T> {
    type Error = DdroError;

    fn try_from(mass: Vec<T>) -> Result<Self> {
        Self::new(mass)
    }
}

impl<T: Real> From<DiscreteDistribution<T>> for Vec<T> {
    fn from(d: DiscreteDistribution<T>) -> Self {
        d.mass
    }
}

/// A distribution with strictly positive mass everywhere; the center of every ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "Vec<T>",
    into = "Vec<T>",
    bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>")
)]
pub struct ReferenceDistribution<T: Real> {
    inner: DiscreteDistribution<T>,
}

impl<T: Real> ReferenceDistribution<T> {
    pub fn new(mass: Vec<T>) -> Result<Self> {
        DiscreteDistribution::new(mass)?.try_into()
    }

    pub fn uniform(m: usize) -> Result<Self> {
        Ok(Self { inner: DiscreteDistribution::uniform(m)? })
    }

    pub fn len(&self) -> usize {
        self.inner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.is_empty()
    }

    pub fn mass(&self) -> &[T] {
        self.inner.mass()
    }

    pub fn as_distribution(&self) -> &DiscreteDistribution<T> {
        &self.inner
    }

    pub fn expectation(&self, values: &[T]) -> Result<T> {
        self.inner.expectation(values)
    }

    /// Elementwise ratio `p(i) / ref(i)`.
    pub fn density_ratio(&self, p: &DiscreteDistribution<T>) -> Result<DensityRatioVector<T>> {
        check_len(self.len(), p.len())?;
        let ratio = p.mass().iter().zip(self.mass()).map(|(&pi, &qi)| pi / qi).collect();
        Ok(DensityRatioVector { ratio })
    }
}

impl<T: Real> TryFrom<DiscreteDistribution<T>> for ReferenceDistribution<T> {
    type Error = DdroError;

    fn try_from(inner: DiscreteDistribution<T>) -> Result<Self> {
        if let Some((index, &value)) =
            inner.mass().iter().enumerate().find(|(_, &p)| p <= T::zero())
        {
            return Err(DdroError::NonPositiveReference { index, value: value.as_f64() });
        }
        Ok(Self { inner })
    }
}

impl<T: Real> TryFrom<Vec<T>> for ReferenceDistribution<T> {
    type Error = DdroError;

    fn try_from(mass: Vec<T>) -> Result<Self> {
        Self::new(mass)
    }
}

impl<T: Real> From<ReferenceDistribution<T>> for Vec<T> {
    fn from(r: ReferenceDistribution<T>) -> Self {
        r.inner.mass
    }
}

/// Density ratio `r(i) = p(i) / ref(i)` of a candidate against a reference.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityRatioVector<T: Real> {
    ratio: Vec<T>,
}

impl<T: Real> DensityRatioVector<T> {
    pub fn ratio(&self) -> &[T] {
        &self.ratio
    }

    pub fn len(&self) -> usize {
        self.ratio.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratio.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallKind {
    #[serde(alias = "l2")]
    WeightedL2,
    #[serde(alias = "dr")]
    DensityRatio,
    #[serde(alias = "tv")]
    TotalVariation,
}

impl BallKind {
    pub fn name(self) -> &'static str {
        match self {
            BallKind::WeightedL2 => "weighted_l2",
            BallKind::DensityRatio => "density_ratio",
            BallKind::TotalVariation => "total_variation",
        }
    }

    /// Distance of `p` from `reference` in the metric defining this ball.
    ///
    /// * weighted L2: `sqrt(E_ref[(r - 1)^2])`
    /// * density ratio: `max_i r(i) - 1`, floored at zero
    /// * total variation: `E_ref[|r - 1|]`
    pub fn distance<T: Real>(
        self,
        reference: &ReferenceDistribution<T>,
        p: &DiscreteDistribution<T>,
    ) -> Result<T> {
        let r = reference.density_ratio(p)?;
        let q = reference.mass();
        let one = T::one();
        let d = match self {
            BallKind::WeightedL2 => {
                let sq: T = r.ratio().iter().zip(q).map(|(&ri, &qi)| qi * (ri - one).powi(2)).sum();
                sq.sqrt()
            }
            BallKind::DensityRatio => {
                let max = r.ratio().iter().fold(T::neg_infinity(), |m, &v| m.max(v));
                (max - one).max(T::zero())
            }
            BallKind::TotalVariation => {
                r.ratio().iter().zip(q).map(|(&ri, &qi)| qi * (ri - one).abs()).sum()
            }
        };
        Ok(d)
    }
}

impl fmt::Display for BallKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for BallKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "l2" | "weighted_l2" | "weighted-l2" => Ok(BallKind::WeightedL2),
            "dr" | "density_ratio" | "density-ratio" => Ok(BallKind::DensityRatio),
            "tv" | "total_variation" | "total-variation" => Ok(BallKind::TotalVariation),
            other => Err(format!("unknown ball kind '{other}' (expected l2, dr or tv)")),
        }
    }
}

/// Ambiguity set: all distributions within `radius` of `reference`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "RawBall<T>",
    bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>")
)]
pub struct Ball<T: Real> {
    kind: BallKind,
    radius: T,
    reference: ReferenceDistribution<T>,
}

#[derive(Deserialize)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
struct RawBall<T: Real> {
    kind: BallKind,
    radius: T,
    reference: ReferenceDistribution<T>,
}

impl<T: Real> TryFrom<RawBall<T>> for Ball<T> {
    type Error = DdroError;

    fn try_from(raw: RawBall<T>) -> Result<Self> {
        Ball::new(raw.kind, raw.radius, raw.reference)
    }
}

impl<T: Real> Ball<T> {
    pub fn new(kind: BallKind, radius: T, reference: ReferenceDistribution<T>) -> Result<Self> {
        check_radius(radius)?;
        Ok(Self { kind, radius, reference })
    }

    pub fn kind(&self) -> BallKind {
        self.kind
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn reference(&self) -> &ReferenceDistribution<T> {
        &self.reference
    }

    pub fn contains(&self, p: &DiscreteDistribution<T>) -> Result<bool> {
        let d = self.kind.distance(&self.reference, p)?;
        Ok(d <= self.radius + T::lit(MEMBERSHIP_TOLERANCE))
    }
}

/// Smallest radius whose ball of `kind` around `reference` contains `p`.
pub fn minimal_radius<T: Real>(
    kind: BallKind,
    reference: &ReferenceDistribution<T>,
    p: &DiscreteDistribution<T>,
) -> Result<T> {
    Ok(kind.distance(reference, p)?.max(T::zero()))
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(DdroError::DimensionMismatch { expected, actual });
    }
    Ok(())
}

pub(crate) fn check_radius<T: Real>(radius: T) -> Result<()> {
    if !(radius > T::zero()) || !radius.is_finite() {
        return Err(DdroError::NonPositiveRadius { radius: radius.as_f64() });
    }
    Ok(())
}
