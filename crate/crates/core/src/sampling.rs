//! Seeded random instance generation shared by tests, the oracle and `verify`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::distribution::{DiscreteDistribution, ReferenceDistribution};
use crate::scalar::Real;

/// The generator used everywhere a seed is accepted.
pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws from the flat Dirichlet(1, ..., 1), i.e. uniformly over the simplex.
pub fn dirichlet_mass<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..m).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|v| v / total).collect()
}

pub fn dirichlet<T: Real, R: Rng + ?Sized>(rng: &mut R, m: usize) -> DiscreteDistribution<T> {
    let mass = dirichlet_mass(rng, m).into_iter().map(T::lit).collect();
    DiscreteDistribution::new(mass).expect("normalized Dirichlet draw")
}

/// A strictly positive reference, bounded away from zero by mixing with uniform.
pub fn random_reference<T: Real, R: Rng + ?Sized>(rng: &mut R, m: usize) -> ReferenceDistribution<T> {
    let u = 1.0 / m as f64;
    let mass = dirichlet_mass(rng, m).into_iter().map(|p| T::lit(0.5 * p + 0.5 * u)).collect();
    ReferenceDistribution::new(mass).expect("positive reference")
}

/// `m` costs drawn i.i.d. uniform on `[lo, hi)`.
pub fn uniform_costs<T: Real, R: Rng + ?Sized>(rng: &mut R, m: usize, lo: f64, hi: f64) -> Vec<T> {
    (0..m).map(|_| T::lit(rng.random_range(lo..hi))).collect()
}
