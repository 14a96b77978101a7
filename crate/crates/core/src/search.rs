//! One-dimensional search routines used by the inner dual minimizations.

use crate::scalar::Real;

/// Finds a sign change of a non-decreasing function on `[lo, hi]` by bisection.
///
/// Expects `f(lo) <= 0 <= f(hi)`; returns the midpoint of the final bracket.
pub(crate) fn bisect_increasing<T: Real>(mut lo: T, mut hi: T, mut f: impl FnMut(T) -> T) -> T {
    let two = T::lit(2.0);
    for _ in 0..400 {
        let mid = (lo + hi) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > T::zero() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo + hi) / two
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
///
/// Returns the best point seen and its value.
pub(crate) fn golden_section<T: Real>(lo: T, hi: T, mut f: impl FnMut(T) -> T) -> (T, T) {
    let inv_phi = T::lit((5f64.sqrt() - 1.0) / 2.0);
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    let (fa, fb) = (f(a), f(b));
    let mut best = if fa <= fb { (a, fa) } else { (b, fb) };
    for _ in 0..300 {
        if f1 < best.1 {
            best = (x1, f1);
        }
        if f2 < best.1 {
            best = (x2, f2);
        }
        if !(b - a > T::epsilon() * (T::one() + a.abs().max(b.abs()))) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    if f1 < best.1 {
        best = (x1, f1);
    }
    if f2 < best.1 {
        best = (x2, f2);
    }
    best
}
