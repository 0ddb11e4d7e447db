//! Scalar abstraction for the numeric pipeline.
//!
//! Everything downstream (features, graph, network, detectors) is generic
//! over [`Real`] so the same code runs in `f32` or `f64`. The crate-root
//! aliases pin `f64`, which is what the CLI and the stated tolerances use.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::{de::DeserializeOwned, Serialize};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Convert an `f64` literal or intermediate into the working scalar.
#[inline]
pub fn real<T: Real>(v: f64) -> T {
    T::from_f64(v).expect("finite f64 converts to any Real")
}

/// Convert a count into the working scalar.
#[inline]
pub fn real_of<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("usize converts to any Real")
}

/// Sum with a fixed left-to-right fold, so results do not depend on
/// iterator internals or thread count.
#[inline]
pub fn sum<T: Real>(values: &[T]) -> T {
    values.iter().fold(T::zero(), |acc, &v| acc + v)
}

/// Arithmetic mean; zero for an empty slice.
#[inline]
pub fn mean<T: Real>(values: &[T]) -> T {
    if values.is_empty() {
        T::zero()
    } else {
        sum(values) / real_of(values.len())
    }
}

/// Dot product with fixed fold order.
#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Squared Euclidean norm.
#[inline]
pub fn norm_sq<T: Real>(values: &[T]) -> T {
    dot(values, values)
}

/// Euclidean norm.
#[inline]
pub fn norm<T: Real>(values: &[T]) -> T {
    norm_sq(values).sqrt()
}

/// Squared Euclidean distance between two equal-length vectors.
#[inline]
pub fn dist_sq<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| {
        let d = x - y;
        acc + d * d
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sums_and_means() {
        let v = [1.0f64, 2.0, 3.0];
        assert_eq!(sum(&v), 6.0);
        assert_eq!(mean(&v), 2.0);
        assert_eq!(mean::<f64>(&[]), 0.0);
    }

    #[test]
    fn norms() {
        assert_eq!(norm_sq(&[3.0f64, 4.0]), 25.0);
        assert_eq!(norm(&[3.0f64, 4.0]), 5.0);
        assert_eq!(dist_sq(&[1.0f64, 1.0], &[4.0, 5.0]), 25.0);
    }

    #[test]
    fn generic_over_f32() {
        let v = [1.0f32, 2.0, 3.0];
        assert_eq!(sum(&v), 6.0f32);
        assert!((real::<f32>(0.5) - 0.5).abs() < 1e-7);
    }
}
