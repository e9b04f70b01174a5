//! Scalar abstraction and small dense-vector helpers.
//!
//! All numeric code in this crate is generic over [`Scalar`], so the same
//! models and metrics run in f32 or f64. Concrete aliases live at the crate
//! root; f64 is the default used by the CLI.

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::{de::DeserializeOwned, Serialize};

/// Floating-point scalar: f32 or f64.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + std::fmt::Debug
    + std::fmt::Display
    + std::iter::Sum
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + std::fmt::Debug
        + std::fmt::Display
        + std::iter::Sum
        + Default
        + Serialize
        + DeserializeOwned
        + Send
        + Sync
        + 'static
{
}

/// Convert a finite f64 constant into the scalar type.
#[inline]
pub fn sc<S: Scalar>(x: f64) -> S {
    S::from_f64(x).expect("f64 constant representable in scalar type")
}

#[inline]
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(S::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm<S: Scalar>(a: &[S]) -> S {
    dot(a, a).sqrt()
}

/// Cosine similarity; defined as 0 when either vector has zero norm.
pub fn cosine<S: Scalar>(a: &[S], b: &[S]) -> S {
    let na = norm(a);
    let nb = norm(b);
    if na == S::zero() || nb == S::zero() {
        S::zero()
    } else {
        dot(a, b) / (na * nb)
    }
}

/// Element-wise mean of a non-empty set of equal-length vectors.
/// Returns the zero vector of `dim` when `rows` is empty.
pub fn mean_of<S: Scalar>(rows: &[&[S]], dim: usize) -> Vec<S> {
    if rows.is_empty() {
        return vec![S::zero(); dim];
    }
    let mut out = vec![S::zero(); dim];
    for row in rows {
        debug_assert_eq!(row.len(), dim);
        for (o, &x) in out.iter_mut().zip(row.iter()) {
            *o = *o + x;
        }
    }
    let inv = S::one() / sc::<S>(rows.len() as f64);
    for o in out.iter_mut() {
        *o = *o * inv;
    }
    out
}

/// `acc += k * x`
pub fn add_scaled<S: Scalar>(acc: &mut [S], x: &[S], k: S) {
    debug_assert_eq!(acc.len(), x.len());
    for (a, &v) in acc.iter_mut().zip(x.iter()) {
        *a = *a + k * v;
    }
}
