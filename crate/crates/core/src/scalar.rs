//! Scalar abstraction shared by every numeric routine in the workspace.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar the estimators and metrics are generic over.
///
/// Implemented for `f32` and `f64`. Trace files are parsed directly into the
/// chosen precision, so a whole run stays in one scalar type.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }

    #[inline]
    fn two() -> Self {
        Self::lit(2.0)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Natural log with the probability floor applied first.
#[inline]
pub fn floored_ln<F: Real>(p: F, floor: F) -> F {
    p.max(floor).ln()
}

/// Numerically stable `ln(sum(exp(xs)))`. Returns `-inf` for an empty input.
pub fn log_sum_exp<F: Real>(xs: impl IntoIterator<Item = F> + Clone) -> F {
    let max = xs.clone().into_iter().fold(F::neg_infinity(), |a, b| if b > a { b } else { a });
    if max == F::neg_infinity() {
        return max;
    }
    let s: F = xs.into_iter().map(|x| (x - max).exp()).sum();
    max + s.ln()
}

pub fn mean<F: Real>(xs: &[F]) -> Option<F> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().copied().sum::<F>() / F::from_count(xs.len()))
    }
}
