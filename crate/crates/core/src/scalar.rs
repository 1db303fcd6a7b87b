//! Floating-point abstraction shared by the numeric modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar used by maps, filters, classifiers and the graph-cut solver.
///
/// Implemented for `f32` and `f64`. Algorithms are written once against this
/// trait; the crate root exports `f64` aliases for the common case.
pub trait Real:
    Float
    + FloatConst
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` constant into this type.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant must be representable")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count must be representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite value converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Minimum and maximum of a non-empty slice, ignoring nothing (NaN propagates as
/// an unordered value and is never selected).
pub(crate) fn min_max<F: Real>(values: &[F]) -> Option<(F, F)> {
    let mut it = values.iter().copied();
    let first = it.next()?;
    Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_max_basic() {
        assert_eq!(min_max(&[3.0, -1.0, 2.0]), Some((-1.0, 3.0)));
        assert_eq!(min_max::<f32>(&[]), None);
    }

    #[test]
    fn literals_roundtrip() {
        assert_eq!(f32::lit(0.5), 0.5f32);
        assert_eq!(f64::from_count(7), 7.0);
    }
}
