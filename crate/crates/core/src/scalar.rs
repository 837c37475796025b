//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! Expertise scores, feature values, model weights and metrics are all
//! computed over a generic `T: Scalar`, so the same code runs in `f32` for
//! compact snapshots and in `f64` for training and evaluation.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub trait Scalar:
    Float
    + FromPrimitive
    + NumAssign
    + Sum<Self>
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal or configuration value.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn clamp01(self) -> Self {
        self.max(Self::zero()).min(Self::one())
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Total order for sorting finite scalars in descending order.
#[inline]
pub(crate) fn desc<T: Scalar>(a: T, b: T) -> std::cmp::Ordering {
    b.partial_cmp(&a).unwrap_or(std::cmp::Ordering::Equal)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamp_and_convert() {
        assert_eq!(f32::of(1.7).clamp01(), 1.0);
        assert_eq!(f64::of(-0.2).clamp01(), 0.0);
        assert_eq!(0.25f32.as_f64(), 0.25);
    }
}
