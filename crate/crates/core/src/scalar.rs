//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar the geometry, flow and solver code is generic over.
///
/// Implemented for `f32` and `f64`; the experiment layer and the acceptance
/// suite run in `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal, panicking only if the target type cannot hold it.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + Sum
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + 'static
{
}

/// Maximum of a slice in sequential order; `-inf` for an empty slice.
pub(crate) fn seq_max<T: Real>(xs: impl IntoIterator<Item = T>) -> T {
    xs.into_iter().fold(T::neg_infinity(), |m, x| if x > m { x } else { m })
}

pub(crate) fn seq_min<T: Real>(xs: impl IntoIterator<Item = T>) -> T {
    xs.into_iter().fold(T::infinity(), |m, x| if x < m { x } else { m })
}
