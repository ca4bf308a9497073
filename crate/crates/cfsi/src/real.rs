//! Scalar abstraction: the whole solver is generic over the floating-point
//! type through [`Real`], instantiated as `f32` or `f64`.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

/// Floating-point scalar used for coordinates, fields and matrix entries.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into this scalar type.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant must be representable")
    }

    /// Widens to `f64` (lossless for `f32`/`f64`).
    #[inline]
    fn to_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("scalar must widen to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
