use std::fmt::{Debug, Display, LowerExp};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point element type accepted by every kernel in the crate.
///
/// Implemented for `f32` and `f64`. Tolerances that are stated as absolute
/// constants (1e-10 and friends) are only meaningful for `f64`; the helpers
/// below widen them to a few machine epsilons for narrower types.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Default
    + Debug
    + Display
    + LowerExp
    + FromStr
    + Send
    + Sync
    + 'static
{
    /// Convert an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    /// `max(tol, 100 eps)`: a requested tolerance, floored at what the type can resolve.
    #[inline]
    fn tol_floor(tol: f64) -> Self {
        Self::lit(tol).max(Self::epsilon() * Self::lit(100.0))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
