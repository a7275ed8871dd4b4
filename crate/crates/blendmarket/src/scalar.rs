//! Scalar abstraction for the numeric core.
//!
//! All physical and market computations are generic over a floating-point
//! scalar so the library can be instantiated at `f32` or `f64`. The solver
//! tolerances documented elsewhere assume `f64`; `f32` solves are possible
//! but lose roughly eight digits of headroom.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar usable by the numeric core: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
}

impl<T> Real for T where
    T: Float
        + FromPrimitive
        + AddAssign
        + SubAssign
        + MulAssign
        + DivAssign
        + Sum
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + 'static
{
}

/// Lift an `f64` literal into the working scalar type.
#[inline]
pub fn lit<T: Real>(value: f64) -> T {
    T::from_f64(value).expect("literal representable in scalar type")
}

/// `2` in the working scalar type; frequent enough to warrant a helper.
#[inline]
pub(crate) fn two<T: Real>() -> T {
    T::one() + T::one()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lit_round_trips_both_widths() {
        let a: f64 = lit(44.2);
        let b: f32 = lit(44.2);
        assert_eq!(a, 44.2_f64);
        assert_eq!(b, 44.2_f32);
    }
}
