//! Scalar abstractions shared by the element-level kernels.
//!
//! Two tiers are used. [`Scalar`] is any ordered field in which the small
//! rational constants of the hanging-node rules can be represented, which
//! includes exact rationals. [`Float`] adds the transcendental operations
//! needed by quadrature and Newton iterations.

use std::fmt::Debug;
use std::ops::{AddAssign, MulAssign, Neg, SubAssign};

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num};

/// A field element usable by the exact parts of the element algebra.
pub trait Scalar:
    Copy + Debug + PartialEq + PartialOrd + Num + Neg<Output = Self> + AddAssign + SubAssign + MulAssign
{
    /// The rational number `num / den`.
    fn ratio(num: i64, den: i64) -> Self;

    fn from_int(v: i64) -> Self {
        Self::ratio(v, 1)
    }

    fn abs_val(self) -> Self {
        if self < Self::zero() {
            -self
        } else {
            self
        }
    }
}

impl Scalar for f64 {
    fn ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
}

impl Scalar for f32 {
    fn ratio(num: i64, den: i64) -> Self {
        num as f32 / den as f32
    }
}

impl Scalar for Ratio<i64> {
    fn ratio(num: i64, den: i64) -> Self {
        Ratio::new(num, den)
    }
}

/// Floating point scalar for quadrature, isoparametric maps and Newton solves.
pub trait Float: Scalar + num_traits::Float + FromPrimitive {
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("literal representable")
    }
}

impl Float for f64 {}
impl Float for f32 {}
