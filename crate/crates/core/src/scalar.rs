//! Numeric traits the metric code is generic over.
//!
//! [`Scalar`] covers everything that only needs field arithmetic and an
//! ordering: ranks, Lorenz-type curves, trapezoid areas, Gini and Pietra.
//! It is implemented for `f32`, `f64` and [`Rational64`], so the `p = 1`
//! metrics can be evaluated exactly. [`Real`] adds the transcendental
//! operations needed for general `p`.

use std::fmt::Debug;
use std::iter::Sum;

use num_rational::Rational64;
use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive};

pub trait Scalar:
    Num + Signed + Copy + PartialOrd + FromPrimitive + ToPrimitive + Sum + Debug + Send + Sync + 'static
{
    fn is_finite_value(&self) -> bool;

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

/// Floating point scalars.
pub trait Real: Scalar + Float {
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("literal representable")
    }
}

impl Scalar for f64 {
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for f32 {
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for Rational64 {
    fn is_finite_value(&self) -> bool {
        true
    }
}

impl Real for f64 {}
impl Real for f32 {}
