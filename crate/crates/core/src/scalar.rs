//! Scalar abstraction for the deterministic numerics.
//!
//! Geometry, quadrature, covariance formulas and the heat-kernel
//! constructions are written once over [`Real`] and instantiated for `f32`
//! and `f64`. Special functions (Gamma, erfc) are evaluated in `f64` and
//! narrowed, so `f32` instantiations inherit `f64` accuracy there.

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    /// Integer conversion for counters and indices.
    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("index representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}
