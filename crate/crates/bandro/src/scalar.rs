//! Scalar abstraction for the numeric kernels: f32 or f64.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar the generic numeric kernels (LP solver, simplex
/// projection, water filling, kernel profiles) are written against.
pub trait Real:
    Float + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lift an `f64` constant into the scalar type.
    #[inline]
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("constant not representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}
