//! Scalar abstraction: every numerical routine in this crate is generic over
//! [`Real`], implemented for `f32` and `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable throughout the crate.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum<Self> + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, for constants appearing in formulas.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 constant representable in Real type")
    }

    /// Lossy conversion to `f64`, for diagnostics and error reporting.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub(crate) fn ln_2pi<T: Real>() -> T {
    T::of(core::f64::consts::TAU.ln())
}
