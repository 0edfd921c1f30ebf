//! Floating-point scalar abstraction for the numeric kernel.

use std::fmt;

/// Floating-point scalar the numeric kernel is generic over (`f32` or `f64`).
pub trait Real:
    num_traits::Float + num_traits::FromPrimitive + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    /// Conversion from `f64`, for constants and tolerances.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts to any Real")
    }

    /// Lossy view as `f64`, for reporting.
    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("Real converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
