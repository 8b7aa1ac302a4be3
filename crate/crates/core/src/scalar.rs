//! Scalar abstraction for the numeric pipeline.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar the pipeline is generic over: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Convert an `f64` constant or config value into the working scalar type.
#[inline]
pub fn real<R: Real>(x: f64) -> R {
    R::from_f64(x).expect("f64 converts to any Real")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn converts_constants() {
        assert_eq!(real::<f64>(0.5), 0.5);
        assert_eq!(real::<f32>(0.5), 0.5f32);
    }
}
