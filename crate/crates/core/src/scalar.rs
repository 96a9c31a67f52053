use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar the numeric core is generic over.
///
/// Implemented for `f32` and `f64`; the crate-root aliases pin `f64`,
/// which is what the CLI and the ingestion layer use.
pub trait Scalar: Float + FromPrimitive + Sum + Display + Debug + Send + Sync + 'static {
    /// Lossless-enough conversion from `f64` literals used in formulas.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable in scalar type")
    }

    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }
}

impl<T> Scalar for T where T: Float + FromPrimitive + Sum + Display + Debug + Send + Sync + 'static {}
