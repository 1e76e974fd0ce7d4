//! Floating-point scalar abstraction: everything numeric in this crate is
//! generic over [`Scalar`], with `f64` as the default precision (see the
//! crate-root aliases).

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

/// Scalar type for features, model parameters, and metrics.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssignOps + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, for literals and configuration values.
    fn from_config(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 must convert into a Scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
