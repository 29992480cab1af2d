//! Floating-point scalar abstraction shared by the estimators and the network.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Debug + Display + Default + Send + Sync + 'static
{
    /// Width tag written into serialized nets.
    const WIDTH: u8;

    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 always converts to a float scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("float scalar always converts to f64")
    }
}

impl Scalar for f32 {
    const WIDTH: u8 = 4;
}

impl Scalar for f64 {
    const WIDTH: u8 = 8;
}
