//! Scalar abstraction over the floating-point element type.
//!
//! Every numeric kernel in this crate (embedding table, graph propagation,
//! ranking loss, policy networks, fraction sampling) is generic over
//! [`Scalar`], so the same code runs in `f32` or `f64`. Concrete aliases for
//! the common instantiations live at the crate root.

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point element type: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Default
    + std::fmt::Debug
    + std::fmt::Display
    + std::iter::Sum
    + Send
    + Sync
    + 'static
{
    /// Converts from `f64`, rounding to the nearest representable value.
    fn from_f(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any supported scalar")
    }

    /// Widens to `f64`.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("every supported scalar widens to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
