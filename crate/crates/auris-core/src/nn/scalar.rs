//! Floating-point element abstraction for the tensor engine.

use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Element type the network engine is generic over.
///
/// Training and inference run at `f32`. The gradient-check harness
/// instantiates the identical code paths at `f64`, where central finite
/// differences resolve analytic gradients well below single-precision noise.
pub trait Element: num_traits::Float + Sum + Send + Sync + Debug + Display + 'static {
    /// Conversion from `f64`, used for constants, RNG draws and loss scalars.
    fn of(v: f64) -> Self;
    /// Widening conversion for reductions and reporting.
    fn as_f64(self) -> f64;
}

impl Element for f32 {
    #[inline(always)]
    fn of(v: f64) -> Self {
        v as f32
    }
    #[inline(always)]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Element for f64 {
    #[inline(always)]
    fn of(v: f64) -> Self {
        v
    }
    #[inline(always)]
    fn as_f64(self) -> f64 {
        self
    }
}
