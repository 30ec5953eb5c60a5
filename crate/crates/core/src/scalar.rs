use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssignOps};

/// Floating-point type the solvers and simulator are written against.
///
/// Implemented for `f32` and `f64`. The associated tolerances are the
/// defaults the solvers aim for; `f32` gets looser ones because its unit
/// roundoff is around 6e-8.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssignOps
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Default residual bound for scalar root finding and Lambert W.
    const DEFAULT_TOLERANCE: f64;
    /// Default stopping norm for the Nash fixed-point sweeps.
    const NASH_TOLERANCE: f64;
    /// Tolerance used when validating that shares sum to one.
    const SIMPLEX_TOLERANCE: f64;

    /// Converts an `f64` literal; every finite literal used in the crate is
    /// representable (possibly rounded) in both implementors.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    const DEFAULT_TOLERANCE: f64 = 1e-12;
    const NASH_TOLERANCE: f64 = 1e-10;
    const SIMPLEX_TOLERANCE: f64 = 1e-12;
}

impl Scalar for f32 {
    const DEFAULT_TOLERANCE: f64 = 1e-5;
    const NASH_TOLERANCE: f64 = 1e-4;
    const SIMPLEX_TOLERANCE: f64 = 1e-5;
}
