//! Scalar abstraction shared by the pointwise kernel machinery.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating-point scalar used by domains, support functions and kernels.
///
/// Implemented for `f32` and `f64`. Quadrature, operators and campaigns are
/// fixed to `f64`; everything that is evaluated pointwise is generic.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }

    /// Machine epsilon scaled by a modest factor, used as "zero" for guards.
    fn tiny() -> Self;
}

impl Real for f32 {
    fn tiny() -> Self {
        1e-30
    }
}

impl Real for f64 {
    fn tiny() -> Self {
        1e-280
    }
}

/// n! as a scalar.
pub fn factorial<T: Real>(n: usize) -> T {
    (1..=n).fold(T::one(), |acc, k| acc * T::lit(k as f64))
}

/// The normalising constant n!/πⁿ of the Bergman kernel of the unit ball.
pub fn ball_constant<T: Real>(n: usize) -> T {
    factorial::<T>(n) / T::PI().powi(n as i32)
}

/// Σ c_k a_k b_k + c₀ with error-free products and compensated summation
/// (Ogita–Rump–Oishi), accurate to a few ulps of the result even under heavy
/// cancellation.
pub fn compensated_dot<T: Real>(terms: impl IntoIterator<Item = (T, T)>, constant: T) -> T {
    let mut sum = constant;
    let mut err = T::zero();
    for (a, b) in terms {
        let p = a * b;
        let pe = a.mul_add(b, -p);
        let t = sum + p;
        let z = t - sum;
        err += (sum - (t - z)) + (p - z) + pe;
        sum = t;
    }
    sum + err
}

/// Error function evaluated in double precision.
pub fn erf<T: Real>(x: T) -> T {
    T::lit(statrs::function::erf::erf(x.as_f64()))
}
