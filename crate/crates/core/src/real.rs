//! Scalar abstraction for the numerical core.
//!
//! Everything downstream of data loading is generic over [`Real`], which is
//! `f64` in practice (the CLI and the canned studies use the aliases at the
//! crate root) but admits `f32` for memory-bound experiments. Random draws
//! are always produced as `f64` and converted, so chains over different
//! scalar types consume identical RNG streams.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable by the model, sampler, and diagnostics.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Converts from `f64`, panicking only for non-representable exotic types.
    #[inline]
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("f64 value not representable in this scalar type")
    }

    /// Widens to `f64` for reporting and serialization.
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }
}

impl<T> Real for T where
    T: Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
}

/// log(exp(a) + exp(b)) without overflow.
#[inline]
pub fn log_sum_exp2<R: Real>(a: R, b: R) -> R {
    if a == R::neg_infinity() {
        return b;
    }
    if b == R::neg_infinity() {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// log(1 - exp(-z)) for z >= 0, split at log 2 so small-z terms do not
/// underflow and large-z terms do not lose precision.
#[inline]
pub fn log1m_exp_neg<R: Real>(z: R) -> R {
    let ln2 = R::of(std::f64::consts::LN_2);
    if z <= R::zero() {
        R::neg_infinity()
    } else if z <= ln2 {
        (-(-z).exp_m1()).ln()
    } else {
        (-(-z).exp()).ln_1p()
    }
}
