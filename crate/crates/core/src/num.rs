//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All physics and estimation code is written against [`Real`], which is
//! implemented for `f32` and `f64`. Force spectral densities in SI units sit
//! around 1e-39 N²/Hz and ħ² is ~1e-68, both below the normal range of
//! `f32`, so anything that touches CSL force noise is only meaningful in
//! `f64`. Kinematic, spectral and statistical routines work in either.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point scalar used throughout the crate.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + rustfft::FftNum
    + Debug
    + Display
    + Default
    + Sum
    + for<'a> Sum<&'a Self>
    + Send
    + Sync
    + serde::Serialize
    + serde::de::DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal or constant into `Self`.
    fn lit(x: f64) -> Self;

    /// Lossy view as `f64`, used for error payloads and serialization.
    fn as_f64(self) -> f64;

    /// Converts a count into `Self`.
    fn from_count(n: usize) -> Self {
        Self::lit(n as f64)
    }

    fn two_pi() -> Self {
        Self::TAU()
    }
}

impl Real for f32 {
    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// Relative difference `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn rel_diff<T: Real>(a: T, b: T) -> T {
    let scale = a.abs().max(b.abs());
    if scale == T::zero() {
        T::zero()
    } else {
        (a - b).abs() / scale
    }
}

/// `n` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn logspace<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    assert!(n >= 2 && lo > T::zero() && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / T::from_count(n - 1);
    (0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                (a + step * T::from_count(i)).exp()
            }
        })
        .collect()
}
