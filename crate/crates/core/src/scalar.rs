// SPDX-License-Identifier: Apache-2.0

//! Scalar abstraction for simulated time and service durations.
//!
//! Every time-carrying type in the crate is generic over [`Scalar`]. The
//! signaling simulator is normally instantiated with an exact rational so that
//! inclusive timeout and cache-validity boundaries compare exactly; the
//! queueing sweeps use `f64` for speed.

use std::cmp::Ordering;
use std::fmt::{Debug, Display};

use num_rational::Rational64;
use num_traits::{FromPrimitive, Num, ToPrimitive};

/// A totally ordered number usable as simulated time.
pub trait Scalar:
    Num + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Exact `numer / denom` where the representation allows it.
    fn from_ratio(numer: i64, denom: i64) -> Self;

    /// Nearest representable value to `value`. Rationals are approximated by
    /// continued fractions so denominators stay small.
    fn from_f64_approx(value: f64) -> Self;

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Total order used by the event queue. Panics on NaN, which never
    /// represents a valid instant.
    fn time_cmp(&self, other: &Self) -> Ordering {
        self.partial_cmp(other)
            .expect("simulated time must not be NaN")
    }

    fn from_count(value: u64) -> Self {
        <Self as FromPrimitive>::from_u64(value).expect("integer fits the scalar type")
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl Scalar for f64 {
    fn from_ratio(numer: i64, denom: i64) -> Self {
        numer as f64 / denom as f64
    }

    fn from_f64_approx(value: f64) -> Self {
        value
    }
}

impl Scalar for f32 {
    fn from_ratio(numer: i64, denom: i64) -> Self {
        (numer as f64 / denom as f64) as f32
    }

    fn from_f64_approx(value: f64) -> Self {
        value as f32
    }
}

impl Scalar for Rational64 {
    fn from_ratio(numer: i64, denom: i64) -> Self {
        Rational64::new(numer, denom)
    }

    fn from_f64_approx(value: f64) -> Self {
        // Inputs are decimal literals such as 0.7 or 0.001; a bounded
        // denominator recovers them exactly.
        let scaled = (value * 1_000_000.0).round();
        if scaled.abs() < (i64::MAX / 2) as f64 {
            let approx = Rational64::approximate_float(value)
                .filter(|r| *r.denom() <= 1_000_000);
            approx.unwrap_or_else(|| Rational64::new(scaled as i64, 1_000_000))
        } else {
            Rational64::from_integer(value.round() as i64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_recovers_decimal_literals() {
        assert_eq!(Rational64::from_f64_approx(0.7), Rational64::new(7, 10));
        assert_eq!(Rational64::from_f64_approx(0.001), Rational64::new(1, 1000));
        assert_eq!(Rational64::from_f64_approx(3600.0), Rational64::from_integer(3600));
        assert_eq!(Rational64::from_f64_approx(1.0 / 3.0), Rational64::new(1, 3));
    }

    #[test]
    fn ratio_constructor_matches_across_types() {
        assert_eq!(<f64 as Scalar>::from_ratio(1, 4), 0.25);
        assert_eq!(<f32 as Scalar>::from_ratio(1, 4), 0.25);
        assert_eq!(Rational64::from_ratio(2, 8), Rational64::new(1, 4));
    }

    #[test]
    fn min_max_helpers() {
        assert_eq!(3.0f64.max_of(5.0), 5.0);
        assert_eq!(3.0f64.min_of(5.0), 3.0);
    }
}
