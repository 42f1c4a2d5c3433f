//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar the solver is generic over (`f32` or `f64`).
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Debug
    + Display
    + LowerExp
    + FromStr
    + Default
    + Send
    + Sync
    + 'static
{
    /// Significant decimal digits needed for a lossless text round trip.
    const DECIMAL_DIGITS: usize;

    /// Multiplier applied to the default proximal penalties and `mu_min`.
    const PARAM_SCALE: f64;

    /// Converts an `f64` literal. Panics only on values that cannot be
    /// represented at all, which no literal in this crate is.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Formats with `DECIMAL_DIGITS` significant digits in scientific notation.
    fn to_decimal(self) -> String {
        format!("{:.*e}", Self::DECIMAL_DIGITS - 1, self)
    }
}

impl Real for f32 {
    const DECIMAL_DIGITS: usize = 9;
    const PARAM_SCALE: f64 = 1e4;
}

impl Real for f64 {
    const DECIMAL_DIGITS: usize = 17;
    const PARAM_SCALE: f64 = 1.0;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_round_trip_is_lossless() {
        for v in [1e-10_f64, -0.1, 1.0 / 3.0, 6.02214076e23, f64::MIN_POSITIVE] {
            let back: f64 = v.to_decimal().parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits());
        }
        for v in [1e-10_f32, -0.1, 1.0 / 3.0] {
            let back: f32 = v.to_decimal().parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits());
        }
    }
}
