//! Scalar precisions and the software binary16 codec.
//!
//! Half precision is storage-only: values are widened to `f32` before any
//! arithmetic and narrowed again when a result is stored.

use std::fmt;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::matrix::Values;

/// Storage precision of a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Half,
    Single,
    Double,
}

impl Precision {
    pub const fn bytes(self) -> usize {
        match self {
            Precision::Half => 2,
            Precision::Single => 4,
            Precision::Double => 8,
        }
    }

    /// Precision arithmetic is carried out in. Half is widened to single.
    pub const fn work(self) -> Precision {
        match self {
            Precision::Half | Precision::Single => Precision::Single,
            Precision::Double => Precision::Double,
        }
    }

    /// Working precision of a binary operation over the two operands.
    pub fn combine(self, other: Precision) -> Precision {
        self.work().max(other.work())
    }

    pub(crate) const fn code(self) -> u8 {
        match self {
            Precision::Half => 1,
            Precision::Single => 2,
            Precision::Double => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Precision> {
        match code {
            1 => Some(Precision::Half),
            2 => Some(Precision::Single),
            3 => Some(Precision::Double),
            _ => None,
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::Half => "half",
            Precision::Single => "single",
            Precision::Double => "double",
        })
    }
}

impl std::str::FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "half" => Ok(Precision::Half),
            "single" => Ok(Precision::Single),
            "double" => Ok(Precision::Double),
            other => Err(format!("unknown precision `{other}` (expected half, single or double)")),
        }
    }
}

/// Encode an `f32` as an IEEE 754-2008 binary16 bit pattern.
///
/// Rounds to nearest, ties to even. Values beyond the binary16 range become
/// signed infinity, tiny values land in the subnormal range or on signed
/// zero. NaN stays NaN (quieted, top payload bits kept).
pub fn half_encode(value: f32) -> u16 {
    let bits = value.to_bits();
    let sign = ((bits >> 16) & 0x8000) as u16;
    let exp = ((bits >> 23) & 0xff) as i32;
    let man = bits & 0x007f_ffff;

    if exp == 0xff {
        if man == 0 {
            return sign | 0x7c00;
        }
        return sign | 0x7e00 | (man >> 13) as u16;
    }

    let unbiased = exp - 127;
    if unbiased > 15 {
        return sign | 0x7c00;
    }

    if unbiased >= -14 {
        let mut h = (((unbiased + 15) as u32) << 10) | (man >> 13);
        let rem = man & 0x1fff;
        // a carry out of the mantissa bumps the exponent, up to 0x7c00 = inf
        if rem > 0x1000 || (rem == 0x1000 && h & 1 == 1) {
            h += 1;
        }
        return sign | h as u16;
    }

    // Below half the smallest subnormal (2^-24), including f32 subnormals.
    if unbiased < -25 {
        return sign;
    }
    let full = man | 0x0080_0000;
    let shift = (-unbiased - 1) as u32;
    let mut h = full >> shift;
    let rem = full & ((1 << shift) - 1);
    let halfway = 1u32 << (shift - 1);
    if rem > halfway || (rem == halfway && h & 1 == 1) {
        h += 1;
    }
    sign | h as u16
}

/// Widen a binary16 bit pattern to `f32`. Exact for every pattern.
pub fn half_decode(bits: u16) -> f32 {
    let sign = ((bits & 0x8000) as u32) << 16;
    let exp = ((bits >> 10) & 0x1f) as u32;
    let man = (bits & 0x03ff) as u32;

    let out = match (exp, man) {
        (0, 0) => sign,
        (0, _) => {
            // subnormal: renormalize into an f32 normal
            let lead = man.leading_zeros() - 21;
            let man = (man << lead) & 0x03ff;
            let exp = 127 - 15 + 1 - lead;
            sign | (exp << 23) | (man << 13)
        }
        (0x1f, 0) => sign | 0x7f80_0000,
        (0x1f, _) => sign | 0x7fc0_0000 | (man << 13),
        _ => sign | ((exp + 127 - 15) << 23) | (man << 13),
    };
    f32::from_bits(out)
}

/// A binary16 value held in storage.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
#[repr(transparent)]
pub struct Half(pub u16);

impl Half {
    pub fn from_f32(v: f32) -> Half {
        Half(half_encode(v))
    }

    pub fn to_f32(self) -> f32 {
        half_decode(self.0)
    }
}

impl fmt::Debug for Half {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}h", self.to_f32())
    }
}

/// A scalar as it sits in a block payload.
pub trait Elem: Copy + Send + Sync + Default + fmt::Debug + 'static {
    const PRECISION: Precision;

    fn to_f32(self) -> f32;
    fn to_f64(self) -> f64;
    fn from_f32(v: f32) -> Self;
    fn from_f64(v: f64) -> Self;

    fn wrap(v: Vec<Self>) -> Values;
    fn slice(values: &Values) -> Option<&[Self]>;
}

impl Elem for Half {
    const PRECISION: Precision = Precision::Half;

    fn wrap(v: Vec<Self>) -> Values {
        Values::Half(v)
    }
    fn slice(values: &Values) -> Option<&[Self]> {
        match values {
            Values::Half(v) => Some(v),
            _ => None,
        }
    }

    #[inline]
    fn to_f32(self) -> f32 {
        half_decode(self.0)
    }
    #[inline]
    fn to_f64(self) -> f64 {
        half_decode(self.0) as f64
    }
    #[inline]
    fn from_f32(v: f32) -> Self {
        Half(half_encode(v))
    }
    #[inline]
    fn from_f64(v: f64) -> Self {
        Half(half_encode(v as f32))
    }
}

impl Elem for f32 {
    const PRECISION: Precision = Precision::Single;

    fn wrap(v: Vec<Self>) -> Values {
        Values::Single(v)
    }
    fn slice(values: &Values) -> Option<&[Self]> {
        match values {
            Values::Single(v) => Some(v),
            _ => None,
        }
    }

    #[inline]
    fn to_f32(self) -> f32 {
        self
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn from_f32(v: f32) -> Self {
        v
    }
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
}

impl Elem for f64 {
    const PRECISION: Precision = Precision::Double;

    fn wrap(v: Vec<Self>) -> Values {
        Values::Double(v)
    }
    fn slice(values: &Values) -> Option<&[Self]> {
        match values {
            Values::Double(v) => Some(v),
            _ => None,
        }
    }

    #[inline]
    fn to_f32(self) -> f32 {
        self as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn from_f32(v: f32) -> Self {
        v as f64
    }
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
}

/// A working-precision real: `f32` or `f64`.
pub trait Real:
    Elem + Float + AddAssign + SubAssign + MulAssign + DivAssign + fmt::Display
{
    /// Widen a stored scalar into this working precision.
    fn widen<E: Elem>(e: E) -> Self;
}

impl Real for f32 {
    #[inline]
    fn widen<E: Elem>(e: E) -> Self {
        e.to_f32()
    }
}

impl Real for f64 {
    #[inline]
    fn widen<E: Elem>(e: E) -> Self {
        e.to_f64()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_constants() {
        assert_eq!(half_encode(1.0), 0x3c00);
        assert_eq!(half_encode(0.0), 0x0000);
        assert_eq!(half_encode(-0.0), 0x8000);
        assert_eq!(half_encode(65536.0), 0x7c00);
        assert_eq!(half_encode(-65536.0), 0xfc00);
        assert_eq!(half_encode(65504.0), 0x7bff);
        // 65520 is the tie between 65504 and 65536; even side is infinity
        assert_eq!(half_encode(65520.0), 0x7c00);
        assert_eq!(half_encode(65519.0), 0x7bff);
        assert_eq!(half_encode(f32::INFINITY), 0x7c00);
        assert!(half_decode(half_encode(f32::NAN)).is_nan());
    }

    #[test]
    fn decode_constants() {
        assert_eq!(half_decode(0x3c00), 1.0);
        assert_eq!(half_decode(0xc000), -2.0);
        assert_eq!(half_decode(0x0001), 2f32.powi(-24));
        assert_eq!(half_decode(0x03ff), 1023.0 * 2f32.powi(-24));
        assert_eq!(half_decode(0x7bff), 65504.0);
        assert_eq!(half_decode(0xfc00), f32::NEG_INFINITY);
    }

    #[test]
    fn subnormal_rounding() {
        let tiny = 2f32.powi(-24);
        assert_eq!(half_encode(tiny), 0x0001);
        // exactly half the smallest subnormal ties to even (zero)
        assert_eq!(half_encode(tiny / 2.0), 0x0000);
        assert_eq!(half_encode(tiny * 0.75), 0x0001);
        assert_eq!(half_encode(tiny * 1.5), 0x0002);
        assert_eq!(half_encode(tiny * 2.5), 0x0002);
        assert_eq!(half_encode(f32::from_bits(1)), 0x0000);
        // largest subnormal rounds up into the smallest normal
        assert_eq!(half_encode(2f32.powi(-14) - tiny / 4.0), 0x0400);
    }

    #[test]
    fn every_pattern_round_trips() {
        for bits in 0..=u16::MAX {
            let v = half_decode(bits);
            if v.is_nan() {
                assert!(half_decode(half_encode(v)).is_nan());
            } else {
                assert_eq!(half_encode(v), bits, "pattern {bits:#06x}");
            }
        }
    }

    #[test]
    fn combine_widens() {
        assert_eq!(Precision::Half.combine(Precision::Half), Precision::Single);
        assert_eq!(Precision::Single.combine(Precision::Double), Precision::Double);
        assert_eq!(Precision::Half.work(), Precision::Single);
    }

    proptest::proptest! {
        // The `half` crate is an independent binary16 implementation.
        #[test]
        fn encode_agrees_with_half_crate(bits in proptest::num::u32::ANY) {
            let x = f32::from_bits(bits);
            let want = half::f16::from_f32(x);
            if x.is_nan() {
                proptest::prop_assert!(half_decode(half_encode(x)).is_nan());
            } else {
                proptest::prop_assert_eq!(half_encode(x), want.to_bits());
            }
        }

        #[test]
        fn rounding_error_bound(x in -65504.0f32..=65504.0) {
            let err = (half_decode(half_encode(x)) - x).abs();
            proptest::prop_assert!(err <= 2f32.powi(-11) * x.abs().max(2f32.powi(-14)), "{x}: {err}");
        }
    }
}
