//! Arithmetic over Z_{2^ℓ} and the two's-complement fixed-point encoding.
//!
//! Protocol code works on raw `u64` words together with a [`Ring`] that knows
//! how to reduce them. [`RingElement`] is the checked, width-carrying wrapper
//! used at API boundaries.

use crate::error::{Error, Result};

/// Default number of fractional bits for fixed-point values.
pub const DEFAULT_FRAC_BITS: u32 = 13;

/// The ring Z_{2^ℓ} for ℓ ∈ {1, 8, 16, 32, 64}.
///
/// Width 1 is the boolean ring: addition is XOR and multiplication is AND,
/// so the same share arithmetic serves both flavors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ring {
    bits: u32,
}

impl Ring {
    pub const BOOL: Ring = Ring { bits: 1 };
    pub const Z8: Ring = Ring { bits: 8 };
    pub const Z16: Ring = Ring { bits: 16 };
    pub const Z32: Ring = Ring { bits: 32 };
    pub const Z64: Ring = Ring { bits: 64 };

    pub fn new(bits: u32) -> Result<Ring> {
        match bits {
            1 | 8 | 16 | 32 | 64 => Ok(Ring { bits }),
            _ => Err(Error::UnsupportedWidth(bits)),
        }
    }

    /// Any width in 1..=64. Used by circuit tests at toy sizes such as ℓ=4.
    pub fn custom(bits: u32) -> Result<Ring> {
        if (1..=64).contains(&bits) {
            Ok(Ring { bits })
        } else {
            Err(Error::UnsupportedWidth(bits))
        }
    }

    #[inline]
    pub fn bits(self) -> u32 {
        self.bits
    }

    #[inline]
    pub fn is_bool(self) -> bool {
        self.bits == 1
    }

    #[inline]
    pub fn mask(self) -> u64 {
        if self.bits == 64 {
            u64::MAX
        } else {
            (1u64 << self.bits) - 1
        }
    }

    #[inline]
    pub fn reduce(self, v: u64) -> u64 {
        v & self.mask()
    }

    #[inline]
    pub fn add(self, a: u64, b: u64) -> u64 {
        a.wrapping_add(b) & self.mask()
    }

    #[inline]
    pub fn sub(self, a: u64, b: u64) -> u64 {
        a.wrapping_sub(b) & self.mask()
    }

    #[inline]
    pub fn mul(self, a: u64, b: u64) -> u64 {
        a.wrapping_mul(b) & self.mask()
    }

    #[inline]
    pub fn neg(self, a: u64) -> u64 {
        a.wrapping_neg() & self.mask()
    }

    /// Bit ℓ−1.
    #[inline]
    pub fn msb(self, a: u64) -> u64 {
        (a >> (self.bits - 1)) & 1
    }

    /// Two's-complement reading of a reduced value.
    #[inline]
    pub fn to_signed(self, a: u64) -> i64 {
        let shift = 64 - self.bits;
        ((a << shift) as i64) >> shift
    }

    #[inline]
    pub fn from_signed(self, a: i64) -> u64 {
        (a as u64) & self.mask()
    }

    /// Logical right shift of the unsigned representative.
    #[inline]
    pub fn shr(self, a: u64, k: u32) -> u64 {
        if k >= 64 {
            0
        } else {
            self.reduce(a) >> k
        }
    }

    /// Arithmetic right shift: floor division of the signed reading by 2^k.
    #[inline]
    pub fn sar(self, a: u64, k: u32) -> u64 {
        self.from_signed(self.to_signed(a) >> k.min(63))
    }

    /// Embeds a bit into this ring (the "primed" lift of a boolean value).
    #[inline]
    pub fn lift(self, bit: u64) -> u64 {
        bit & 1
    }
}

/// A checked element of Z_{2^ℓ}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RingElement {
    value: u64,
    ring: Ring,
}

impl RingElement {
    pub fn new(value: u64, ring: Ring) -> RingElement {
        RingElement { value: ring.reduce(value), ring }
    }

    pub fn with_width(value: u64, width: u32) -> Result<RingElement> {
        Ok(RingElement::new(value, Ring::new(width)?))
    }

    pub fn value(self) -> u64 {
        self.value
    }

    pub fn ring(self) -> Ring {
        self.ring
    }

    pub fn width(self) -> u32 {
        self.ring.bits
    }

    fn same(self, other: RingElement) -> Result<Ring> {
        if self.ring == other.ring {
            Ok(self.ring)
        } else {
            Err(Error::WidthMismatch { left: self.width(), right: other.width() })
        }
    }

    pub fn add(self, other: RingElement) -> Result<RingElement> {
        let r = self.same(other)?;
        Ok(RingElement { value: r.add(self.value, other.value), ring: r })
    }

    pub fn sub(self, other: RingElement) -> Result<RingElement> {
        let r = self.same(other)?;
        Ok(RingElement { value: r.sub(self.value, other.value), ring: r })
    }

    pub fn mul(self, other: RingElement) -> Result<RingElement> {
        let r = self.same(other)?;
        Ok(RingElement { value: r.mul(self.value, other.value), ring: r })
    }

    pub fn neg(self) -> RingElement {
        RingElement { value: self.ring.neg(self.value), ring: self.ring }
    }

    /// ⌊a / 2^f⌋ on the unsigned representative. Only defined on Z_{2^64}.
    pub fn truncate(self, f: u32) -> Result<RingElement> {
        if self.ring != Ring::Z64 {
            return Err(Error::UnsupportedWidth(self.width()));
        }
        if f == 0 || f >= 64 {
            return Err(Error::InvalidArgument(format!("truncation shift {f} outside 1..64")));
        }
        Ok(RingElement { value: self.value >> f, ring: self.ring })
    }

    pub fn msb(self) -> Result<u64> {
        if self.width() < 2 {
            return Err(Error::UnsupportedWidth(self.width()));
        }
        Ok(self.ring.msb(self.value))
    }
}

/// A fixed-point number stored as a 64-bit two's-complement raw value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FixedPoint {
    raw: RingElement,
    frac_bits: u32,
}

impl FixedPoint {
    pub fn from_raw(raw: u64, frac_bits: u32) -> FixedPoint {
        FixedPoint { raw: RingElement::new(raw, Ring::Z64), frac_bits }
    }

    /// raw = round(x·2^f) mod 2^64.
    pub fn encode(x: f64, frac_bits: u32) -> Result<FixedPoint> {
        Ok(FixedPoint::from_raw(encode_fixed(x, frac_bits)?, frac_bits))
    }

    pub fn decode(self) -> f64 {
        decode_fixed(self.raw.value(), self.frac_bits)
    }

    pub fn raw(self) -> RingElement {
        self.raw
    }

    pub fn frac_bits(self) -> u32 {
        self.frac_bits
    }

    pub fn is_negative(self) -> bool {
        Ring::Z64.msb(self.raw.value()) == 1
    }
}

/// Encodes `x` with `frac_bits` fractional bits into a raw 64-bit word.
pub fn encode_fixed(x: f64, frac_bits: u32) -> Result<u64> {
    if frac_bits >= 63 {
        return Err(Error::InvalidArgument(format!("{frac_bits} fractional bits")));
    }
    let limit = 2f64.powi(63 - frac_bits as i32);
    if !x.is_finite() || x.abs() >= limit {
        return Err(Error::FixedOverflow(x));
    }
    let scaled = (x * 2f64.powi(frac_bits as i32)).round();
    Ok(scaled as i64 as u64)
}

pub fn decode_fixed(raw: u64, frac_bits: u32) -> f64 {
    raw as i64 as f64 / 2f64.powi(frac_bits as i32)
}

/// Raw encoding of 1/2.
pub fn half(frac_bits: u32) -> u64 {
    1u64 << (frac_bits - 1)
}

/// Raw encoding of 1.
pub fn one(frac_bits: u32) -> u64 {
    1u64 << frac_bits
}

#[cfg(test)]
mod tests {
    use super::*;

    fn el(v: u64, w: u32) -> RingElement {
        RingElement::with_width(v, w).unwrap()
    }

    #[test]
    fn basic_examples() {
        assert_eq!(el(200, 8).mul(el(2, 8)).unwrap().value(), 144);
        assert_eq!(el(u64::MAX, 64).add(el(1, 64)).unwrap().value(), 0);
        assert_eq!(el(1, 1).mul(el(1, 1)).unwrap().value(), 1);
        assert_eq!(el(1, 1).add(el(1, 1)).unwrap().value(), 0);
    }

    #[test]
    fn width_mismatch_rejected() {
        let err = el(1, 8).add(el(1, 16)).unwrap_err();
        assert!(matches!(err, Error::WidthMismatch { left: 8, right: 16 }));
        assert!(RingElement::with_width(3, 12).is_err());
    }

    #[test]
    fn truncate_examples() {
        assert_eq!(el(0, 64).truncate(13).unwrap().value(), 0);
        assert_eq!(el((1 << 13) * 7 + 5, 64).truncate(13).unwrap().value(), 7);
        assert!(el(5, 8).truncate(3).is_err());
    }

    #[test]
    fn truncate_is_floor_division_on_small_ring() {
        // Brute-force oracle over Z_{2^8}: shift agrees with integer floor division.
        let r = Ring::Z8;
        for a in 0u64..256 {
            assert_eq!(r.shr(a, 3), a / 8);
        }
    }

    #[test]
    fn msb_examples() {
        assert_eq!(el(0, 64).msb().unwrap(), 0);
        assert_eq!(el(128, 8).msb().unwrap(), 1);
        assert_eq!(el(127, 8).msb().unwrap(), 0);
        assert!(el(1, 1).msb().is_err());
    }

    #[test]
    fn fixed_examples() {
        assert_eq!(encode_fixed(0.0, 13).unwrap(), 0);
        assert_eq!(encode_fixed(-1.0, 13).unwrap(), 0u64.wrapping_sub(8192));
        let h = FixedPoint::encode(0.5, 13).unwrap();
        assert_eq!(h.raw().value(), 4096);
        assert_eq!(h.decode(), 0.5);
        assert!(encode_fixed(2f64.powi(50), 13).is_err());
    }

    #[test]
    fn signed_helpers() {
        let r = Ring::Z8;
        assert_eq!(r.to_signed(255), -1);
        assert_eq!(r.to_signed(128), -128);
        assert_eq!(r.from_signed(-1), 255);
        assert_eq!(r.sar(0xF0, 2), 0xFC);
        assert_eq!(r.shr(0xF0, 2), 0x3C);
    }
}
