//! Arithmetic on the ring Z/2^64 and fixed-point encoding of reals into it.
//!
//! Every secret value in the system lives in this ring. Reals are encoded by
//! scaling with `2^frac_bits` and rounding half away from zero; negatives use
//! the two's-complement view of the ring, so `encode(-x) == -encode(x)`.
//!
//! Encoding and decoding are generic over any [`num_traits::Float`] so the
//! same code serves `f32` training and `f64` reference execution.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use num_traits::Float;
use thiserror::Error;

/// Default number of fractional bits.
pub const DEFAULT_FRAC_BITS: u32 = 16;

/// Magnitude bound (log2) on raw values accepted by [`truncate`].
pub const TRUNC_BOUND_BITS: u32 = 48;

const TRUNC_SHIFT_BITS: u32 = TRUNC_BOUND_BITS + 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RingError {
    #[error("value {value} is outside the representable range +/-2^{limit_bits}")]
    OutOfRange { value: f64, limit_bits: u32 },
    #[error("frac_bits must lie in 1..=31, got {0}")]
    BadFracBits(u32),
    #[error("shape {shape:?} does not match {len} elements")]
    ShapeMismatch { shape: Vec<usize>, len: usize },
}

/// An element of Z/2^64. All operations wrap.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(transparent)]
pub struct Ring64(pub u64);

impl Ring64 {
    pub const ZERO: Ring64 = Ring64(0);
    pub const ONE: Ring64 = Ring64(1);

    /// Two's-complement reading of the element.
    #[inline]
    pub fn signed(self) -> i64 {
        self.0 as i64
    }

    #[inline]
    pub fn from_signed(v: i64) -> Self {
        Ring64(v as u64)
    }

    /// Arithmetic (sign-preserving) right shift of the signed reading.
    #[inline]
    pub fn shr_signed(self, bits: u32) -> Self {
        Ring64::from_signed(self.signed() >> bits)
    }

    #[inline]
    pub fn msb(self) -> bool {
        self.0 >> 63 == 1
    }
}

impl fmt::Debug for Ring64 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ring64({})", self.0)
    }
}

impl From<u64> for Ring64 {
    fn from(v: u64) -> Self {
        Ring64(v)
    }
}

impl Add for Ring64 {
    type Output = Ring64;
    #[inline]
    fn add(self, rhs: Ring64) -> Ring64 {
        Ring64(self.0.wrapping_add(rhs.0))
    }
}

impl Sub for Ring64 {
    type Output = Ring64;
    #[inline]
    fn sub(self, rhs: Ring64) -> Ring64 {
        Ring64(self.0.wrapping_sub(rhs.0))
    }
}

impl Mul for Ring64 {
    type Output = Ring64;
    #[inline]
    fn mul(self, rhs: Ring64) -> Ring64 {
        Ring64(self.0.wrapping_mul(rhs.0))
    }
}

impl Neg for Ring64 {
    type Output = Ring64;
    #[inline]
    fn neg(self) -> Ring64 {
        Ring64(self.0.wrapping_neg())
    }
}

impl AddAssign for Ring64 {
    #[inline]
    fn add_assign(&mut self, rhs: Ring64) {
        *self = *self + rhs;
    }
}

impl SubAssign for Ring64 {
    #[inline]
    fn sub_assign(&mut self, rhs: Ring64) {
        *self = *self - rhs;
    }
}

impl MulAssign for Ring64 {
    #[inline]
    fn mul_assign(&mut self, rhs: Ring64) {
        *self = *self * rhs;
    }
}

impl Sum for Ring64 {
    fn sum<I: Iterator<Item = Ring64>>(iter: I) -> Ring64 {
        iter.fold(Ring64::ZERO, Add::add)
    }
}

pub fn ring_add(a: Ring64, b: Ring64) -> Ring64 {
    a + b
}

pub fn ring_sub(a: Ring64, b: Ring64) -> Ring64 {
    a - b
}

pub fn ring_mul(a: Ring64, b: Ring64) -> Ring64 {
    a * b
}

/// Fixed-point parameters. `scale = 2^frac_bits`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FixedConfig {
    frac_bits: u32,
}

impl Default for FixedConfig {
    fn default() -> Self {
        FixedConfig {
            frac_bits: DEFAULT_FRAC_BITS,
        }
    }
}

impl FixedConfig {
    pub fn new(frac_bits: u32) -> Result<Self, RingError> {
        if !(1..=31).contains(&frac_bits) {
            return Err(RingError::BadFracBits(frac_bits));
        }
        Ok(FixedConfig { frac_bits })
    }

    #[inline]
    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    #[inline]
    pub fn scale(&self) -> u64 {
        1u64 << self.frac_bits
    }

    /// One unit in the last place, as a real.
    pub fn ulp<T: Float>(&self) -> T {
        T::one() / T::from(self.scale()).unwrap()
    }

    /// `round(x * 2^frac_bits) mod 2^64`, rounding half away from zero.
    pub fn encode<T: Float>(&self, x: T) -> Result<Ring64, RingError> {
        let limit_bits = 63 - self.frac_bits;
        let limit = T::from(2.0f64.powi(limit_bits as i32)).unwrap();
        if !(x.abs() < limit) {
            return Err(RingError::OutOfRange {
                value: x.to_f64().unwrap_or(f64::NAN),
                limit_bits,
            });
        }
        let scaled = (x * T::from(self.scale()).unwrap()).round();
        // |scaled| <= 2^63 after rounding; clamp the single edge value.
        let v = scaled.to_i64().unwrap_or(if scaled > T::zero() { i64::MAX } else { i64::MIN });
        Ok(Ring64::from_signed(v))
    }

    pub fn decode<T: Float>(&self, r: Ring64) -> T {
        T::from(r.signed()).unwrap() / T::from(self.scale()).unwrap()
    }

    pub fn encode_slice<T: Float>(&self, xs: &[T]) -> Result<Vec<Ring64>, RingError> {
        xs.iter().map(|&x| self.encode(x)).collect()
    }

    pub fn decode_slice<T: Float>(&self, rs: &[Ring64]) -> Vec<T> {
        rs.iter().map(|&r| self.decode(r)).collect()
    }
}

pub fn encode_fixed<T: Float>(x: T, cfg: FixedConfig) -> Result<Ring64, RingError> {
    cfg.encode(x)
}

pub fn decode_fixed<T: Float>(r: Ring64, cfg: FixedConfig) -> T {
    cfg.decode(r)
}

/// Plaintext values of a truncation mask: `r_shifted = floor(r / 2^frac_bits)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TruncMask {
    pub r: Ring64,
    pub r_shifted: Ring64,
}

impl TruncMask {
    /// `r` must be drawn below `2^63` so the masked opening never wraps.
    pub fn new(r: u64, cfg: FixedConfig) -> Self {
        let r = r & (u64::MAX >> 1);
        TruncMask {
            r: Ring64(r),
            r_shifted: Ring64(r >> cfg.frac_bits()),
        }
    }
}

/// Public offset `2^(TRUNC_BOUND_BITS+1)` added before opening so the masked
/// value is non-negative.
#[inline]
pub fn trunc_offset() -> Ring64 {
    Ring64(1u64 << TRUNC_SHIFT_BITS)
}

/// The public correction subtracted after the shift.
#[inline]
pub fn trunc_correction(cfg: FixedConfig) -> Ring64 {
    Ring64(1u64 << (TRUNC_SHIFT_BITS - cfg.frac_bits()))
}

/// Rescale `r` (carrying `2*frac_bits` fractional bits) down by `2^frac_bits`
/// using a mask, exactly as the shared protocol does on opened values.
///
/// Requires `|signed(r)| <= 2^48`. The result is `floor(r / 2^f)` or one more;
/// outside the bound the result is unspecified.
pub fn truncate(r: Ring64, cfg: FixedConfig, mask: &TruncMask) -> Ring64 {
    let opened = r + trunc_offset() + mask.r;
    Ring64(opened.0 >> cfg.frac_bits()) - trunc_correction(cfg) - mask.r_shifted
}

/// Deterministic floor rescale used by the plaintext fixed-point reference.
#[inline]
pub fn truncate_floor(r: Ring64, cfg: FixedConfig) -> Ring64 {
    r.shr_signed(cfg.frac_bits())
}

/// Ring-encoded tensor: a flat element buffer plus its shape.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixedVec {
    elems: Vec<Ring64>,
    shape: Vec<usize>,
    cfg: FixedConfig,
}

impl FixedVec {
    pub fn new(elems: Vec<Ring64>, shape: Vec<usize>, cfg: FixedConfig) -> Result<Self, RingError> {
        if shape.iter().product::<usize>() != elems.len() {
            return Err(RingError::ShapeMismatch {
                shape,
                len: elems.len(),
            });
        }
        Ok(FixedVec { elems, shape, cfg })
    }

    pub fn from_vec(elems: Vec<Ring64>, cfg: FixedConfig) -> Self {
        let n = elems.len();
        FixedVec {
            elems,
            shape: vec![n],
            cfg,
        }
    }

    pub fn zeros(shape: Vec<usize>, cfg: FixedConfig) -> Self {
        let n = shape.iter().product();
        FixedVec {
            elems: vec![Ring64::ZERO; n],
            shape,
            cfg,
        }
    }

    pub fn encode<T: Float>(xs: &[T], shape: Vec<usize>, cfg: FixedConfig) -> Result<Self, RingError> {
        FixedVec::new(cfg.encode_slice(xs)?, shape, cfg)
    }

    pub fn decode<T: Float>(&self) -> Vec<T> {
        self.cfg.decode_slice(&self.elems)
    }

    pub fn elems(&self) -> &[Ring64] {
        &self.elems
    }

    pub fn elems_mut(&mut self) -> &mut [Ring64] {
        &mut self.elems
    }

    pub fn into_elems(self) -> Vec<Ring64> {
        self.elems
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn cfg(&self) -> FixedConfig {
        self.cfg
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> FixedConfig {
        FixedConfig::default()
    }

    #[test]
    fn encode_examples() {
        assert_eq!(cfg().encode(0.0f64).unwrap(), Ring64(0));
        assert_eq!(cfg().encode(1.0f64).unwrap(), Ring64(65536));
        assert_eq!(cfg().encode(-1.0f64).unwrap(), Ring64(0u64.wrapping_sub(65536)));
        assert_eq!(cfg().encode(-2.5f32).unwrap(), -cfg().encode(2.5f32).unwrap());
    }

    #[test]
    fn encode_rounds_half_away_from_zero() {
        let c = FixedConfig::new(1).unwrap();
        assert_eq!(c.encode(0.25f64).unwrap(), Ring64(1));
        assert_eq!(c.encode(-0.25f64).unwrap(), Ring64::from_signed(-1));
    }

    #[test]
    fn encode_rejects_out_of_range() {
        assert!(cfg().encode(2.0f64.powi(47)).is_err());
        assert!(cfg().encode(-(2.0f64.powi(47))).is_err());
        assert!(cfg().encode(f64::NAN).is_err());
        assert!(cfg().encode(2.0f64.powi(46)).is_ok());
    }

    #[test]
    fn decode_examples() {
        assert_eq!(cfg().decode::<f64>(Ring64(65536)), 1.0);
        assert_eq!(cfg().decode::<f64>(Ring64(0)), 0.0);
        let x = 3.14159f64;
        assert!((cfg().decode::<f64>(cfg().encode(x).unwrap()) - x).abs() <= 2f64.powi(-16));
    }

    #[test]
    fn frac_bits_bounds() {
        assert!(FixedConfig::new(0).is_err());
        assert!(FixedConfig::new(32).is_err());
        assert!(FixedConfig::new(31).is_ok());
    }

    #[test]
    fn ring_ops_wrap() {
        assert_eq!(ring_add(Ring64(u64::MAX), Ring64(1)), Ring64(0));
        assert_eq!(ring_mul(Ring64(12345), Ring64(0)), Ring64(0));
        assert_eq!(ring_mul(Ring64(3), Ring64(5)), Ring64(15));
        assert_eq!(ring_sub(Ring64(0), Ring64(1)), Ring64(u64::MAX));
    }

    #[test]
    fn truncate_examples() {
        let c = cfg();
        let one = c.encode(1.0f64).unwrap();
        let raw = one * one;
        assert_eq!(raw, Ring64(1 << 32));
        for r in [0u64, 1, 12345, u64::MAX >> 1, 0xdead_beef_cafe] {
            let m = TruncMask::new(r, c);
            let t = truncate(raw, c, &m);
            assert!((t.signed() - 65536).abs() <= 2, "{t:?}");
            assert!(truncate(Ring64::ZERO, c, &m).signed().abs() <= 1);
            let half = c.encode(0.5f64).unwrap();
            let q: f64 = c.decode(truncate(half * half, c, &m));
            assert!((q - 0.25).abs() <= 2f64.powi(-15));
        }
    }

    #[test]
    fn fixed_vec_shape_checked() {
        assert!(FixedVec::new(vec![Ring64(1); 6], vec![2, 3], cfg()).is_ok());
        assert!(FixedVec::new(vec![Ring64(1); 5], vec![2, 3], cfg()).is_err());
    }
}
