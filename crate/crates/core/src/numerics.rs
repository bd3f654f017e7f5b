//! Reduced-precision emulation, the seeded PRNG, and tolerance helpers.
//!
//! Every value is carried as an `f64`; a [`PrecisionFormat`] only describes
//! how values are rounded when a computation is tagged with it.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SwrError};

/// Names accepted by [`PrecisionFormat::from_name`] for the table presets.
pub const PRESET_NAMES: [&str; 5] = ["fp32", "fp16", "bf16", "fp8e4m3", "fp8e5m2"];

/// A binary floating-point format with round-to-nearest-even semantics.
///
/// The exponent range follows the IEEE-754 layout: the all-ones exponent is
/// reserved, so the largest finite value is `(2 - 2^-p) * 2^(2^e - 2 - bias)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecisionFormat {
    pub name: String,
    /// Stored mantissa bits `p` (the implicit leading one is not counted).
    pub mantissa_bits: u32,
    pub exponent_bits: u32,
    pub bias: i32,
    pub subnormals: bool,
}

impl PrecisionFormat {
    pub fn new(
        name: impl Into<String>,
        mantissa_bits: u32,
        exponent_bits: u32,
        bias: i32,
        subnormals: bool,
    ) -> Result<Self> {
        if mantissa_bits < 1 || exponent_bits < 2 {
            return Err(SwrError::Domain(format!(
                "format needs p >= 1 and e >= 2, got p={mantissa_bits}, e={exponent_bits}"
            )));
        }
        let fmt = Self {
            name: name.into(),
            mantissa_bits,
            exponent_bits,
            bias,
            subnormals,
        };
        if !fmt.is_binary64() {
            let lowest = fmt.min_exponent() - mantissa_bits as i32;
            if lowest < -1000 || fmt.max_exponent() > 1000 || exponent_bits > 11 {
                return Err(SwrError::Domain(format!(
                    "format `{}` does not fit inside binary64 emulation",
                    fmt.name
                )));
            }
        }
        Ok(fmt)
    }

    fn preset(name: &str, p: u32, e: u32, bias: i32) -> Self {
        Self {
            name: name.to_string(),
            mantissa_bits: p,
            exponent_bits: e,
            bias,
            subnormals: true,
        }
    }

    pub fn fp64() -> Self {
        Self::preset("fp64", 52, 11, 1023)
    }

    pub fn fp32() -> Self {
        Self::preset("fp32", 23, 8, 127)
    }

    pub fn fp16() -> Self {
        Self::preset("fp16", 10, 5, 15)
    }

    pub fn bf16() -> Self {
        Self::preset("bf16", 7, 8, 127)
    }

    pub fn fp8e4m3() -> Self {
        Self::preset("fp8e4m3", 3, 4, 7)
    }

    pub fn fp8e5m2() -> Self {
        Self::preset("fp8e5m2", 2, 5, 15)
    }

    /// Looks up a preset by name. `fp64` is accepted as the identity format.
    pub fn from_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "fp64" | "f64" | "float64" => Ok(Self::fp64()),
            "fp32" | "f32" | "float32" => Ok(Self::fp32()),
            "fp16" | "f16" | "float16" => Ok(Self::fp16()),
            "bf16" | "bfloat16" => Ok(Self::bf16()),
            "fp8e4m3" | "e4m3" => Ok(Self::fp8e4m3()),
            "fp8e5m2" | "e5m2" => Ok(Self::fp8e5m2()),
            _ => Err(SwrError::Unknown {
                kind: "precision format",
                name: name.to_string(),
            }),
        }
    }

    pub fn presets() -> Vec<Self> {
        PRESET_NAMES
            .iter()
            .map(|n| Self::from_name(n).expect("preset"))
            .collect()
    }

    pub fn with_subnormals(mut self, enabled: bool) -> Self {
        self.subnormals = enabled;
        self
    }

    /// True when rounding to this format is the identity on `f64`.
    pub fn is_binary64(&self) -> bool {
        self.mantissa_bits >= 52 && self.min_exponent() <= -1022 && self.max_exponent() >= 1023
    }

    /// Exponent of the smallest normal number, `1 - bias`.
    pub fn min_exponent(&self) -> i32 {
        1 - self.bias
    }

    pub fn max_exponent(&self) -> i32 {
        (1i32 << self.exponent_bits) - 2 - self.bias
    }

    pub fn min_normal(&self) -> f64 {
        pow2(self.min_exponent())
    }

    pub fn min_subnormal(&self) -> f64 {
        pow2(self.min_exponent() - self.mantissa_bits as i32)
    }

    pub fn max_finite(&self) -> f64 {
        let p = self.mantissa_bits as i32;
        (2.0 - pow2(-p)) * pow2(self.max_exponent())
    }

    /// Rounds `x` to the nearest value of this format, ties to even.
    pub fn quantize(&self, x: f64) -> f64 {
        quantize(x, self)
    }
}

/// Exact power of two for exponents inside the binary64 range.
pub fn pow2(k: i32) -> f64 {
    if k >= -1022 {
        assert!(k <= 1023, "2^{k} overflows binary64");
        f64::from_bits(((k + 1023) as u64) << 52)
    } else {
        assert!(k >= -1074, "2^{k} underflows binary64");
        f64::from_bits(1u64 << (k + 1074))
    }
}

/// Unbiased binary exponent of a positive finite `f64` (subnormals report -1023).
fn binary_exponent(a: f64) -> i32 {
    ((a.to_bits() >> 52) & 0x7ff) as i32 - 1023
}

/// Round-to-nearest-even quantization of `x` into `fmt`.
///
/// NaN and infinities pass through; overflow saturates to a signed infinity;
/// magnitudes below half the smallest subnormal become a signed zero. With
/// subnormals disabled every magnitude below the smallest normal flushes to zero.
pub fn quantize(x: f64, fmt: &PrecisionFormat) -> f64 {
    if !x.is_finite() || x == 0.0 || fmt.is_binary64() {
        return x;
    }
    let a = x.abs();
    let emin = fmt.min_exponent();
    if !fmt.subnormals && a < fmt.min_normal() {
        return 0.0f64.copysign(x);
    }
    let e = binary_exponent(a).max(emin);
    let spacing = e - fmt.mantissa_bits as i32;
    let scaled = a * pow2(-spacing);
    let y = scaled.round_ties_even() * pow2(spacing);
    if y > fmt.max_finite() {
        f64::INFINITY.copysign(x)
    } else {
        y.copysign(x)
    }
}

/// Largest contraction factor strictly below one that the format can hold.
pub fn max_representable_contraction(fmt: &PrecisionFormat) -> f64 {
    1.0 - pow2(-(fmt.mantissa_bits as i32) - 1)
}

/// Scalar arithmetic that rounds after every operation.
///
/// `storage` rounds products, quotients and transcendental results;
/// `accumulate` rounds running sums of GEMM-shaped contractions.
#[derive(Debug, Clone, PartialEq)]
pub struct Arith {
    pub storage: PrecisionFormat,
    pub accumulate: PrecisionFormat,
}

impl Arith {
    /// Storage rounding in `fmt`, accumulation in fp32 or `fmt`, whichever is wider.
    pub fn new(fmt: &PrecisionFormat) -> Self {
        let accumulate = if fmt.mantissa_bits >= 23 {
            fmt.clone()
        } else {
            PrecisionFormat::fp32()
        };
        Self {
            storage: fmt.clone(),
            accumulate,
        }
    }

    pub fn exact() -> Self {
        Self::new(&PrecisionFormat::fp64())
    }

    pub fn with_accumulate(mut self, fmt: PrecisionFormat) -> Self {
        self.accumulate = fmt;
        self
    }

    #[inline]
    pub fn q(&self, x: f64) -> f64 {
        quantize(x, &self.storage)
    }

    #[inline]
    pub fn mul(&self, a: f64, b: f64) -> f64 {
        self.q(a * b)
    }

    #[inline]
    pub fn add(&self, a: f64, b: f64) -> f64 {
        self.q(a + b)
    }

    #[inline]
    pub fn sub(&self, a: f64, b: f64) -> f64 {
        self.q(a - b)
    }

    #[inline]
    pub fn div(&self, a: f64, b: f64) -> f64 {
        self.q(a / b)
    }

    #[inline]
    pub fn ln(&self, a: f64) -> f64 {
        self.q(a.ln())
    }

    #[inline]
    pub fn exp(&self, a: f64) -> f64 {
        self.q(a.exp())
    }

    /// `acc + a * b` with the product rounded to storage and the sum to the accumulator.
    #[inline]
    pub fn fma_acc(&self, acc: f64, a: f64, b: f64) -> f64 {
        quantize(acc + self.mul(a, b), &self.accumulate)
    }
}

/// Deterministic SplitMix64 stream.
#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: SplitMix64,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: SplitMix64::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw in `[0, 1)` from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * pow2(-53)
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(SwrError::Domain(format!("invalid range [{lo}, {hi})")));
        }
        let x = lo + (hi - lo) * self.next_f64();
        // lo + span * u can round up to hi
        Ok(if x >= hi { hi.next_down() } else { x })
    }

    pub fn uniform_vec(&mut self, len: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
        (0..len).map(|_| self.uniform(lo, hi)).collect()
    }
}

/// Acceptance thresholds: `|actual - expected| <= abs_tol + rel_tol * |expected|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TolerancePolicy {
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl TolerancePolicy {
    pub fn new(rel_tol: f64, abs_tol: f64) -> Result<Self> {
        if !(rel_tol >= 0.0 && abs_tol >= 0.0) {
            return Err(SwrError::Domain(format!(
                "tolerances must be non-negative, got rel={rel_tol}, abs={abs_tol}"
            )));
        }
        Ok(Self { rel_tol, abs_tol })
    }

    pub fn relative(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol: 0.0,
        }
    }

    pub fn accepts(&self, actual: f64, expected: f64) -> bool {
        (actual - expected).abs() <= self.abs_tol + self.rel_tol * expected.abs()
    }

    /// Norm-wise check: `max|actual - expected| <= abs_tol + rel_tol * max|expected|`.
    pub fn accepts_slice(&self, actual: &[f64], expected: &[f64]) -> bool {
        actual.len() == expected.len()
            && max_abs_diff(actual, expected) <= self.abs_tol + self.rel_tol * max_abs(expected)
    }
}

pub fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Largest elementwise difference; NaN anywhere yields NaN.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    let mut m = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let d = (x - y).abs();
        if d.is_nan() {
            return f64::NAN;
        }
        m = m.max(d);
    }
    m
}

/// `max|approx - reference| / max|reference|`, zero when both are zero.
pub fn rel_err_inf(approx: &[f64], reference: &[f64]) -> f64 {
    let diff = max_abs_diff(approx, reference);
    let scale = max_abs(reference);
    if scale == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Every finite bf16 value as f64, from the bit patterns.
    fn all_bf16() -> Vec<f64> {
        (0u32..=0xffff)
            .map(|bits| f32::from_bits(bits << 16) as f64)
            .filter(|v| v.is_finite())
            .collect()
    }

    /// Nearest bf16 by exhaustive search; ties pick the even mantissa.
    fn bf16_oracle(x: f64) -> f64 {
        let mut best = f64::NAN;
        let mut best_bits = 0u32;
        let mut best_d = f64::INFINITY;
        for bits in 0u32..=0xffff {
            let v = f32::from_bits(bits << 16) as f64;
            if !v.is_finite() {
                continue;
            }
            let d = (v - x).abs();
            if d < best_d || (d == best_d && bits & 1 == 0 && best_bits & 1 == 1) {
                best = v;
                best_bits = bits;
                best_d = d;
            }
        }
        best
    }

    #[test]
    fn zero_is_representable() {
        assert_eq!(quantize(0.0, &PrecisionFormat::bf16()), 0.0);
        assert!(quantize(-0.0, &PrecisionFormat::bf16()).is_sign_negative());
    }

    #[test]
    fn bf16_tie_below_one_rounds_to_even() {
        let x = 1.0 - pow2(-9);
        // halfway between 1 - 2^-8 (odd mantissa) and 1.0 (even mantissa)
        let oracle = bf16_oracle(x);
        assert_eq!(oracle, 1.0);
        assert_eq!(quantize(x, &PrecisionFormat::bf16()), oracle);
        let just_below = 1.0 - pow2(-9) - pow2(-20);
        assert_eq!(bf16_oracle(just_below), 1.0 - pow2(-8));
        assert_eq!(quantize(just_below, &PrecisionFormat::bf16()), 1.0 - pow2(-8));
    }

    #[test]
    fn bf16_matches_exhaustive_oracle_on_samples() {
        let fmt = PrecisionFormat::bf16();
        let mut rng = SeededRng::new(11);
        for _ in 0..200 {
            let x = (rng.next_f64() - 0.5) * pow2(rng.next_u64() as i32 % 60 - 30);
            assert_eq!(quantize(x, &fmt), bf16_oracle(x), "x = {x:e}");
        }
        let values = all_bf16();
        assert!(values.iter().all(|&v| quantize(v, &fmt) == v));
    }

    #[test]
    fn fp32_flushes_below_half_subnormal() {
        let fp32 = PrecisionFormat::fp32();
        assert_eq!(quantize(pow2(-150), &fp32), 0.0);
        assert_eq!((pow2(-150) as f32) as f64, 0.0);
        assert_eq!(quantize(pow2(-149), &fp32), pow2(-149));
        assert_eq!(quantize(1.5 * pow2(-149), &fp32), pow2(-148));
    }

    #[test]
    fn overflow_saturates_to_infinity() {
        let fp16 = PrecisionFormat::fp16();
        assert_eq!(fp16.max_finite(), 65504.0);
        assert_eq!(quantize(65504.0, &fp16), 65504.0);
        assert_eq!(quantize(65519.0, &fp16), 65504.0);
        assert_eq!(quantize(65520.0, &fp16), f64::INFINITY);
        assert_eq!(quantize(-1e9, &fp16), f64::NEG_INFINITY);
    }

    #[test]
    fn nan_propagates() {
        assert!(quantize(f64::NAN, &PrecisionFormat::fp8e4m3()).is_nan());
        assert_eq!(quantize(f64::INFINITY, &PrecisionFormat::bf16()), f64::INFINITY);
    }

    #[test]
    fn disabled_subnormals_flush() {
        let fmt = PrecisionFormat::fp16().with_subnormals(false);
        assert_eq!(quantize(pow2(-15), &fmt), 0.0);
        assert_eq!(quantize(pow2(-14), &fmt), pow2(-14));
        assert_eq!(quantize(pow2(-15), &PrecisionFormat::fp16()), pow2(-15));
    }

    #[test]
    fn preset_ranges() {
        let bf16 = PrecisionFormat::bf16();
        assert_eq!(bf16.min_normal(), pow2(-126));
        assert_eq!(bf16.min_subnormal(), pow2(-133));
        let e4m3 = PrecisionFormat::fp8e4m3();
        assert_eq!(e4m3.min_normal(), pow2(-6));
        assert_eq!(e4m3.min_subnormal(), pow2(-9));
        assert!(PrecisionFormat::new("bad", 0, 5, 15, true).is_err());
        assert!(PrecisionFormat::new("bad", 3, 1, 1, true).is_err());
        assert!(PrecisionFormat::from_name("fp4").is_err());
    }

    #[test]
    fn contraction_table_values() {
        assert_eq!(max_representable_contraction(&PrecisionFormat::bf16()), 0.99609375);
        assert_eq!(max_representable_contraction(&PrecisionFormat::fp8e5m2()), 0.875);
        assert_eq!(max_representable_contraction(&PrecisionFormat::fp16()), 0.99951171875);
        assert_eq!(max_representable_contraction(&PrecisionFormat::fp8e4m3()), 0.9375);
    }

    /// Reference SplitMix64, written out independently of the wrapped crate.
    fn splitmix_reference(seed: u64, count: usize) -> Vec<u64> {
        let mut state = seed;
        (0..count)
            .map(|_| {
                state = state.wrapping_add(0x9E3779B97F4A7C15);
                let mut z = state;
                z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
                z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
                z ^ (z >> 31)
            })
            .collect()
    }

    #[test]
    fn splitmix_matches_published_sequence() {
        let expected: [u64; 8] = [
            0xE220A8397B1DCDAF,
            0x6E789E6AA1B965F4,
            0x06C45D188009454F,
            0xF88BB8A8724C81EC,
            0x1B39896A51A8749B,
            0x53CB9F0C747EA2EA,
            0x2C829ABE1F4532E1,
            0xC584133AC916AB3C,
        ];
        assert_eq!(splitmix_reference(0, 8), expected);
        let mut rng = SeededRng::new(0);
        let got: Vec<u64> = (0..8).map(|_| rng.next_u64()).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn uniform_first_draw_from_reference() {
        let mut rng = SeededRng::new(0);
        let expected = (0xE220A8397B1DCDAFu64 >> 11) as f64 / 9007199254740992.0;
        assert_eq!(rng.uniform(0.0, 1.0).unwrap(), expected);
    }

    #[test]
    fn uniform_rejects_empty_interval() {
        let mut rng = SeededRng::new(3);
        assert!(rng.uniform(1.0, 1.0).is_err());
        assert!(rng.uniform(2.0, 1.0).is_err());
    }

    #[test]
    fn same_seed_same_stream() {
        let mut a = SeededRng::new(42);
        let mut b = SeededRng::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn tolerance_policy() {
        assert!(TolerancePolicy::new(-1.0, 0.0).is_err());
        let tol = TolerancePolicy::new(1e-3, 1e-9).unwrap();
        assert!(tol.accepts(1.0005, 1.0));
        assert!(!tol.accepts(1.01, 1.0));
        assert_eq!(rel_err_inf(&[0.0], &[0.0]), 0.0);
        assert!(rel_err_inf(&[f64::NAN], &[1.0]).is_nan());
    }
}
