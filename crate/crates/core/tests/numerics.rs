use proptest::prelude::*;
use swr_core::numerics::{quantize, PrecisionFormat, SeededRng};

fn formats() -> Vec<PrecisionFormat> {
    PrecisionFormat::presets()
}

proptest! {
    #[test]
    fn quantize_is_idempotent(x in -1e6f64..1e6, idx in 0..formats().len()) {
        let fmt = &formats()[idx];
        let once = quantize(x, fmt);
        prop_assert_eq!(quantize(once, fmt).to_bits(), once.to_bits());
    }

    #[test]
    fn quantize_is_monotone(x in -1e5f64..1e5, y in -1e5f64..1e5, idx in 0..formats().len()) {
        let fmt = &formats()[idx];
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        prop_assert!(quantize(lo, fmt) <= quantize(hi, fmt));
    }

    #[test]
    fn quantize_is_odd(x in -1e4f64..1e4, idx in 0..formats().len()) {
        let fmt = &formats()[idx];
        prop_assert_eq!(quantize(-x, fmt), -quantize(x, fmt));
    }

    #[test]
    fn quantize_error_is_half_ulp(x in 1e-3f64..1e3) {
        let fmt = PrecisionFormat::bf16();
        let q = quantize(x, &fmt);
        let ulp = 2f64.powi(x.log2().floor() as i32 - 7);
        prop_assert!((q - x).abs() <= ulp / 2.0);
    }
}

#[test]
fn fp32_matches_hardware_rounding() {
    let fmt = PrecisionFormat::fp32();
    let mut rng = SeededRng::new(2024);
    for _ in 0..1_000_000 {
        // Random bit patterns cover subnormals, overflow and every exponent.
        let x = f64::from_bits(rng.next_u64());
        if x.is_nan() {
            continue;
        }
        let hw = x as f32 as f64;
        assert_eq!(quantize(x, &fmt).to_bits(), hw.to_bits(), "x = {x:e}");
    }
}

#[test]
fn fp32_matches_hardware_rounding_near_one() {
    let fmt = PrecisionFormat::fp32();
    let mut rng = SeededRng::new(7);
    for _ in 0..200_000 {
        let x = rng.uniform(-4.0, 4.0).unwrap();
        assert_eq!(quantize(x, &fmt), x as f32 as f64);
    }
}
